#include "eval.hpp"

#include <algorithm>
#include <cmath>

namespace ttlab {

void TrpSeries::push(double prob, bool label, const std::string& dialog_id,
                     std::size_t pos) {
  if (!(prob >= 0.0 && prob <= 1.0))
    throw InvalidArgument("TrpSeries: probability out of [0,1]");
  probs.push_back(prob);
  labels.push_back(label ? 1 : 0);
  dialog_ids.push_back(dialog_id);
  positions.push_back(pos);
}

std::vector<double> trp_probs(const Tensor<double>& logits,
                              const Vocab& vocab) {
  std::size_t rows = logits.rows(), cols = logits.cols();
  std::size_t s1 = static_cast<std::size_t>(vocab.special().speaker1_id);
  std::size_t s2 = static_cast<std::size_t>(vocab.special().speaker2_id);
  if (s1 >= cols || s2 >= cols)
    throw InvalidArgument("trp_probs: logits narrower than the vocabulary");
  std::vector<double> out(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    double mx = logits.at2(t, 0);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, logits.at2(t, c));
    double z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(logits.at2(t, c) - mx);
    double p1 = std::exp(logits.at2(t, s1) - mx) / z;
    double p2 = std::exp(logits.at2(t, s2) - mx) / z;
    out[t] = std::max(p1, p2);
  }
  return out;
}

EvalReport balanced_accuracy(const std::vector<char>& preds,
                             const std::vector<char>& labels) {
  if (preds.size() != labels.size())
    throw InvalidArgument("balanced_accuracy: length mismatch");
  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i])
      preds[i] ? ++r.tp : ++r.fn;
    else
      preds[i] ? ++r.fp : ++r.tn;
  }
  if (r.tp + r.fn == 0 || r.tn + r.fp == 0)
    throw InvalidArgument("bAcc undefined: labels are single-class");
  r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.tnr = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  r.bacc = (r.tpr + r.tnr) / 2.0;
  return r;
}

EvalReport apply_threshold(const TrpSeries& series, double threshold) {
  std::vector<char> preds(series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    preds[i] = series.probs[i] > threshold ? 1 : 0;
  EvalReport r = balanced_accuracy(preds, series.labels);
  r.threshold = threshold;
  return r;
}

EvalReport sweep_threshold(const TrpSeries& series,
                           const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("sweep_threshold: empty grid");
  for (double g : grid)
    if (!(g >= 0.0 && g <= 1.0))
      throw InvalidArgument("sweep_threshold: grid value out of [0,1]");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  EvalReport best;
  bool have = false;
  for (double g : sorted) {
    EvalReport r = apply_threshold(series, g);
    if (!have || r.bacc > best.bacc) {
      best = r;
      have = true;
    }
  }
  return best;
}

std::vector<double> default_grid() {
  std::vector<double> g;
  g.reserve(99);
  for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

std::vector<double> PosPredictor::shift_probs(const TokenSeq& seq,
                                              const Dialog& dialog,
                                              std::size_t turn_lo,
                                              bool slice_start) const {
  if (seq.size() == 0) return {};
  std::size_t turn_hi = static_cast<std::size_t>(seq.turn_index.back());
  if (turn_hi >= dialog.turns.size())
    throw InvalidArgument("pos predictor: sequence spans turn " +
                          std::to_string(turn_hi) + " beyond dialog " +
                          dialog.id);
  std::vector<std::vector<std::string>> tag_turns;
  for (std::size_t ti = turn_lo; ti <= turn_hi; ++ti) {
    const Turn& t = dialog.turns[ti];
    if (!t.has_pos() || t.pos.size() != t.words.size())
      throw InvalidArgument("pos predictor: dialog " + dialog.id +
                            " missing pos tags");
    tag_turns.push_back(t.pos);
  }
  std::vector<double> word_probs = slice_start
                                       ? table_.predict_sequence(tag_turns)
                                       : table_.predict_dialog(tag_turns);

  std::vector<double> out(seq.size(), 0.0);
  std::size_t word = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq.word_index[t] < 0) continue;
    bool last_subtoken = t + 1 == seq.size() ||
                         seq.word_index[t + 1] != seq.word_index[t] ||
                         seq.turn_index[t + 1] != seq.turn_index[t];
    if (!last_subtoken) continue;
    if (word >= word_probs.size())
      throw StateError("pos predictor: word count mismatch in " + dialog.id);
    out[t] = word_probs[word++];
  }
  if (word != word_probs.size())
    throw StateError("pos predictor: word count mismatch in " + dialog.id);
  return out;
}

TrpSeries collect_series(const ShiftPredictor& pred,
                         const std::vector<Dialog>& dialogs,
                         const Vocab& vocab) {
  TrpSeries series;
  for (const Dialog& d : dialogs) {
    TokenSeq seq = encode_dialog(d, vocab);
    std::vector<double> probs = pred.shift_probs(seq, d, 0, false);
    if (probs.size() != seq.size())
      throw StateError("predictor returned wrong-length probabilities");
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq.eval_mask[t]) series.push(probs[t], seq.shift_label[t], d.id, t);
  }
  return series;
}

EvalReport evaluate_model(const ShiftPredictor& pred,
                          const std::vector<Dialog>& test_dialogs,
                          const std::vector<Dialog>& valid_dialogs,
                          const Vocab& vocab, const std::vector<double>& grid,
                          TuneOn tune_on) {
  TrpSeries test = collect_series(pred, test_dialogs, vocab);
  if (tune_on == TuneOn::kTest) return sweep_threshold(test, grid);
  if (valid_dialogs.empty())
    throw InvalidArgument("evaluate_model: tuning on an empty validation set");
  TrpSeries valid = collect_series(pred, valid_dialogs, vocab);
  EvalReport tuned = sweep_threshold(valid, grid);
  return apply_threshold(test, tuned.threshold);
}

EvalReport ablate_context(const ShiftPredictor& pred,
                          const std::vector<Dialog>& dialogs,
                          const Vocab& vocab, const std::vector<double>& grid,
                          std::size_t k) {
  if (k > 4) throw InvalidArgument("ablate_context: k must be in 0..4");
  TrpSeries series;
  for (const Dialog& d : dialogs) {
    TokenSeq seq = encode_dialog(d, vocab);
    for (std::size_t ti = 4; ti < d.turns.size(); ++ti) {
      std::size_t tlo = ti - k;
      std::size_t lo = 0, hi = 0;
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (static_cast<std::size_t>(seq.turn_index[t]) == tlo &&
            (t == 0 || static_cast<std::size_t>(seq.turn_index[t - 1]) < tlo))
          lo = t;
        if (static_cast<std::size_t>(seq.turn_index[t]) == ti) hi = t + 1;
      }
      TokenSeq slice = slice_seq(seq, lo, hi);
      std::vector<double> probs = pred.shift_probs(slice, d, tlo, true);
      for (std::size_t t = 0; t < slice.size(); ++t)
        if (static_cast<std::size_t>(slice.turn_index[t]) == ti &&
            slice.eval_mask[t])
          series.push(probs[t], slice.shift_label[t], d.id, lo + t);
    }
  }
  if (series.size() == 0)
    throw InvalidArgument("ablate_context: no qualifying turns");
  return sweep_threshold(series, grid);
}

}  // namespace ttlab
