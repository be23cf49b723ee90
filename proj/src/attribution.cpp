#include "attribution.hpp"

#include <algorithm>
#include <cmath>

#include "eval.hpp"
#include "rng.hpp"

namespace ttlab {

std::vector<IgTarget> select_targets(const TransformerLM<double>& model,
                                     const std::vector<Dialog>& dialogs,
                                     const Vocab& vocab, double trp_min,
                                     std::size_t n_dialogs,
                                     std::size_t per_dialog,
                                     std::uint64_t seed) {
  if (!(trp_min >= 0.0 && trp_min <= 1.0))
    throw InvalidArgument("select_targets: trp_min out of [0,1]");
  if (n_dialogs == 0 || per_dialog == 0)
    throw InvalidArgument("select_targets: zero sample budget");
  std::vector<std::vector<IgTarget>> per(dialogs.size());
  std::size_t total_shifts = 0, qualifying = 0;
  for (std::size_t i = 0; i < dialogs.size(); ++i) {
    TokenSeq seq = encode_dialog(dialogs[i], vocab);
    Var<double> logits = model.forward(nullptr, seq);
    std::vector<double> trp = trp_probs(logits->value, vocab);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (!seq.shift_label[t] || !seq.eval_mask[t]) continue;
      ++total_shifts;
      if (trp[t] > trp_min) {
        per[i].push_back({i, dialogs[i].id, t, trp[t]});
        ++qualifying;
      }
    }
  }
  if (qualifying == 0)
    throw InvalidArgument("select_targets: 0 of " +
                          std::to_string(total_shifts) +
                          " true shift positions exceed trp " +
                          std::to_string(trp_min));

  Rng rng(seed);
  std::vector<std::size_t> with_hits;
  for (std::size_t i = 0; i < per.size(); ++i)
    if (!per[i].empty()) with_hits.push_back(i);
  rng.shuffle(with_hits);
  if (with_hits.size() > n_dialogs) with_hits.resize(n_dialogs);

  std::vector<IgTarget> out;
  for (std::size_t i : with_hits) {
    rng.shuffle(per[i]);
    std::size_t take = std::min(per_dialog, per[i].size());
    out.insert(out.end(), per[i].begin(), per[i].begin() + take);
  }
  return out;
}

std::vector<TurnAttribution> aggregate_attention(
    const TransformerLM<double>& model, const std::vector<Dialog>& dialogs,
    const Vocab& vocab, const std::vector<IgTarget>& targets, int layer) {
  if (layer >= model.cfg.n_layers)
    throw InvalidArgument("aggregate_attention: no layer " +
                          std::to_string(layer));
  std::vector<TurnAttribution> out;
  out.reserve(targets.size());
  for (const IgTarget& tg : targets) {
    if (tg.dialog_index >= dialogs.size())
      throw InvalidArgument("aggregate_attention: bad dialog index");
    TokenSeq seq = encode_dialog(dialogs[tg.dialog_index], vocab);
    if (tg.position >= seq.size())
      throw InvalidArgument("aggregate_attention: position beyond dialog " +
                            tg.dialog_id);
    AttnCapture<double> cap = model.attention_maps(seq);
    std::size_t l_lo = layer < 0 ? 0 : static_cast<std::size_t>(layer);
    std::size_t l_hi = layer < 0 ? cap.n_layers : l_lo + 1;
    std::vector<double> row(seq.size(), 0.0);
    std::size_t n_maps = 0;
    for (std::size_t l = l_lo; l < l_hi; ++l)
      for (std::size_t h = 0; h < cap.n_heads; ++h, ++n_maps) {
        const Tensor<double>& a = cap.at(l, h);
        for (std::size_t j = 0; j <= tg.position; ++j)
          row[j] += a.at2(tg.position, j);
      }
    for (double& x : row) x /= static_cast<double>(n_maps);

    TurnAttribution ta;
    ta.dialog_id = tg.dialog_id;
    ta.position = tg.position;
    ta.kind = AttributionKind::kAttention;
    int turn_t = seq.turn_index[tg.position];
    ta.padded = turn_t < 4;
    double kept = 0;
    for (std::size_t j = 0; j <= tg.position; ++j) {
      int off = turn_t - seq.turn_index[j];
      if (off < 5) {
        ta.values[static_cast<std::size_t>(off)] += row[j];
        kept += row[j];
      }
    }
    if (kept <= 0)
      throw StateError("aggregate_attention: zero attention mass kept");
    for (double& v : ta.values) v /= kept;
    out.push_back(std::move(ta));
  }
  return out;
}

IgResult integrate_gradients_fn(
    const Tensor<double>& input, const Tensor<double>& baseline,
    const IgConfig& cfg,
    const std::function<Var<double>(Tape<double>*, const Var<double>&)>& f) {
  cfg.validate();
  if (!input.same_shape(baseline))
    throw InvalidArgument("integrate_gradients: input " + input.shape_str() +
                          " vs baseline " + baseline.shape_str());

  // Quadrature nodes over alpha in [0,1] and their weights.
  std::vector<double> alphas, weights;
  if (cfg.quadrature == IgQuadrature::kTrapezoid) {
    std::size_t m = cfg.steps - 1;
    for (std::size_t i = 0; i <= m; ++i) {
      alphas.push_back(static_cast<double>(i) / static_cast<double>(m));
      weights.push_back((i == 0 || i == m) ? 0.5 / static_cast<double>(m)
                                           : 1.0 / static_cast<double>(m));
    }
  } else {
    for (std::size_t i = 0; i < cfg.steps; ++i) {
      alphas.push_back(static_cast<double>(i) /
                       static_cast<double>(cfg.steps));
      weights.push_back(1.0 / static_cast<double>(cfg.steps));
    }
  }

  IgResult r;
  {
    Var<double> vi = make_const(input);
    Var<double> vb = make_const(baseline);
    r.f_input = f(nullptr, vi)->value.at(0);
    r.f_baseline = f(nullptr, vb)->value.at(0);
  }

  Tensor<double> avg_grad(input.shape());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    Tensor<double> x(input.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
      x.at(i) = baseline.at(i) + alphas[k] * (input.at(i) - baseline.at(i));
    Tape<double> tape;
    Var<double> vx = make_var(std::move(x), true);
    Var<double> y = f(&tape, vx);
    if (y->value.size() != 1)
      throw InvalidArgument("integrate_gradients: target is not a scalar");
    tape.backward(y);
    if (!vx->grad.all_finite())
      throw NumericError("integrate_gradients: non-finite gradient at alpha " +
                         std::to_string(alphas[k]));
    for (std::size_t i = 0; i < avg_grad.size(); ++i)
      avg_grad.at(i) += weights[k] * vx->grad.at(i);
  }

  std::size_t rows = input.rank() == 2 ? input.rows() : 1;
  std::size_t cols = input.rank() == 2 ? input.cols() : input.size();
  r.token_values.assign(rows, 0.0);
  double total = 0;
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t c = 0; c < cols; ++c) {
      double a = avg_grad.at(t * cols + c) *
                 (input.at(t * cols + c) - baseline.at(t * cols + c));
      r.token_values[t] += a;
      total += a;
    }
  r.residual = std::abs(total - (r.f_input - r.f_baseline));
  return r;
}

IgAttribution integrated_gradients(const TransformerLM<double>& model,
                                   const Vocab& vocab, const Dialog& dialog,
                                   std::size_t position, const IgConfig& cfg) {
  cfg.validate();
  TokenSeq seq = encode_dialog(dialog, vocab);
  if (position >= seq.size())
    throw InvalidArgument("integrated_gradients: position beyond dialog " +
                          dialog.id);
  std::size_t d = static_cast<std::size_t>(model.cfg.d_model);
  Tensor<double> input({seq.size(), d});
  Tensor<double> baseline({seq.size(), d});
  int unk = vocab.special().unk_id;
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (std::size_t c = 0; c < d; ++c) {
      double v =
          model.wte->value.at2(static_cast<std::size_t>(seq.ids[t]), c);
      input.at2(t, c) = v;
      if (seq.word_index[t] < 0) {
        baseline.at2(t, c) = v;  // speaker tokens stay fixed on the path
      } else if (cfg.baseline == IgBaseline::kUnk) {
        baseline.at2(t, c) =
            model.wte->value.at2(static_cast<std::size_t>(unk), c);
      } else {
        baseline.at2(t, c) = 0.0;
      }
    }

  int s1 = vocab.special().speaker1_id;
  int s2 = vocab.special().speaker2_id;
  auto f = [&](Tape<double>* tape, const Var<double>& x) {
    Var<double> logits =
        model.forward_from_word_embeddings(tape, x, seq.speaker_ids);
    Var<double> row = ops::slice_rows(tape, logits, position, 1);
    // The favored speaker is re-chosen at every path point; ties resolve
    // to the first speaker. max() of two smooth functions stays
    // continuous, so completeness is preserved across switches.
    double l1 = row->value.at2(0, static_cast<std::size_t>(s1));
    double l2 = row->value.at2(0, static_cast<std::size_t>(s2));
    std::size_t pick = static_cast<std::size_t>(l2 > l1 ? s2 : s1);
    if (cfg.target == IgTargetKind::kTrpLogit)
      return ops::select_entry(tape, row, 0, pick);
    Var<double> probs = ops::softmax_rows(tape, row);
    return ops::select_entry(tape, probs, 0, pick);
  };

  IgResult base = integrate_gradients_fn(input, baseline, cfg, f);

  IgAttribution out;
  out.token_values = std::move(base.token_values);
  out.f_input = base.f_input;
  out.f_baseline = base.f_baseline;
  out.residual = base.residual;
  out.turn.dialog_id = dialog.id;
  out.turn.position = position;
  out.turn.kind = AttributionKind::kIg;
  int turn_t = seq.turn_index[position];
  out.turn.padded = turn_t < 4;
  for (std::size_t t = 0; t <= position; ++t) {
    int off = turn_t - seq.turn_index[t];
    if (off < 5)
      out.turn.values[static_cast<std::size_t>(off)] += out.token_values[t];
  }
  return out;
}

}  // namespace ttlab
