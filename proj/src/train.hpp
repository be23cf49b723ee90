#pragma once

// Training loops for the language model and the recurrent classifier.
// Both share the same skeleton: shuffled windows, AdamW with global-norm
// clipping, periodic validation, and selection of the weights with the
// lowest validation loss seen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "adamw.hpp"
#include "autodiff.hpp"
#include "bpe.hpp"
#include "error.hpp"
#include "lstm.hpp"
#include "rng.hpp"
#include "transformer.hpp"

namespace ttlab {

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t max_steps = 500;
  double lr = 6.25e-5;
  double weight_decay = 0.01;
  double dropout = 0.1;
  std::size_t eval_every = 50;
  std::uint64_t seed = 0;
  std::string precision = "f64";  // "f32" or "f64"
  double clip_norm = 1.0;
  // Speaker tokens are legitimate next-token targets and carry the
  // phenomenon of interest; excluding them is an ablation knob.
  bool speaker_targets = true;
  std::size_t window_stride = 0;  // 0: half the context length

  void validate() const {
    if (batch_size == 0 || max_steps == 0 || eval_every == 0)
      throw InvalidArgument("train config: counts must be positive");
    if (lr < 0 || weight_decay < 0 || clip_norm <= 0)
      throw InvalidArgument("train config: negative rate");
    if (dropout < 0 || dropout >= 1)
      throw InvalidArgument("train config: dropout out of range");
    if (precision != "f32" && precision != "f64")
      throw InvalidArgument("train config: precision must be f32 or f64");
  }
};

struct TrainRecord {
  std::size_t step = 0;
  double train_loss = 0;
  double valid_loss = 0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::size_t best_step = 0;
  double best_valid = std::numeric_limits<double>::infinity();
};

// A contiguous slice of an encoded dialog plus a per-position flag saying
// whether the next-token prediction at that position counts toward the
// loss. Overlapped prefixes of later windows are flagged off so no target
// is counted twice.
struct Window {
  TokenSeq seq;
  std::vector<std::uint8_t> target_on;
};

// Splits each sequence into overlapping windows of at most ctx_len tokens.
// Successive starts advance by stride, snapped back to the most recent
// turn boundary (a speaker token) when one lies in the advanced range.
inline std::vector<Window> window_dialogs(const std::vector<TokenSeq>& seqs,
                                          std::size_t ctx_len,
                                          std::size_t stride) {
  if (stride == 0 || stride > ctx_len)
    throw InvalidArgument("window_dialogs: stride must be in [1, ctx_len]");
  std::vector<Window> out;
  for (const TokenSeq& s : seqs) {
    std::size_t start = 0, covered = 0;
    while (true) {
      std::size_t end = std::min(start + ctx_len, s.size());
      Window w;
      w.seq = slice_seq(s, start, end);
      w.target_on.resize(end - start);
      for (std::size_t i = 0; i < w.target_on.size(); ++i)
        w.target_on[i] = start + i >= covered ? 1 : 0;
      out.push_back(std::move(w));
      if (end == s.size()) break;
      covered = end;
      std::size_t next = start + stride;
      for (std::size_t p = std::min(next, s.size() - 1); p > start; --p)
        if (s.word_index[p] == -1) {
          next = p;
          break;
        }
      start = next;
    }
  }
  return out;
}

// Pads in place to len with the pad token; padding never carries loss.
inline void pad_window(Window& w, std::size_t len) {
  while (w.seq.size() < len) {
    w.seq.ids.push_back(0);
    w.seq.speaker_ids.push_back(1);
    w.seq.shift_label.push_back(0);
    w.seq.eval_mask.push_back(0);
    w.seq.turn_index.push_back(w.seq.turn_index.empty()
                                   ? 0
                                   : w.seq.turn_index.back());
    w.seq.word_index.push_back(0);
    w.target_on.push_back(0);
  }
}

template <typename T>
struct WindowLoss {
  Var<T> loss_sum;   // weighted sum, not yet averaged
  double weight_sum = 0;
  Var<T> output;     // logits [T x V] or probabilities [T x 1]
};

// Loss-bearing position counts, without running the model. A window whose
// novel coverage is only the sequence-final position has none.
inline std::size_t lm_live_targets(const Window& w, bool speaker_targets) {
  std::size_t live = 0;
  for (std::size_t t = 0; t + 1 < w.seq.size(); ++t) {
    if (!w.target_on[t]) continue;
    int next = w.seq.ids[t + 1];
    if (next == VocabSpecial{}.pad_id) continue;
    if (!speaker_targets && (next == VocabSpecial{}.speaker1_id ||
                             next == VocabSpecial{}.speaker2_id))
      continue;
    ++live;
  }
  return live;
}

inline std::size_t lstm_live_targets(const Window& w) {
  std::size_t live = 0;
  for (std::size_t t = 0; t < w.seq.size(); ++t)
    if (w.target_on[t] && w.seq.eval_mask[t]) ++live;
  return live;
}

// Next-token cross entropy over one window. Targets are the following
// token ids; the final position and masked-off positions carry weight 0.
template <typename T>
WindowLoss<T> lm_window_loss(Tape<T>* tape, const TransformerLM<T>& m,
                             const Window& w, bool speaker_targets,
                             bool train_mode = false, Rng* rng = nullptr) {
  std::size_t n = w.seq.size();
  std::vector<int> targets(n, 0);
  std::vector<T> weights(n, T(0));
  double wsum = 0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (!w.target_on[t]) continue;
    int next = w.seq.ids[t + 1];
    if (next == VocabSpecial{}.pad_id) continue;
    if (!speaker_targets && (next == VocabSpecial{}.speaker1_id ||
                             next == VocabSpecial{}.speaker2_id))
      continue;
    targets[t] = next;
    weights[t] = T(1);
    wsum += 1;
  }
  WindowLoss<T> r;
  r.output = m.forward(tape, w.seq, train_mode, rng);
  r.loss_sum = ops::cross_entropy_sum(tape, r.output, targets, weights);
  r.weight_sum = wsum;
  return r;
}

// Squared error between the sigmoid outputs and the binary shift labels,
// over scoreable positions only.
template <typename T>
WindowLoss<T> lstm_window_loss(Tape<T>* tape, const LstmClassifier<T>& m,
                               const Window& w, bool train_mode = false,
                               Rng* rng = nullptr) {
  std::size_t n = w.seq.size();
  Tensor<T> target({n, 1});
  std::vector<T> weights(n, T(0));
  double wsum = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!w.target_on[t] || !w.seq.eval_mask[t]) continue;
    target.at2(t, 0) = static_cast<T>(w.seq.shift_label[t]);
    weights[t] = T(1);
    wsum += 1;
  }
  WindowLoss<T> r;
  r.output = m.forward(tape, w.seq, train_mode, rng);
  r.loss_sum = ops::mse_sum(tape, r.output, target, weights);
  r.weight_sum = wsum;
  return r;
}

namespace train_detail {

template <typename T>
std::vector<Tensor<T>> snapshot(const std::vector<ParamRef<T>>& ps) {
  std::vector<Tensor<T>> vals;
  vals.reserve(ps.size());
  for (const auto& p : ps) vals.push_back(p.var->value);
  return vals;
}

template <typename T>
void restore(const std::vector<ParamRef<T>>& ps,
             const std::vector<Tensor<T>>& vals) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].var->value = vals[i];
}

// Shared optimizer loop. batch_loss must build the averaged batch loss on
// the given tape; valid_loss must evaluate the full validation set without
// dropout. Returns with the best-validation weights restored.
template <typename T, typename BatchFn, typename ValidFn>
TrainLog run(const std::string& who, std::vector<ParamRef<T>> params,
             const TrainConfig& cfg, std::size_t n_windows, BatchFn batch_loss,
             ValidFn valid_loss) {
  cfg.validate();
  if (n_windows == 0)
    throw InvalidArgument(who + ": no training windows");
  AdamW<T> opt({cfg.lr, /*beta1=*/0.9, /*beta2=*/0.999, /*eps=*/1e-8,
                cfg.weight_decay});
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n_windows);
  for (std::size_t i = 0; i < n_windows; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  TrainLog log;
  std::vector<Tensor<T>> best = snapshot(params);
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    std::vector<std::size_t> picks;
    picks.reserve(cfg.batch_size);
    while (picks.size() < cfg.batch_size) {
      if (cursor == n_windows) {
        rng.shuffle(order);
        cursor = 0;
      }
      picks.push_back(order[cursor++]);
    }

    Tape<T> tape;
    zero_grads(params);
    Var<T> loss = batch_loss(&tape, picks, &rng);
    double train_loss = static_cast<double>(loss->value.at(0));
    if (!std::isfinite(train_loss))
      throw NumericError(who + ": non-finite loss at step " +
                         std::to_string(step));
    tape.backward(loss);
    clip_global_norm(params, static_cast<T>(cfg.clip_norm));
    opt.step(params);

    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      double vl = valid_loss();
      log.records.push_back({step, train_loss, vl});
      if (vl < log.best_valid) {
        log.best_valid = vl;
        log.best_step = step;
        best = snapshot(params);
      }
    }
  }
  restore(params, best);
  return log;
}

}  // namespace train_detail

template <typename T>
TrainLog train_lm(TransformerLM<T>& model,
                  const std::vector<TokenSeq>& train_seqs,
                  const std::vector<TokenSeq>& valid_seqs,
                  const TrainConfig& cfg) {
  model.cfg.dropout_p = cfg.dropout;
  std::size_t ctx = static_cast<std::size_t>(model.cfg.ctx_len);
  std::size_t stride = cfg.window_stride ? cfg.window_stride
                                         : std::max<std::size_t>(1, ctx / 2);
  auto train_w = window_dialogs(train_seqs, ctx, stride);
  std::erase_if(train_w, [&](const Window& w) {
    return lm_live_targets(w, cfg.speaker_targets) == 0;
  });
  auto valid_w = window_dialogs(valid_seqs, ctx, stride);
  if (valid_w.empty()) throw InvalidArgument("train_lm: empty validation set");

  auto batch = [&](Tape<T>* tape, const std::vector<std::size_t>& picks,
                   Rng* rng) {
    std::vector<Var<T>> losses;
    double wsum = 0;
    for (std::size_t i : picks) {
      auto wl = lm_window_loss(tape, model, train_w[i], cfg.speaker_targets,
                               true, rng);
      losses.push_back(wl.loss_sum);
      wsum += wl.weight_sum;
    }
    if (wsum == 0) throw StateError("train_lm: batch carries no targets");
    return ops::scale(tape, ops::add_scalars(tape, losses), T(1.0 / wsum));
  };
  auto valid = [&]() {
    double sum = 0, wsum = 0;
    for (const Window& w : valid_w) {
      auto wl = lm_window_loss<T>(nullptr, model, w, cfg.speaker_targets);
      sum += static_cast<double>(wl.loss_sum->value.at(0));
      wsum += wl.weight_sum;
    }
    if (wsum == 0) throw StateError("train_lm: validation carries no targets");
    return sum / wsum;
  };
  return train_detail::run<T>("train_lm", model.params(), cfg, train_w.size(),
                              batch, valid);
}

template <typename T>
TrainLog train_lstm(LstmClassifier<T>& model,
                    const std::vector<TokenSeq>& train_seqs,
                    const std::vector<TokenSeq>& valid_seqs,
                    const TrainConfig& cfg, std::size_t ctx_len = 256) {
  model.cfg.dropout_p = cfg.dropout;
  std::size_t stride = cfg.window_stride
                           ? cfg.window_stride
                           : std::max<std::size_t>(1, ctx_len / 2);
  auto train_w = window_dialogs(train_seqs, ctx_len, stride);
  std::erase_if(train_w,
                [](const Window& w) { return lstm_live_targets(w) == 0; });
  auto valid_w = window_dialogs(valid_seqs, ctx_len, stride);
  if (valid_w.empty())
    throw InvalidArgument("train_lstm: empty validation set");

  auto batch = [&](Tape<T>* tape, const std::vector<std::size_t>& picks,
                   Rng* rng) {
    std::vector<Var<T>> losses;
    double wsum = 0;
    for (std::size_t i : picks) {
      auto wl = lstm_window_loss(tape, model, train_w[i], true, rng);
      losses.push_back(wl.loss_sum);
      wsum += wl.weight_sum;
    }
    if (wsum == 0) throw StateError("train_lstm: batch carries no targets");
    return ops::scale(tape, ops::add_scalars(tape, losses), T(1.0 / wsum));
  };
  auto valid = [&]() {
    double sum = 0, wsum = 0;
    for (const Window& w : valid_w) {
      auto wl = lstm_window_loss<T>(nullptr, model, w);
      sum += static_cast<double>(wl.loss_sum->value.at(0));
      wsum += wl.weight_sum;
    }
    if (wsum == 0)
      throw StateError("train_lstm: validation carries no targets");
    return sum / wsum;
  };
  return train_detail::run<T>("train_lstm", model.params(), cfg,
                              train_w.size(), batch, valid);
}

}  // namespace ttlab
