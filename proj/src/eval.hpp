#pragma once

// Turn-shift evaluation: per-position shift probabilities from any of the
// three model families, threshold-swept balanced accuracy, and the
// context-ablation harness that rescores turns from truncated histories.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bpe.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "lstm.hpp"
#include "pos_bigram.hpp"
#include "transformer.hpp"

namespace ttlab {

// Shift probabilities with their labels, plus where each entry came from.
struct TrpSeries {
  std::vector<double> probs;
  std::vector<char> labels;
  std::vector<std::string> dialog_ids;
  std::vector<std::size_t> positions;

  void push(double prob, bool label, const std::string& dialog_id,
            std::size_t pos);
  std::size_t size() const { return probs.size(); }
};

struct EvalReport {
  double bacc = 0, tpr = 0, tnr = 0;
  double threshold = 0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

enum class TuneOn { kTest, kValid };

// Per position t: softmax over the vocabulary, then the larger of the two
// speaker-token probabilities.
std::vector<double> trp_probs(const Tensor<double>& logits, const Vocab& vocab);

// bAcc = (TPR + TNR) / 2. Throws when labels are single-class.
EvalReport balanced_accuracy(const std::vector<char>& preds,
                             const std::vector<char>& labels);

EvalReport apply_threshold(const TrpSeries& series, double threshold);

// Evaluates every grid threshold (positive means prob > threshold) and
// returns the best; ties go to the lowest threshold.
EvalReport sweep_threshold(const TrpSeries& series,
                           const std::vector<double>& grid);

std::vector<double> default_grid();  // 0.01 .. 0.99 in steps of 0.01

// Uniform view over the three model families. shift_probs returns one
// probability per token position of seq; positions that cannot host a
// shift decision simply carry 0. turn_lo is the dialog turn the sequence
// starts at; slice_start marks ablation slices, whose first word has no
// same-dialog predecessor.
class ShiftPredictor {
 public:
  virtual ~ShiftPredictor() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> shift_probs(const TokenSeq& seq,
                                          const Dialog& dialog,
                                          std::size_t turn_lo,
                                          bool slice_start) const = 0;
};

template <typename T>
class LmPredictor final : public ShiftPredictor {
 public:
  LmPredictor(const TransformerLM<T>& model, const Vocab& vocab)
      : model_(model), vocab_(vocab) {}
  std::string name() const override { return "lm"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog&,
                                  std::size_t, bool) const override {
    Var<T> logits = model_.forward(nullptr, seq);
    Tensor<double> as_double({logits->value.rows(), logits->value.cols()});
    for (std::size_t i = 0; i < logits->value.size(); ++i)
      as_double.at(i) = static_cast<double>(logits->value.at(i));
    return trp_probs(as_double, vocab_);
  }

 private:
  const TransformerLM<T>& model_;
  const Vocab& vocab_;
};

template <typename T>
class LstmPredictor final : public ShiftPredictor {
 public:
  explicit LstmPredictor(const LstmClassifier<T>& model) : model_(model) {}
  std::string name() const override { return "lstm"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog&,
                                  std::size_t, bool) const override {
    Var<T> p = model_.forward(nullptr, seq);
    std::vector<double> out(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
      out[t] = static_cast<double>(p->value.at2(t, 0));
    return out;
  }

 private:
  const LstmClassifier<T>& model_;
};

// Word-level probabilities land on the final subtoken of each word; other
// positions get 0 (a shift cannot be called mid-word or at a speaker
// token). Whole dialogs reset the bigram context at every turn start;
// slices reset only at the slice start and carry tags across the internal
// turn boundaries.
class PosPredictor final : public ShiftPredictor {
 public:
  explicit PosPredictor(const PosBigram& table) : table_(table) {}
  std::string name() const override { return "pos"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog& dialog,
                                  std::size_t turn_lo,
                                  bool slice_start) const override;

 private:
  const PosBigram& table_;
};

// Probabilities and labels for every scoreable position of every dialog.
TrpSeries collect_series(const ShiftPredictor& pred,
                         const std::vector<Dialog>& dialogs,
                         const Vocab& vocab);

// Sweeps the threshold on the tuning set and reports on the test set.
// TuneOn::kTest tunes on the test series itself; TuneOn::kValid tunes on
// the validation dialogs and carries that threshold over.
EvalReport evaluate_model(const ShiftPredictor& pred,
                          const std::vector<Dialog>& test_dialogs,
                          const std::vector<Dialog>& valid_dialogs,
                          const Vocab& vocab, const std::vector<double>& grid,
                          TuneOn tune_on);

// Rescores each turn with at least four preceding turns from a slice of
// its k immediately preceding turns plus the turn itself, re-encoded with
// positions restarting at zero and speaker tokens kept. The threshold is
// re-swept for each k.
EvalReport ablate_context(const ShiftPredictor& pred,
                          const std::vector<Dialog>& dialogs,
                          const Vocab& vocab, const std::vector<double>& grid,
                          std::size_t k);

}  // namespace ttlab
