#pragma once

// Part-of-speech bigram turn-shift table. For each (previous tag, current
// tag) pair it tracks how often the current word ended a turn; prediction
// is the smoothed shift rate, falling back to the global prior for unseen
// pairs. Turn-initial words pair with a distinguished BOS tag.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"

namespace ttlab {

inline constexpr const char* kBosTag = "<BOS>";

class PosBigram {
 public:
  struct Cell {
    std::int64_t n_total = 0;
    std::int64_t n_shift = 0;
  };

  // Counts word positions over tagged dialogs. The dialog-final word is
  // excluded: it has no observable continuation. A word counts as a shift
  // when it closes a non-final turn.
  static PosBigram fit(const std::vector<Dialog>& dialogs, double alpha);

  // (n_shift + alpha) / (n_total + 2 alpha); unseen pair -> prior.
  double predict_pair(const std::string& prev_tag,
                      const std::string& cur_tag) const;

  // Per-word shift probabilities for one turn's tag sequence; position 0
  // pairs with BOS.
  std::vector<double> predict_turn(const std::vector<std::string>& tags) const;

  // Shift probabilities over consecutive turns: BOS restarts at every turn.
  std::vector<double> predict_dialog(
      const std::vector<std::vector<std::string>>& turn_tags) const;

  // Shift probabilities over a turn slice treated as one running sequence:
  // BOS applies only at the very first word, and across internal turn
  // boundaries the previous turn's final tag carries over. Used by the
  // context-ablation harness, where adding a second context turn must not
  // change predictions inside the scored turn.
  std::vector<double> predict_sequence(
      const std::vector<std::vector<std::string>>& turn_tags) const;

  double alpha() const { return alpha_; }
  double prior() const { return prior_; }
  std::int64_t total_words() const { return total_words_; }
  std::int64_t total_shifts() const { return total_shifts_; }
  const std::map<std::pair<std::string, std::string>, Cell>& cells() const {
    return cells_;
  }

  void save(const std::string& path) const;
  static PosBigram load(const std::string& path);

 private:
  std::map<std::pair<std::string, std::string>, Cell> cells_;
  double alpha_ = 1.0;
  double prior_ = 0.0;
  std::int64_t total_words_ = 0;
  std::int64_t total_shifts_ = 0;
};

}  // namespace ttlab
