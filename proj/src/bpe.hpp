#pragma once

// Byte-pair-encoding vocabulary and dialog serialization. Merges never
// cross word boundaries, so token positions stay word-aligned. Four special
// ids are reserved ahead of the alphabet; the two speaker tokens mark turn
// starts in encoded dialogs.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "corpus.hpp"

namespace ttlab {

struct VocabSpecial {
  int pad_id = 0;
  int unk_id = 1;
  int speaker1_id = 2;
  int speaker2_id = 3;
};

class Vocab {
 public:
  // Greedy deterministic training: highest pair count first, ties by the
  // lexicographically smallest concatenated string, then the smaller left
  // part. Stops at the size cap or when no pair occurs twice.
  static Vocab train(const std::vector<Dialog>& dialogs,
                     std::size_t vocab_size);

  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int id_of(const std::string& token) const;  // -1 when absent
  const std::string& token_of(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  const VocabSpecial& special() const { return special_; }
  bool is_speaker(int id) const {
    return id == special_.speaker1_id || id == special_.speaker2_id;
  }

  // Word to subtoken ids; a word with any character outside the alphabet
  // encodes as a single unk.
  std::vector<int> encode_word(const std::string& word) const;

  // Digest over the canonical serialization; ties checkpoints to the vocab
  // they were trained with.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> alphabet_;
  VocabSpecial special_;

  void build_from(std::vector<std::string> alphabet,
                  std::vector<std::pair<std::string, std::string>> merges);
  std::string canonical_json() const;
};

struct TokenSeq {
  std::vector<int> ids;
  std::vector<int> speaker_ids;   // 1 or 2; the turn each token belongs to
  std::vector<char> shift_label;  // next token is a speaker token
  std::vector<char> eval_mask;    // position is scored for TRP
  std::vector<int> turn_index;    // dialog turn owning the token
  std::vector<int> word_index;    // word within the turn; -1 at speaker tokens

  std::size_t size() const { return ids.size(); }
};

// Contiguous [lo, hi) slice; every per-position field is copied verbatim,
// so positions implicitly restart at zero while speaker and turn identity
// stay absolute.
inline TokenSeq slice_seq(const TokenSeq& s, std::size_t lo, std::size_t hi) {
  TokenSeq out;
  out.ids.assign(s.ids.begin() + lo, s.ids.begin() + hi);
  out.speaker_ids.assign(s.speaker_ids.begin() + lo, s.speaker_ids.begin() + hi);
  out.shift_label.assign(s.shift_label.begin() + lo, s.shift_label.begin() + hi);
  out.eval_mask.assign(s.eval_mask.begin() + lo, s.eval_mask.begin() + hi);
  out.turn_index.assign(s.turn_index.begin() + lo, s.turn_index.begin() + hi);
  out.word_index.assign(s.word_index.begin() + lo, s.word_index.begin() + hi);
  return out;
}

// [sp1] turn1-words [sp2] turn2-words ... with sp alternating from
// speaker1. shift_label marks positions directly before a speaker token;
// eval_mask clears speaker positions and the dialog-final position.
TokenSeq encode_dialog(const Dialog& dialog, const Vocab& vocab);

// Space-joined token strings; specials render as <A>, <B>, <unk>, <pad>.
std::string decode(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace ttlab
