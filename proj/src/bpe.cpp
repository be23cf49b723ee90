#include "bpe.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "error.hpp"
#include "rng.hpp"

namespace ttlab {

using nlohmann::json;

namespace {

constexpr int kVocabFileVersion = 1;

const char* special_token_string(int which) {
  switch (which) {
    case 0: return "<pad>";
    case 1: return "<unk>";
    case 2: return "<A>";
    default: return "<B>";
  }
}

std::vector<std::string> to_chars(const std::string& word) {
  std::vector<std::string> out;
  for (char c : word) out.emplace_back(1, c);
  return out;
}

void apply_merge(std::vector<std::string>& symbols,
                 const std::pair<std::string, std::string>& rule) {
  std::vector<std::string> next;
  std::size_t i = 0;
  while (i < symbols.size()) {
    if (i + 1 < symbols.size() && symbols[i] == rule.first &&
        symbols[i + 1] == rule.second) {
      next.push_back(rule.first + rule.second);
      i += 2;
    } else {
      next.push_back(symbols[i]);
      ++i;
    }
  }
  symbols = std::move(next);
}

}  // namespace

void Vocab::build_from(
    std::vector<std::string> alphabet,
    std::vector<std::pair<std::string, std::string>> merges) {
  alphabet_ = std::move(alphabet);
  merges_ = std::move(merges);
  tokens_.clear();
  ids_.clear();
  for (int s = 0; s < 4; ++s) tokens_.push_back(special_token_string(s));
  for (const std::string& c : alphabet_) tokens_.push_back(c);
  for (const auto& [l, r] : merges_) {
    std::string merged = l + r;
    bool seen = false;
    for (const std::string& t : tokens_) seen = seen || t == merged;
    if (!seen) tokens_.push_back(merged);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (ids_.count(tokens_[i]))
      throw StateError("vocab: duplicate token " + tokens_[i]);
    ids_[tokens_[i]] = static_cast<int>(i);
  }
}

Vocab Vocab::train(const std::vector<Dialog>& dialogs,
                   std::size_t vocab_size) {
  std::map<std::string, std::size_t> word_freq;
  for (const Dialog& d : dialogs)
    for (const Turn& t : d.turns)
      for (const std::string& w : t.words) ++word_freq[w];
  if (word_freq.empty()) throw InvalidArgument("train_bpe: empty corpus");

  std::set<char> char_set;
  for (const auto& [w, f] : word_freq)
    for (char c : w) char_set.insert(c);
  std::vector<std::string> alphabet;
  for (char c : char_set) alphabet.emplace_back(1, c);

  if (vocab_size < alphabet.size() + 4)
    throw InvalidArgument(
        "train_bpe: vocab_size " + std::to_string(vocab_size) +
        " below alphabet plus specials " +
        std::to_string(alphabet.size() + 4));

  // Current segmentation of every distinct word, refined merge by merge.
  std::vector<std::pair<std::vector<std::string>, std::size_t>> segs;
  for (const auto& [w, f] : word_freq) segs.emplace_back(to_chars(w), f);

  std::vector<std::pair<std::string, std::string>> merges;
  std::set<std::string> token_strings(alphabet.begin(), alphabet.end());
  for (int s = 0; s < 4; ++s) token_strings.insert(special_token_string(s));

  std::size_t size_now = alphabet.size() + 4;
  while (size_now < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_count;
    for (const auto& [symbols, f] : segs)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
        pair_count[{symbols[i], symbols[i + 1]}] += f;

    bool found = false;
    std::pair<std::string, std::string> best;
    std::size_t best_count = 0;
    for (const auto& [pr, cnt] : pair_count) {
      if (cnt < 2) continue;
      if (token_strings.count(pr.first + pr.second)) continue;
      std::string cat = pr.first + pr.second;
      if (!found || cnt > best_count ||
          (cnt == best_count &&
           (cat < best.first + best.second ||
            (cat == best.first + best.second && pr.first < best.first)))) {
        best = pr;
        best_count = cnt;
        found = true;
      }
    }
    if (!found) break;
    merges.push_back(best);
    token_strings.insert(best.first + best.second);
    ++size_now;
    for (auto& [symbols, f] : segs) apply_merge(symbols, best);
  }

  Vocab v;
  v.build_from(std::move(alphabet), std::move(merges));
  return v;
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InvalidArgument("vocab: id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode_word(const std::string& word) const {
  if (word.empty()) return {};
  for (char c : word)
    if (ids_.find(std::string(1, c)) == ids_.end())
      return {special_.unk_id};
  std::vector<std::string> symbols = to_chars(word);
  for (const auto& rule : merges_) apply_merge(symbols, rule);
  std::vector<int> out;
  out.reserve(symbols.size());
  for (const std::string& s : symbols) {
    auto it = ids_.find(s);
    out.push_back(it == ids_.end() ? special_.unk_id : it->second);
  }
  return out;
}

std::string Vocab::canonical_json() const {
  json j;
  j["version"] = kVocabFileVersion;
  j["alphabet"] = alphabet_;
  json jm = json::array();
  for (const auto& [l, r] : merges_) jm.push_back(json::array({l, r}));
  j["merges"] = std::move(jm);
  j["specials"] = {{"pad_id", special_.pad_id},
                   {"unk_id", special_.unk_id},
                   {"speaker1_id", special_.speaker1_id},
                   {"speaker2_id", special_.speaker2_id}};
  return j.dump(2);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << canonical_json() << '\n';
  if (!out) throw IoError("write failed for " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("version").get<int>() != kVocabFileVersion)
      throw ParseError(path + ": unsupported vocab version " +
                       j.at("version").dump());
    std::vector<std::string> alphabet =
        j.at("alphabet").get<std::vector<std::string>>();
    std::vector<std::pair<std::string, std::string>> merges;
    for (const json& m : j.at("merges"))
      merges.emplace_back(m.at(0).get<std::string>(),
                          m.at(1).get<std::string>());
    const json& sp = j.at("specials");
    VocabSpecial special{sp.at("pad_id").get<int>(),
                         sp.at("unk_id").get<int>(),
                         sp.at("speaker1_id").get<int>(),
                         sp.at("speaker2_id").get<int>()};
    std::set<int> distinct{special.pad_id, special.unk_id,
                           special.speaker1_id, special.speaker2_id};
    if (distinct.size() != 4)
      throw ParseError(path + ": special ids not distinct");
    Vocab v;
    v.special_ = special;
    v.build_from(std::move(alphabet), std::move(merges));
    return v;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint64_t Vocab::fingerprint() const { return fnv1a64(canonical_json()); }

TokenSeq encode_dialog(const Dialog& dialog, const Vocab& vocab) {
  if (dialog.turns.empty())
    throw InvalidArgument("encode_dialog: empty dialog " + dialog.id);
  validate_dialog(dialog);
  TokenSeq seq;
  const VocabSpecial& sp = vocab.special();
  for (std::size_t ti = 0; ti < dialog.turns.size(); ++ti) {
    int speaker_id = ti % 2 == 0 ? 1 : 2;
    int speaker_tok = ti % 2 == 0 ? sp.speaker1_id : sp.speaker2_id;
    seq.ids.push_back(speaker_tok);
    seq.speaker_ids.push_back(speaker_id);
    seq.turn_index.push_back(static_cast<int>(ti));
    seq.word_index.push_back(-1);
    const Turn& turn = dialog.turns[ti];
    for (std::size_t wi = 0; wi < turn.words.size(); ++wi) {
      for (int id : vocab.encode_word(turn.words[wi])) {
        seq.ids.push_back(id);
        seq.speaker_ids.push_back(speaker_id);
        seq.turn_index.push_back(static_cast<int>(ti));
        seq.word_index.push_back(static_cast<int>(wi));
      }
    }
  }
  const std::size_t n = seq.ids.size();
  seq.shift_label.resize(n);
  seq.eval_mask.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    seq.shift_label[t] =
        t + 1 < n && vocab.is_speaker(seq.ids[t + 1]) ? 1 : 0;
    bool speaker_pos = vocab.is_speaker(seq.ids[t]) && seq.word_index[t] < 0;
    seq.eval_mask[t] = !speaker_pos && t + 1 < n ? 1 : 0;
  }
  return seq;
}

std::string decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    out += vocab.token_of(id);
  }
  return out;
}

}  // namespace ttlab
