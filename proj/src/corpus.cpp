#include "corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "error.hpp"
#include "rng.hpp"

namespace ttlab {

using nlohmann::json;

namespace {

constexpr const char* kPunctuation = ",.:;!?";

bool sorted_by_start(const std::vector<RawUtterance>& utts) {
  for (std::size_t i = 1; i < utts.size(); ++i)
    if (utts[i].start_s < utts[i - 1].start_s) return false;
  return true;
}

void require_sorted(const std::vector<RawUtterance>& utts, const char* op) {
  if (!sorted_by_start(utts))
    throw InvalidArgument(std::string(op) +
                          ": utterances not sorted by start time");
}

std::string normalized_joined(const std::string& text) {
  std::string out;
  for (const std::string& w : normalize_text(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Speaker parse_speaker(const json& v, std::size_t line_no) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "A") return Speaker::A;
    if (s == "B") return Speaker::B;
  }
  throw ParseError("line " + std::to_string(line_no) +
                   ": unknown speaker label " + v.dump());
}

}  // namespace

std::vector<std::string> normalize_text(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::strchr(kPunctuation, c) != nullptr) {
      continue;
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return words;
}

std::vector<RawUtterance> remove_backchannels(
    const std::vector<RawUtterance>& utts, const SegmentationConfig& cfg) {
  require_sorted(utts, "remove_backchannels");
  std::vector<RawUtterance> out;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const RawUtterance& u = utts[i];
    if (cfg.backchannel_lexicon.count(normalized_joined(u.text)) == 0) {
      out.push_back(u);
      continue;
    }
    // Nearest same-speaker neighbors in the input, either direction.
    double prev_gap = std::numeric_limits<double>::infinity();
    double next_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = i; j-- > 0;)
      if (utts[j].speaker == u.speaker) {
        prev_gap = u.start_s - utts[j].end_s;
        break;
      }
    for (std::size_t j = i + 1; j < utts.size(); ++j)
      if (utts[j].speaker == u.speaker) {
        next_gap = utts[j].start_s - u.end_s;
        break;
      }
    bool isolated = prev_gap > cfg.isolation_gap_s &&
                    next_gap > cfg.isolation_gap_s;
    if (!isolated) out.push_back(u);
  }
  return out;
}

std::vector<RawUtterance> merge_ipus(const std::vector<RawUtterance>& utts,
                                     const SegmentationConfig& cfg) {
  require_sorted(utts, "merge_ipus");
  std::vector<RawUtterance> merged;
  for (Speaker sp : {Speaker::A, Speaker::B}) {
    RawUtterance cur;
    bool open = false;
    for (const RawUtterance& u : utts) {
      if (u.speaker != sp) continue;
      if (!open) {
        cur = u;
        open = true;
      } else if (u.start_s - cur.end_s < cfg.ipu_gap_s) {
        cur.text += ' ' + u.text;
        cur.start_s = std::min(cur.start_s, u.start_s);
        cur.end_s = std::max(cur.end_s, u.end_s);
      } else {
        merged.push_back(cur);
        cur = u;
      }
    }
    if (open) merged.push_back(cur);
  }
  std::sort(merged.begin(), merged.end(),
            [](const RawUtterance& a, const RawUtterance& b) {
              if (a.start_s != b.start_s) return a.start_s < b.start_s;
              return static_cast<int>(a.speaker) < static_cast<int>(b.speaker);
            });
  return merged;
}

std::vector<RawUtterance> drop_embedded_ipus(
    const std::vector<RawUtterance>& ipus) {
  std::vector<RawUtterance> out;
  for (const RawUtterance& u : ipus) {
    bool embedded = false;
    for (const RawUtterance& v : ipus) {
      if (v.speaker == u.speaker) continue;
      if (u.start_s >= v.start_s && u.end_s <= v.end_s) {
        embedded = true;
        break;
      }
    }
    if (!embedded) out.push_back(u);
  }
  return out;
}

Dialog build_turns(const std::vector<RawUtterance>& ipus,
                   const std::string& id) {
  if (ipus.empty()) throw InvalidArgument("build_turns: empty dialog " + id);
  std::vector<RawUtterance> ordered = ipus;
  std::sort(ordered.begin(), ordered.end(),
            [](const RawUtterance& a, const RawUtterance& b) {
              if (a.start_s != b.start_s) return a.start_s < b.start_s;
              return static_cast<int>(a.speaker) < static_cast<int>(b.speaker);
            });
  Dialog d;
  d.id = id;
  for (const RawUtterance& u : ordered) {
    std::vector<std::string> words = normalize_text(u.text);
    if (words.empty()) continue;
    if (!d.turns.empty() && d.turns.back().speaker == u.speaker) {
      Turn& t = d.turns.back();
      t.words.insert(t.words.end(), words.begin(), words.end());
      t.start_s = std::min(t.start_s, u.start_s);
      t.end_s = std::max(t.end_s, u.end_s);
    } else {
      Turn t;
      t.speaker = u.speaker;
      t.words = std::move(words);
      t.start_s = u.start_s;
      t.end_s = u.end_s;
      d.turns.push_back(std::move(t));
    }
  }
  if (d.turns.empty())
    throw InvalidArgument("build_turns: empty dialog " + id);
  return d;
}

void validate_dialog(const Dialog& d) {
  if (d.turns.empty())
    throw InvalidArgument("dialog " + d.id + " has no turns");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const Turn& t = d.turns[i];
    if (t.words.empty())
      throw InvalidArgument("dialog " + d.id + ": empty turn " +
                            std::to_string(i));
    if (t.has_pos() && t.pos.size() != t.words.size())
      throw InvalidArgument("dialog " + d.id + ": pos tags misaligned at turn " +
                            std::to_string(i));
    if (i > 0 && t.speaker == d.turns[i - 1].speaker)
      throw InvalidArgument("dialog " + d.id +
                            ": consecutive turns share a speaker at " +
                            std::to_string(i));
  }
}

namespace {

Dialog parse_turns_record(const json& rec, std::size_t line_no) {
  Dialog d;
  if (!rec.contains("id") || !rec["id"].is_string())
    throw ParseError("line " + std::to_string(line_no) + ": missing id");
  d.id = rec["id"].get<std::string>();
  if (!rec.contains("turns") || !rec["turns"].is_array())
    throw ParseError("line " + std::to_string(line_no) + ": missing turns");
  for (const json& jt : rec["turns"]) {
    Speaker sp = parse_speaker(jt.at("speaker"), line_no);
    if (!jt.contains("text") || !jt["text"].is_string())
      throw ParseError("line " + std::to_string(line_no) +
                       ": turn missing text");
    std::vector<std::string> words =
        normalize_text(jt["text"].get<std::string>());
    std::vector<std::string> pos;
    if (jt.contains("pos")) {
      if (!jt["pos"].is_array())
        throw ParseError("line " + std::to_string(line_no) +
                         ": pos is not an array");
      for (const json& p : jt["pos"]) pos.push_back(p.get<std::string>());
      if (pos.size() != words.size())
        throw ParseError("line " + std::to_string(line_no) + ": pos count " +
                         std::to_string(pos.size()) + " != word count " +
                         std::to_string(words.size()));
    }
    if (words.empty()) continue;
    if (!d.turns.empty() && d.turns.back().speaker == sp) {
      Turn& prev = d.turns.back();
      if (prev.has_pos() != !pos.empty())
        throw ParseError("line " + std::to_string(line_no) +
                         ": pos present on only part of a merged turn");
      prev.words.insert(prev.words.end(), words.begin(), words.end());
      prev.pos.insert(prev.pos.end(), pos.begin(), pos.end());
    } else {
      Turn t;
      t.speaker = sp;
      t.words = std::move(words);
      t.pos = std::move(pos);
      d.turns.push_back(std::move(t));
    }
  }
  if (d.turns.empty())
    throw ParseError("line " + std::to_string(line_no) +
                     ": dialog has no non-empty turns");
  return d;
}

Dialog parse_timed_record(const json& rec, std::size_t line_no,
                          const SegmentationConfig& cfg) {
  if (!rec.contains("id") || !rec["id"].is_string())
    throw ParseError("line " + std::to_string(line_no) + ": missing id");
  std::string id = rec["id"].get<std::string>();
  if (!rec.contains("utterances") || !rec["utterances"].is_array())
    throw ParseError("line " + std::to_string(line_no) +
                     ": missing utterances");
  std::vector<RawUtterance> utts;
  for (const json& ju : rec["utterances"]) {
    RawUtterance u;
    u.speaker = parse_speaker(ju.at("speaker"), line_no);
    try {
      u.start_s = ju.at("start").get<double>();
      u.end_s = ju.at("end").get<double>();
      u.text = ju.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!(u.end_s > u.start_s))
      throw ParseError("line " + std::to_string(line_no) +
                       ": utterance end must exceed start");
    if (normalize_text(u.text).empty())
      throw ParseError("line " + std::to_string(line_no) +
                       ": utterance text empty after normalization");
    utts.push_back(std::move(u));
  }
  std::sort(utts.begin(), utts.end(),
            [](const RawUtterance& a, const RawUtterance& b) {
              if (a.start_s != b.start_s) return a.start_s < b.start_s;
              return static_cast<int>(a.speaker) < static_cast<int>(b.speaker);
            });
  std::vector<RawUtterance> kept = remove_backchannels(utts, cfg);
  std::vector<RawUtterance> ipus = merge_ipus(kept, cfg);
  ipus = drop_embedded_ipus(ipus);
  return build_turns(ipus, id);
}

}  // namespace

std::vector<Dialog> ingest(const std::string& path, IngestFormat format,
                           const SegmentationConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Dialog> dialogs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    try {
      Dialog d = format == IngestFormat::turns
                     ? parse_turns_record(rec, line_no)
                     : parse_timed_record(rec, line_no, cfg);
      validate_dialog(d);
      dialogs.push_back(std::move(d));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  return dialogs;
}

void write_dialogs(const std::string& path,
                   const std::vector<Dialog>& dialogs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const Dialog& d : dialogs) {
    json jturns = json::array();
    for (const Turn& t : d.turns) {
      std::string text;
      for (const std::string& w : t.words) {
        if (!text.empty()) text += ' ';
        text += w;
      }
      json jt = {{"speaker", speaker_label(t.speaker)}, {"text", text}};
      if (t.has_pos()) jt["pos"] = t.pos;
      jturns.push_back(std::move(jt));
    }
    out << json{{"id", d.id}, {"turns", jturns}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

CorpusSplit split_corpus(const std::vector<Dialog>& dialogs,
                         double train_ratio, double valid_ratio,
                         double test_ratio, std::uint64_t seed) {
  double sum = train_ratio + valid_ratio + test_ratio;
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvalidArgument("split: ratios must sum to 1");
  if (dialogs.size() < 3)
    throw InvalidArgument("split: need at least 3 dialogs, have " +
                          std::to_string(dialogs.size()));
  const std::size_t n = dialogs.size();
  double quota[3] = {n * train_ratio, n * valid_ratio, n * test_ratio};
  std::size_t count[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = static_cast<std::size_t>(std::floor(quota[i]));
    frac[i] = quota[i] - std::floor(quota[i]);
    assigned += count[i];
  }
  // Largest remainder; ties favor the earlier bucket (train, valid, test).
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++count[best];
    frac[best] = -1;
    ++assigned;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  CorpusSplit out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const Dialog& d = dialogs[order[i]];
    if (i < count[0])
      out.train.push_back(d);
    else if (i < count[0] + count[1])
      out.valid.push_back(d);
    else
      out.test.push_back(d);
  }
  return out;
}

}  // namespace ttlab
