#pragma once

// Dialog ingestion: text normalization, the spoken-transcript segmentation
// pipeline (backchannel removal, IPU merging, embedded-IPU dropping, turn
// building), JSON-lines I/O, and deterministic corpus splits.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace ttlab {

enum class Speaker : int { A = 0, B = 1 };

inline Speaker other(Speaker s) {
  return s == Speaker::A ? Speaker::B : Speaker::A;
}
inline const char* speaker_label(Speaker s) {
  return s == Speaker::A ? "A" : "B";
}

struct RawUtterance {
  Speaker speaker = Speaker::A;
  double start_s = 0;
  double end_s = 0;
  std::string text;
};

struct Turn {
  Speaker speaker = Speaker::A;
  std::vector<std::string> words;
  std::vector<std::string> pos;  // empty, or aligned 1:1 with words
  double start_s = -1;           // negative when untimed
  double end_s = -1;

  bool has_times() const { return start_s >= 0; }
  bool has_pos() const { return !pos.empty(); }
};

struct Dialog {
  std::string id;
  std::vector<Turn> turns;
};

struct SegmentationConfig {
  std::set<std::string> backchannel_lexicon = {"mm",    "mhm",  "uh-huh",
                                               "yeah",  "right", "okay",
                                               "oh"};
  double isolation_gap_s = 1.0;
  double ipu_gap_s = 0.5;
};

struct CorpusSplit {
  std::vector<Dialog> train, valid, test;
  std::uint64_t seed = 0;
};

enum class IngestFormat { turns, timed };

// Lower-cases, deletes every , . : ; ! ? and splits on whitespace.
std::vector<std::string> normalize_text(const std::string& text);

// Drops utterances whose whole normalized text is a backchannel and whose
// nearest same-speaker neighbors are more than isolation_gap_s away on both
// sides. Decisions are made against the input list, not incrementally.
std::vector<RawUtterance> remove_backchannels(
    const std::vector<RawUtterance>& utts, const SegmentationConfig& cfg);

// Merges same-speaker utterances transitively whenever the silence between
// them is shorter than ipu_gap_s. Output sorted by (start, speaker).
std::vector<RawUtterance> merge_ipus(const std::vector<RawUtterance>& utts,
                                     const SegmentationConfig& cfg);

// Removes IPUs lying entirely inside an IPU of the other speaker.
std::vector<RawUtterance> drop_embedded_ipus(
    const std::vector<RawUtterance>& ipus);

// Orders IPUs by start time and merges maximal same-speaker runs into
// alternating turns with normalized words.
Dialog build_turns(const std::vector<RawUtterance>& ipus,
                   const std::string& id);

std::vector<Dialog> ingest(const std::string& path, IngestFormat format,
                           const SegmentationConfig& cfg = {});

// Writes dialogs in the `turns` JSON-lines schema (one dialog per line).
void write_dialogs(const std::string& path,
                   const std::vector<Dialog>& dialogs);

// Deterministic shuffle + largest-remainder split by dialog.
CorpusSplit split_corpus(const std::vector<Dialog>& dialogs,
                         double train_ratio, double valid_ratio,
                         double test_ratio, std::uint64_t seed);

// Throws unless turns alternate speakers and every turn has words.
void validate_dialog(const Dialog& d);

}  // namespace ttlab
