#pragma once

// Synthetic dialog generator. Dialogs are built from templated exchange
// units; slot tokens like <TIME> draw from word classes. Three kinds of
// turn boundary are deliberately undecidable from the turn text alone:
// bare one-word answers that are complete only after a matching question,
// response turns whose first word continues or not depending on the
// preceding turn's type, and recall responses decided by a key/state
// binding registered many turns earlier. The same surface words also open
// longer statement turns, so the turn-initial word never settles whether
// the turn continues, and the part-of-speech pairs at these boundaries are
// shared with mid-turn positions.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace ttlab {

struct SynthUnit {
  std::string name;
  // One template per turn; tokens of the form <NAME> are class slots.
  std::vector<std::vector<std::string>> turns;
};

// Generated long-range exchange: several keys are registered each with a
// state, a filler turn re-mentions keys as ordinary nouns, then probes ask
// about registered keys in arbitrary order. Each response opens with the
// same word and either stops there or continues, decided solely by the
// state bound to the probed key. Frames are turn templates whose key/value
// slots the generator fills coherently instead of independently.
struct RecallSpec {
  bool enabled = false;
  std::string key_class;  // noun class the keys are drawn from
  std::string val_class;  // exactly two states; first one ends the response
  int n_bindings = 4;     // distinct keys registered per exchange
  int n_probes = 3;       // distinct registered keys asked back
  std::vector<std::string> reg;          // registration turn, key + value slot
  std::vector<std::string> filler;       // interference turn, key slot only
  std::vector<std::string> probe_first;  // first probe turn, key slot
  std::vector<std::string> probe_next;   // later probe turns, key slot
  std::vector<std::string> resp_end;     // response for the first state
  std::vector<std::string> resp_more;    // response for the second state
};

struct Grammar {
  std::map<std::string, std::vector<std::string>> classes;
  std::map<std::string, std::string> class_tags;  // class name -> POS tag
  std::map<std::string, std::string> word_tags;   // literal word -> POS tag
  std::vector<SynthUnit> openings;
  std::vector<SynthUnit> closings;
  std::vector<SynthUnit> body;
  std::vector<double> body_weights;
  // Units whose turn boundaries need the previous turn to call; one is
  // forced into every dialog's middle section.
  std::vector<std::string> forced;
  RecallSpec recall;
  int min_units = 3;
  int max_units = 5;

  static Grammar builtin();
  static Grammar from_json_file(const std::string& path);
  void validate() const;
};

std::vector<Dialog> synth_corpus(const Grammar& grammar, std::size_t n,
                                 std::uint64_t seed);

}  // namespace ttlab
