#include "synth.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace ttlab {

using nlohmann::json;

Grammar Grammar::builtin() {
  Grammar g;
  g.classes = {
      {"TIME", {"tonight", "tomorrow", "monday", "friday", "noon", "sunday"}},
      {"PLACE", {"downtown", "paris", "berlin", "home", "upstairs", "outside"}},
      {"FOOD", {"pasta", "soup", "bread", "fish", "rice", "salad"}},
      {"ITEM", {"ledger", "invoice", "receipt", "hedge", "seedling", "budget",
                "garden"}},
      {"STATE", {"ready", "stuck"}},
  };
  g.class_tags = {{"TIME", "RB"},
                  {"PLACE", "NN"},
                  {"FOOD", "NN"},
                  {"ITEM", "NN"},
                  {"STATE", "JJ"}};
  g.word_tags = {
      {"hello", "UH"},   {"there", "RB"},  {"hi", "UH"},    {"good", "JJ"},
      {"morning", "NN"}, {"goodbye", "UH"}, {"see", "VB"},  {"you", "PRP"},
      {"then", "RB"},    {"bye", "UH"},    {"now", "RB"},   {"when", "WRB"},
      {"do", "VBP"},     {"we", "PRP"},    {"eat", "VBP"},  {"should", "MD"},
      {"meet", "VB"},    {"where", "WRB"}, {"i", "PRP"},    {"will", "MD"},
      {"cook", "VB"},    {"sounds", "VBZ"}, {"fine", "JJ"}, {"the", "DT"},
      {"is", "VBZ"},     {"think", "VBP"}, {"sure", "UH"},  {"want", "VBP"},
      {"try", "VB"},     {"can", "MD"},    {"wait", "VB"},  {"what", "WP"},
      {"about", "IN"},   {"and", "CC"},    {"well", "UH"},  {"it", "PRP"},
      {"must", "MD"},    {"here", "RB"},   {"check", "VB"}, {"later", "RB"},
  };
  g.openings = {
      {"greet_hello", {{"hello", "there"}, {"hi"}}},
      {"greet_morning", {{"good", "morning"}, {"hello"}}},
      {"greet_hi", {{"hi", "there"}, {"good", "morning"}}},
  };
  g.closings = {
      {"farewell_goodbye", {{"goodbye"}, {"see", "you", "then"}}},
      {"farewell_bye", {{"bye", "now"}, {"goodbye"}}},
  };
  // The qa units make a bare class word a complete turn only after a
  // matching question one to three turns back, while the statement units
  // open turns with the same words, so a turn-initial answer word is a
  // coin flip without the previous turn. The k1 pair shares the response
  // word "sure"; whether it ends the turn is decided by which question
  // preceded it. statement_linger exists to reuse the registration frame
  // "<ITEM> is <STATE>" and the probe endings mid-turn, which keeps the
  // part-of-speech pairs at those boundaries uninformative.
  g.body = {
      {"qa_time_eat", {{"when", "do", "we", "eat"}, {"<TIME>"}}},
      {"qa_time_meet", {{"when", "should", "we", "meet"}, {"<TIME>"}}},
      {"qa_place_eat", {{"where", "do", "we", "eat"}, {"<PLACE>"}}},
      {"qa_place_meet", {{"where", "should", "we", "meet"}, {"<PLACE>"}}},
      {"qa_time_distant",
       {{"when", "should", "we", "meet"},
        {"i", "will", "cook", "<FOOD>"},
        {"sounds", "fine"},
        {"<TIME>"}}},
      {"qa_place_distant",
       {{"where", "should", "we", "meet"},
        {"i", "will", "cook", "<FOOD>"},
        {"sounds", "fine"},
        {"<PLACE>"}}},
      {"statement_time", {{"<TIME>", "we", "eat", "<FOOD>"}}},
      {"statement_place", {{"<PLACE>", "we", "will", "meet"}}},
      {"statement_food", {{"i", "will", "cook", "<FOOD>"}}},
      {"statement_linger",
       {{"the", "<FOOD>", "is", "<STATE>", "now", "i", "think"}}},
      {"filler_check", {{"we", "can", "check", "the", "<ITEM>", "later"}}},
      {"k1_offer", {{"do", "you", "want", "the", "<FOOD>"}, {"sure"}}},
      {"k1_tease",
       {{"you", "should", "try", "the", "<FOOD>"},
        {"sure", "i", "can", "wait"}}},
  };
  g.body_weights = {1.25, 1.25, 1.25, 1.25, 1.0, 1.0,
                    1.5,  1.5,  1.0,  2.0,  1.5, 2.0, 2.0};
  g.forced = {"k1_offer", "k1_tease"};
  g.recall.enabled = true;
  g.recall.key_class = "ITEM";
  g.recall.val_class = "STATE";
  g.recall.n_bindings = 4;
  g.recall.n_probes = 3;
  g.recall.reg = {"the", "<ITEM>", "is", "<STATE>"};
  g.recall.filler = {"we", "can", "check", "the", "<ITEM>", "later"};
  g.recall.probe_first = {"what", "about", "the", "<ITEM>"};
  g.recall.probe_next = {"and", "the", "<ITEM>"};
  g.recall.resp_end = {"well"};
  g.recall.resp_more = {"well", "it", "must", "wait", "here"};
  g.min_units = 4;
  g.max_units = 6;
  return g;
}

namespace {

SynthUnit unit_from_json(const std::string& name, const json& jturns) {
  SynthUnit u;
  u.name = name;
  for (const json& jt : jturns) {
    std::vector<std::string> words;
    for (const json& w : jt) words.push_back(w.get<std::string>());
    u.turns.push_back(std::move(words));
  }
  return u;
}

std::vector<SynthUnit> units_from_json(const json& obj) {
  std::vector<SynthUnit> out;
  for (auto it = obj.begin(); it != obj.end(); ++it)
    out.push_back(unit_from_json(it.key(), it.value()));
  return out;
}

bool is_slot(const std::string& tok) {
  return tok.size() > 2 && tok.front() == '<' && tok.back() == '>';
}

std::string slot_class(const std::string& tok) {
  return tok.substr(1, tok.size() - 2);
}

}  // namespace

Grammar Grammar::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  Grammar g;
  try {
    for (auto it = j.at("classes").begin(); it != j.at("classes").end(); ++it)
      g.classes[it.key()] = it.value().get<std::vector<std::string>>();
    g.class_tags =
        j.at("class_tags").get<std::map<std::string, std::string>>();
    g.word_tags = j.at("word_tags").get<std::map<std::string, std::string>>();
    g.openings = units_from_json(j.at("openings"));
    g.closings = units_from_json(j.at("closings"));
    g.body = units_from_json(j.at("body"));
    g.body_weights = j.at("body_weights").get<std::vector<double>>();
    g.forced = j.at("forced").get<std::vector<std::string>>();
    g.min_units = j.value("min_units", 3);
    g.max_units = j.value("max_units", 5);
    if (j.contains("recall")) {
      const json& r = j.at("recall");
      g.recall.enabled = true;
      g.recall.key_class = r.at("key_class").get<std::string>();
      g.recall.val_class = r.at("val_class").get<std::string>();
      g.recall.n_bindings = r.value("n_bindings", 4);
      g.recall.n_probes = r.value("n_probes", 3);
      g.recall.reg = r.at("reg").get<std::vector<std::string>>();
      g.recall.filler = r.at("filler").get<std::vector<std::string>>();
      g.recall.probe_first =
          r.at("probe_first").get<std::vector<std::string>>();
      g.recall.probe_next = r.at("probe_next").get<std::vector<std::string>>();
      g.recall.resp_end = r.at("resp_end").get<std::vector<std::string>>();
      g.recall.resp_more = r.at("resp_more").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  g.validate();
  return g;
}

void Grammar::validate() const {
  if (openings.empty() || closings.empty() || body.empty())
    throw InvalidArgument("grammar: no terminals");
  if (body_weights.size() != body.size())
    throw InvalidArgument("grammar: body_weights length mismatch");
  for (const auto& [name, words] : classes)
    if (words.empty())
      throw InvalidArgument("grammar: empty class " + name);
  // Body slots two and three hold the context-dependent exchanges, so at
  // least three units must fit.
  if (min_units < 2 || max_units < min_units)
    throw InvalidArgument("grammar: bad unit count range");
  auto check_turn = [&](const std::vector<std::string>& turn,
                        const std::string& where) {
    if (turn.empty())
      throw InvalidArgument("grammar: " + where + " has an empty turn");
    for (const std::string& tok : turn) {
      if (is_slot(tok)) {
        if (classes.count(slot_class(tok)) == 0 ||
            class_tags.count(slot_class(tok)) == 0)
          throw InvalidArgument("grammar: unknown class " + tok + " in " +
                                where);
      } else if (word_tags.count(tok) == 0) {
        throw InvalidArgument("grammar: untagged word '" + tok + "' in " +
                              where);
      }
    }
  };
  auto check_units = [&](const std::vector<SynthUnit>& us) {
    for (const SynthUnit& u : us) {
      if (u.turns.empty())
        throw InvalidArgument("grammar: unit " + u.name + " has no turns");
      for (const auto& turn : u.turns) check_turn(turn, "unit " + u.name);
    }
  };
  check_units(openings);
  check_units(closings);
  check_units(body);
  for (const std::string& f : forced) {
    bool found = false;
    for (const SynthUnit& u : body) found = found || u.name == f;
    if (!found)
      throw InvalidArgument("grammar: forced unit " + f + " not in body");
  }
  if (!recall.enabled && forced.empty())
    throw InvalidArgument("grammar: no context-dependent units");
  if (recall.enabled) {
    auto cls = classes.find(recall.key_class);
    if (cls == classes.end() || class_tags.count(recall.key_class) == 0)
      throw InvalidArgument("grammar: recall key class " + recall.key_class +
                            " not defined");
    auto vc = classes.find(recall.val_class);
    if (vc == classes.end() || class_tags.count(recall.val_class) == 0)
      throw InvalidArgument("grammar: recall value class " + recall.val_class +
                            " not defined");
    if (vc->second.size() != 2)
      throw InvalidArgument("grammar: recall value class must hold exactly 2 "
                            "states");
    if (recall.n_bindings < 1 ||
        static_cast<std::size_t>(recall.n_bindings) > cls->second.size())
      throw InvalidArgument("grammar: recall n_bindings out of range");
    if (recall.n_probes < 1 || recall.n_probes > recall.n_bindings)
      throw InvalidArgument("grammar: recall n_probes out of range");
    for (const auto* frame :
         {&recall.reg, &recall.filler, &recall.probe_first, &recall.probe_next,
          &recall.resp_end, &recall.resp_more})
      check_turn(*frame, "recall frame");
    auto has_slot = [&](const std::vector<std::string>& frame,
                        const std::string& cls_name) {
      for (const std::string& tok : frame)
        if (is_slot(tok) && slot_class(tok) == cls_name) return true;
      return false;
    };
    if (!has_slot(recall.reg, recall.key_class) ||
        !has_slot(recall.reg, recall.val_class))
      throw InvalidArgument("grammar: recall reg frame needs key and value "
                            "slots");
    for (const auto* frame : {&recall.filler, &recall.probe_first,
                              &recall.probe_next})
      if (!has_slot(*frame, recall.key_class))
        throw InvalidArgument("grammar: recall frame needs a key slot");
    // The two responses must start identically so the continuation is not
    // readable off the first word.
    for (const auto* frame : {&recall.resp_end, &recall.resp_more})
      for (const std::string& tok : *frame)
        if (is_slot(tok))
          throw InvalidArgument("grammar: recall responses take no slots");
    if (recall.resp_end.front() != recall.resp_more.front())
      throw InvalidArgument("grammar: recall responses must share their "
                            "first word");
  }
}

namespace {

std::size_t weighted_pick(const std::vector<double>& weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double r = rng.uniform01() * total;
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  return weights.size() - 1;
}

void append_unit(const Grammar& g, const SynthUnit& u, Rng& rng, Dialog& d) {
  for (const auto& turn_tpl : u.turns) {
    Turn t;
    t.speaker = d.turns.size() % 2 == 0 ? Speaker::A : Speaker::B;
    for (const std::string& tok : turn_tpl) {
      if (is_slot(tok)) {
        const auto& cls = g.classes.at(slot_class(tok));
        t.words.push_back(cls[rng.uniform(cls.size())]);
        t.pos.push_back(g.class_tags.at(slot_class(tok)));
      } else {
        t.words.push_back(tok);
        t.pos.push_back(g.word_tags.at(tok));
      }
    }
    d.turns.push_back(std::move(t));
  }
}

// Fills one recall frame; key/value slots take the bound words instead of
// independent draws.
void append_frame(const Grammar& g, const std::vector<std::string>& frame,
                  const std::string& key, const std::string& val, Dialog& d) {
  Turn t;
  t.speaker = d.turns.size() % 2 == 0 ? Speaker::A : Speaker::B;
  for (const std::string& tok : frame) {
    if (is_slot(tok)) {
      const std::string cls = slot_class(tok);
      t.words.push_back(cls == g.recall.key_class ? key : val);
      t.pos.push_back(g.class_tags.at(cls));
    } else {
      t.words.push_back(tok);
      t.pos.push_back(g.word_tags.at(tok));
    }
  }
  d.turns.push_back(std::move(t));
}

struct Bindings {
  std::vector<std::string> key, val;
};

// Registers the bindings and one interference turn right after the
// opening; the probes come only after the middle units, so the answers
// live tens of tokens behind the questions.
Bindings append_recall_regs(const Grammar& g, Rng& rng, Dialog& d) {
  const RecallSpec& r = g.recall;
  const auto& keys = g.classes.at(r.key_class);
  const auto& vals = g.classes.at(r.val_class);
  const auto nb = static_cast<std::size_t>(r.n_bindings);
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < nb; ++i)
    std::swap(order[i], order[i + rng.uniform(order.size() - i)]);
  Bindings b;
  b.key.resize(nb);
  b.val.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    b.key[i] = keys[order[i]];
    b.val[i] = vals[rng.uniform(vals.size())];
    append_frame(g, r.reg, b.key[i], b.val[i], d);
  }
  // Any key may reappear here (and in middle units) as an ordinary noun,
  // so the latest mention of a key is not its registration.
  append_frame(g, r.filler, keys[rng.uniform(keys.size())], "", d);
  return b;
}

void append_recall_probes(const Grammar& g, const Bindings& b, Rng& rng,
                          Dialog& d) {
  const RecallSpec& r = g.recall;
  const auto& vals = g.classes.at(r.val_class);
  const auto nb = b.key.size();
  std::vector<std::size_t> porder(nb);
  std::iota(porder.begin(), porder.end(), std::size_t{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(r.n_probes); ++i)
    std::swap(porder[i], porder[i + rng.uniform(porder.size() - i)]);
  for (int j = 0; j < r.n_probes; ++j) {
    std::size_t k = porder[static_cast<std::size_t>(j)];
    append_frame(g, j == 0 ? r.probe_first : r.probe_next, b.key[k], b.val[k],
                 d);
    append_frame(g, b.val[k] == vals[0] ? r.resp_end : r.resp_more, "", "",
                 d);
  }
}

}  // namespace

std::vector<Dialog> synth_corpus(const Grammar& grammar, std::size_t n,
                                 std::uint64_t seed) {
  grammar.validate();
  std::vector<const SynthUnit*> forced_units;
  for (const std::string& f : grammar.forced)
    for (const SynthUnit& u : grammar.body)
      if (u.name == f) forced_units.push_back(&u);

  std::vector<Dialog> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, i));
    Dialog d;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06zu", i);
    d.id = idbuf;
    append_unit(grammar, grammar.openings[rng.uniform(grammar.openings.size())],
                rng, d);
    int n_units = grammar.min_units +
                  static_cast<int>(rng.uniform(static_cast<std::uint64_t>(
                      grammar.max_units - grammar.min_units + 1)));
    // Layout: registrations right after the opening, middle units, probes
    // last. The first middle slot holds a forced previous-turn-dependent
    // unit; without recall the forced unit takes the second slot instead,
    // far enough in for ablation windows that skip early turns.
    Bindings bindings;
    if (grammar.recall.enabled) bindings = append_recall_regs(grammar, rng, d);
    for (int u = 0; u < n_units; ++u) {
      int forced_slot = grammar.recall.enabled ? 0 : 1;
      if (u == forced_slot && !forced_units.empty())
        append_unit(grammar, *forced_units[rng.uniform(forced_units.size())],
                    rng, d);
      else
        append_unit(grammar,
                    grammar.body[weighted_pick(grammar.body_weights, rng)],
                    rng, d);
    }
    if (grammar.recall.enabled)
      append_recall_probes(grammar, bindings, rng, d);
    append_unit(grammar, grammar.closings[rng.uniform(grammar.closings.size())],
                rng, d);
    validate_dialog(d);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace ttlab
