#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "eval.hpp"
#include "rng.hpp"
#include "synth.hpp"

using namespace ttlab;

namespace {

Vocab tiny_vocab() {
  Dialog d;
  d.id = "v";
  d.turns.push_back({Speaker::A, {"ab"}, {}, -1, -1});
  d.turns.push_back({Speaker::B, {"ba"}, {}, -1, -1});
  return Vocab::train({d}, 6);  // 2 characters + 4 specials
}

// Reads the labels it is supposed to predict; probabilities 0.9 / 0.1.
struct OraclePredictor final : ShiftPredictor {
  std::string name() const override { return "oracle"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog&,
                                  std::size_t, bool) const override {
    std::vector<double> out(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
      out[t] = seq.shift_label[t] ? 0.9 : 0.1;
    return out;
  }
};

struct ConstantPredictor final : ShiftPredictor {
  double value;
  explicit ConstantPredictor(double v) : value(v) {}
  std::string name() const override { return "constant"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog&,
                                  std::size_t, bool) const override {
    return std::vector<double>(seq.size(), value);
  }
};

// Remembers every sequence it was asked about.
struct RecordingPredictor final : ShiftPredictor {
  mutable std::vector<TokenSeq> calls;
  mutable std::vector<std::size_t> turn_los;
  std::string name() const override { return "recording"; }
  std::vector<double> shift_probs(const TokenSeq& seq, const Dialog&,
                                  std::size_t turn_lo, bool) const override {
    calls.push_back(seq);
    turn_los.push_back(turn_lo);
    std::vector<double> out(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
      out[t] = seq.shift_label[t] ? 0.9 : 0.1;
    return out;
  }
};

Dialog n_turn_dialog(const std::string& id, std::size_t n) {
  Dialog d;
  d.id = id;
  for (std::size_t i = 0; i < n; ++i) {
    Turn t;
    t.speaker = i % 2 == 0 ? Speaker::A : Speaker::B;
    t.words = {"ab", "ba"};
    t.pos = {"X", "Y"};
    d.turns.push_back(std::move(t));
  }
  return d;
}

}  // namespace

TEST_CASE("trp is the larger of the two speaker-token probabilities") {
  Vocab v = tiny_vocab();
  REQUIRE(v.size() == 6);
  Tensor<double> logits({1, 6});
  double probs[6] = {0.2, 0.1, 0.1, 0.3, 0.2, 0.1};
  for (std::size_t c = 0; c < 6; ++c) logits.at2(0, c) = std::log(probs[c]);
  auto trp = trp_probs(logits, v);
  REQUIRE(trp.size() == 1);
  CHECK(trp[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("uniform logits give trp of one over vocabulary size") {
  Vocab v = tiny_vocab();
  Tensor<double> logits({3, 6});
  auto trp = trp_probs(logits, v);
  for (double p : trp) CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("a dominating speaker logit saturates trp toward one") {
  Vocab v = tiny_vocab();
  Tensor<double> logits({1, 6});
  logits.at2(0, 3) = 40.0;
  auto trp = trp_probs(logits, v);
  CHECK(trp[0] > 1.0 - 1e-10);
  CHECK(trp[0] <= 1.0);
}

TEST_CASE("balanced accuracy from hand-counted confusion") {
  std::vector<char> preds, labels;
  auto emit = [&](int n, char p, char l) {
    for (int i = 0; i < n; ++i) preds.push_back(p), labels.push_back(l);
  };
  emit(3, 1, 1);   // TP
  emit(1, 0, 1);   // FN
  emit(90, 0, 0);  // TN
  emit(10, 1, 0);  // FP
  EvalReport r = balanced_accuracy(preds, labels);
  CHECK(r.tp == 3);
  CHECK(r.fn == 1);
  CHECK(r.tn == 90);
  CHECK(r.fp == 10);
  CHECK(r.tpr == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.tnr == doctest::Approx(0.90).epsilon(1e-12));
  CHECK(r.bacc == doctest::Approx(0.825).epsilon(1e-12));
  CHECK(r.bacc == (r.tpr + r.tnr) / 2.0);
}

TEST_CASE("perfect predictions score one, one-class guessing a half") {
  std::vector<char> labels = {1, 0, 1, 0, 0};
  CHECK(balanced_accuracy(labels, labels).bacc == 1.0);
  std::vector<char> all_neg(5, 0);
  CHECK(balanced_accuracy(all_neg, labels).bacc == 0.5);
}

TEST_CASE("single-class labels make bAcc undefined") {
  std::vector<char> ones(4, 1);
  try {
    balanced_accuracy(ones, ones);
    FAIL("expected throw");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("bAcc undefined") != std::string::npos);
  }
  std::vector<char> zeros(4, 0);
  CHECK_THROWS_AS(balanced_accuracy(zeros, zeros), InvalidArgument);
}

TEST_CASE("threshold sweep picks the lowest tying threshold") {
  TrpSeries s;
  s.push(0.9, true, "d", 0);
  s.push(0.1, false, "d", 1);
  s.push(0.8, true, "d", 2);
  s.push(0.2, false, "d", 3);
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  EvalReport r = sweep_threshold(s, grid);
  CHECK(r.bacc == 1.0);
  // Positives are strict (prob > threshold), so 0.2 already separates;
  // every tying threshold above it loses to the lowest.
  CHECK(r.threshold == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("one grid point is returned as is") {
  TrpSeries s;
  s.push(0.9, true, "d", 0);
  s.push(0.2, false, "d", 1);
  EvalReport r = sweep_threshold(s, {0.5});
  CHECK(r.threshold == 0.5);
  CHECK(r.bacc == 1.0);
}

TEST_CASE("sweep guards its grid") {
  TrpSeries s;
  s.push(0.9, true, "d", 0);
  s.push(0.2, false, "d", 1);
  CHECK_THROWS_AS(sweep_threshold(s, {}), InvalidArgument);
  CHECK_THROWS_AS(sweep_threshold(s, {0.5, 1.5}), InvalidArgument);
}

TEST_CASE("swept score dominates every grid point") {
  Rng rng(404);
  TrpSeries s;
  for (int i = 0; i < 200; ++i)
    s.push(rng.uniform01(), rng.uniform01() < 0.3, "d",
           static_cast<std::size_t>(i));
  auto grid = default_grid();
  REQUIRE(grid.size() == 99);
  EvalReport best = sweep_threshold(s, grid);
  for (double g : grid) CHECK(best.bacc >= apply_threshold(s, g).bacc);
}

TEST_CASE("balanced accuracy ignores pair order") {
  Rng rng(405);
  std::vector<char> preds, labels;
  for (int i = 0; i < 100; ++i) {
    preds.push_back(rng.uniform01() < 0.5);
    labels.push_back(rng.uniform01() < 0.4);
  }
  EvalReport a = balanced_accuracy(preds, labels);
  std::vector<std::size_t> order(100);
  for (std::size_t i = 0; i < 100; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<char> p2(100), l2(100);
  for (std::size_t i = 0; i < 100; ++i) {
    p2[i] = preds[order[i]];
    l2[i] = labels[order[i]];
  }
  EvalReport b = balanced_accuracy(p2, l2);
  CHECK(a.bacc == b.bacc);
  CHECK(a.tp == b.tp);
  CHECK(a.fp == b.fp);
}

TEST_CASE("rescaling probabilities preserves the achievable score") {
  Rng rng(406);
  TrpSeries s;
  for (int i = 0; i < 120; ++i)
    s.push(rng.uniform01(), rng.uniform01() < 0.35, "d",
           static_cast<std::size_t>(i));

  // A grid of midpoints between adjacent distinct probabilities reaches
  // every classification the ranking allows.
  auto midpoint_grid = [](const TrpSeries& ser) {
    std::vector<double> ps = ser.probs;
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    std::vector<double> g;
    g.push_back(ps.front() / 2);
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      g.push_back((ps[i] + ps[i + 1]) / 2);
    return g;
  };
  double full = sweep_threshold(s, midpoint_grid(s)).bacc;
  TrpSeries scaled;
  for (std::size_t i = 0; i < s.size(); ++i)
    scaled.push(s.probs[i] * 0.5, s.labels[i], "d", i);
  double half = sweep_threshold(scaled, midpoint_grid(scaled)).bacc;
  CHECK(full == doctest::Approx(half).epsilon(1e-12));
}

TEST_CASE("oracle predictor sweeps to a perfect score") {
  auto ds = synth_corpus(Grammar::builtin(), 6, 31);
  Vocab v = Vocab::train(ds, 96);
  std::vector<Dialog> test(ds.begin(), ds.begin() + 4);
  std::vector<Dialog> valid(ds.begin() + 4, ds.end());
  OraclePredictor oracle;
  CHECK(evaluate_model(oracle, test, valid, v, default_grid(), TuneOn::kTest)
            .bacc == 1.0);
  CHECK(evaluate_model(oracle, test, valid, v, default_grid(), TuneOn::kValid)
            .bacc == 1.0);
}

TEST_CASE("constant predictor cannot beat chance") {
  auto ds = synth_corpus(Grammar::builtin(), 4, 33);
  Vocab v = Vocab::train(ds, 96);
  ConstantPredictor c(0.42);
  EvalReport r =
      evaluate_model(c, ds, {}, v, default_grid(), TuneOn::kTest);
  CHECK(r.bacc == 0.5);
}

TEST_CASE("tuning on an empty validation set is refused") {
  auto ds = synth_corpus(Grammar::builtin(), 2, 35);
  Vocab v = Vocab::train(ds, 96);
  OraclePredictor oracle;
  CHECK_THROWS_AS(
      evaluate_model(oracle, ds, {}, v, default_grid(), TuneOn::kValid),
      InvalidArgument);
}

TEST_CASE("lm predictor yields a consistent report end to end") {
  auto ds = synth_corpus(Grammar::builtin(), 5, 37);
  Vocab v = Vocab::train(ds, 96);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 256;
  mc.vocab_size = static_cast<int>(v.size());
  auto m = TransformerLM<double>::init(mc, 9);
  LmPredictor<double> pred(m, v);
  EvalReport r = evaluate_model(pred, ds, {}, v, default_grid(), TuneOn::kTest);
  CHECK(r.bacc >= 0.0);
  CHECK(r.bacc <= 1.0);
  CHECK(r.bacc == doctest::Approx((r.tpr + r.tnr) / 2).epsilon(1e-12));
  CHECK(r.tp + r.fn > 0);
  CHECK(r.tn + r.fp > 0);
}

TEST_CASE("pos predictor matches a hand-rolled word walk") {
  auto ds = synth_corpus(Grammar::builtin(), 10, 39);
  Vocab v = Vocab::train(ds, 96);
  PosBigram table = PosBigram::fit(ds, 1.0);
  PosPredictor pred(table);
  TrpSeries got = collect_series(pred, ds, v);

  // Independent pass straight over words: per turn, BOS then the tag
  // chain; the probability sits on the word's final subtoken and every
  // other scoreable position carries zero.
  TrpSeries want;
  for (const Dialog& d : ds) {
    TokenSeq seq = encode_dialog(d, v);
    std::size_t t = 0;
    for (std::size_t ti = 0; ti < d.turns.size(); ++ti) {
      REQUIRE(seq.word_index[t] == -1);
      if (ti > 0) want.push(0.0, seq.shift_label[t], d.id, t);  // speaker tok
      ++t;
      const Turn& turn = d.turns[ti];
      for (std::size_t wi = 0; wi < turn.words.size(); ++wi) {
        double p = table.predict_pair(
            wi == 0 ? kBosTag : turn.pos[wi - 1], turn.pos[wi]);
        std::size_t n_sub = v.encode_word(turn.words[wi]).size();
        for (std::size_t s = 0; s < n_sub; ++s, ++t) {
          bool final_sub = s + 1 == n_sub;
          bool last_pos = t + 1 == seq.size();
          if (!last_pos)
            want.push(final_sub ? p : 0.0, seq.shift_label[t], d.id, t);
        }
      }
    }
  }
  // Speaker positions are masked from scoring, so the hand walk must skip
  // the ones the encoder masks; rebuild skipping eval_mask==0 entries.
  REQUIRE(got.size() <= want.size());
  std::size_t gi = 0;
  for (std::size_t wi = 0; wi < want.size(); ++wi) {
    const Dialog* dlg = nullptr;
    for (const Dialog& d : ds)
      if (d.id == want.dialog_ids[wi]) dlg = &d;
    REQUIRE(dlg != nullptr);
    TokenSeq seq = encode_dialog(*dlg, v);
    if (!seq.eval_mask[want.positions[wi]]) continue;
    REQUIRE(gi < got.size());
    CHECK(got.probs[gi] == want.probs[wi]);
    CHECK(got.labels[gi] == want.labels[wi]);
    CHECK(got.positions[gi] == want.positions[wi]);
    ++gi;
  }
  CHECK(gi == got.size());

  EvalReport a = sweep_threshold(got, default_grid());
  EvalReport b = evaluate_model(pred, ds, {}, v, default_grid(), TuneOn::kTest);
  CHECK(a.bacc == b.bacc);
  CHECK(a.threshold == b.threshold);
}

TEST_CASE("ablation scores only turns with four predecessors") {
  Vocab v = tiny_vocab();
  std::vector<Dialog> ds = {n_turn_dialog("six", 6), n_turn_dialog("four", 4)};
  RecordingPredictor rec;
  ablate_context(rec, ds, v, default_grid(), 2);
  REQUIRE(rec.calls.size() == 2);  // turns 4 and 5 of the 6-turn dialog
  // Slice for turn 4 = turns 2..4: opens at a speaker token with its
  // original identity.
  const TokenSeq& s = rec.calls[0];
  CHECK(rec.turn_los[0] == 2);
  CHECK(s.word_index[0] == -1);
  CHECK(s.turn_index[0] == 2);
  CHECK(s.speaker_ids[0] == 1);  // turn 2 belongs to speaker A
  CHECK(s.turn_index.back() == 4);
  CHECK(rec.calls[1].turn_index[0] == 3);
  CHECK(rec.calls[1].turn_index.back() == 5);
}

TEST_CASE("k=4 on a five-turn dialog consumes the full prefix") {
  Vocab v = tiny_vocab();
  // The second dialog only supplies the positive labels the sweep needs.
  std::vector<Dialog> ds = {n_turn_dialog("five", 5), n_turn_dialog("six", 6)};
  TokenSeq full = encode_dialog(ds[0], v);
  RecordingPredictor rec;
  ablate_context(rec, ds, v, default_grid(), 4);
  REQUIRE(rec.calls.size() == 3);
  CHECK(rec.calls[0].size() == full.size());
  CHECK(rec.calls[0].ids == full.ids);
  CHECK(rec.turn_los[0] == 0);
}

TEST_CASE("slices preserve speaker identity for odd starts") {
  Vocab v = tiny_vocab();
  std::vector<Dialog> ds = {n_turn_dialog("six", 6)};
  RecordingPredictor rec;
  ablate_context(rec, ds, v, default_grid(), 1);
  // Scored turns 4 and 5; the slice for turn 4 starts at turn 3 (B).
  REQUIRE(rec.calls.size() == 2);
  CHECK(rec.calls[0].turn_index[0] == 3);
  CHECK(rec.calls[0].speaker_ids[0] == 2);
  CHECK(rec.calls[1].turn_index[0] == 4);
  CHECK(rec.calls[1].speaker_ids[0] == 1);
}

TEST_CASE("ablation without qualifying turns is an error") {
  Vocab v = tiny_vocab();
  std::vector<Dialog> ds = {n_turn_dialog("four", 4)};
  try {
    OraclePredictor oracle;
    ablate_context(oracle, ds, v, default_grid(), 1);
    FAIL("expected throw");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("no qualifying turns") !=
          std::string::npos);
  }
  OraclePredictor oracle;
  CHECK_THROWS_AS(ablate_context(oracle, ds, v, default_grid(), 5),
                  InvalidArgument);
}

TEST_CASE("pos ablation is flat across nonzero context sizes") {
  auto ds = synth_corpus(Grammar::builtin(), 12, 41);
  Vocab v = Vocab::train(ds, 96);
  PosBigram table = PosBigram::fit(ds, 1.0);
  PosPredictor pred(table);
  EvalReport k0 = ablate_context(pred, ds, v, default_grid(), 0);
  EvalReport k1 = ablate_context(pred, ds, v, default_grid(), 1);
  EvalReport k2 = ablate_context(pred, ds, v, default_grid(), 2);
  EvalReport k4 = ablate_context(pred, ds, v, default_grid(), 4);
  CHECK(k1.bacc == k2.bacc);
  CHECK(k1.bacc == k4.bacc);
  CHECK(k1.threshold == k4.threshold);
  // k=0 swaps the turn-initial context for the start tag; with unseen
  // start bigrams present this moves at least the confusion counts
  // somewhere on the grid. Summaries may still coincide, so compare the
  // full sweep outcome only loosely: it must be a valid report.
  CHECK(k0.bacc >= 0.0);
  CHECK(k0.bacc <= 1.0);
}
