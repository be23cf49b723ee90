#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "attribution.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "synth.hpp"
#include "train.hpp"

using namespace ttlab;
namespace op = ttlab::ops;

namespace {

struct Setup {
  std::vector<Dialog> dialogs;
  Vocab vocab;
  TransformerLM<double> model;
};

Setup tiny_setup(int n_dialogs, std::uint64_t seed, bool trained) {
  auto ds = synth_corpus(Grammar::builtin(), n_dialogs, seed);
  Vocab v = Vocab::train(ds, 96);
  TransformerConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 256;
  mc.vocab_size = static_cast<int>(v.size());
  auto m = TransformerLM<double>::init(mc, 5);
  if (trained) {
    std::vector<TokenSeq> tr, va;
    for (std::size_t i = 0; i < ds.size(); ++i)
      (i + 2 < ds.size() ? tr : va).push_back(encode_dialog(ds[i], v));
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_steps = 120;
    tc.eval_every = 30;
    tc.lr = 3e-3;
    tc.dropout = 0.0;
    tc.seed = 9;
    train_lm(m, tr, va, tc);
  }
  return {std::move(ds), std::move(v), std::move(m)};
}

}  // namespace

TEST_CASE("a zero floor admits every true shift position") {
  Setup s = tiny_setup(6, 51, false);
  std::size_t shifts = 0;
  for (const Dialog& d : s.dialogs) {
    TokenSeq seq = encode_dialog(d, s.vocab);
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq.shift_label[t] && seq.eval_mask[t]) ++shifts;
  }
  auto targets = select_targets(s.model, s.dialogs, s.vocab, 0.0,
                                s.dialogs.size(), 1u << 20, 1);
  CHECK(targets.size() == shifts);
  for (const IgTarget& t : targets) {
    TokenSeq seq = encode_dialog(s.dialogs[t.dialog_index], s.vocab);
    CHECK(seq.shift_label[t.position] == 1);
  }
}

TEST_CASE("an impossible floor reports the candidate count") {
  Setup s = tiny_setup(4, 53, false);
  try {
    select_targets(s.model, s.dialogs, s.vocab, 1.0, 4, 8, 1);
    FAIL("expected throw");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("0 of ") != std::string::npos);
  }
}

TEST_CASE("target selection is reproducible under a seed") {
  Setup s = tiny_setup(8, 55, false);
  auto a = select_targets(s.model, s.dialogs, s.vocab, 0.0, 4, 1, 777);
  auto b = select_targets(s.model, s.dialogs, s.vocab, 0.0, 4, 1, 777);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dialog_index == b[i].dialog_index);
    CHECK(a[i].position == b[i].position);
    CHECK(a[i].trp == b[i].trp);
  }
  CHECK(a.size() == 4);  // one per dialog, four dialogs
}

TEST_CASE("selection equals an enumerate-then-filter pass") {
  Setup s = tiny_setup(5, 57, false);
  // Enumerate TRPs independently, pick a floor that splits the field.
  std::vector<double> all_trp;
  std::vector<std::pair<std::size_t, std::size_t>> want;
  double floor;
  {
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> cand;
    for (std::size_t i = 0; i < s.dialogs.size(); ++i) {
      TokenSeq seq = encode_dialog(s.dialogs[i], s.vocab);
      Var<double> logits = s.model.forward(nullptr, seq);
      auto trp = trp_probs(logits->value, s.vocab);
      for (std::size_t t = 0; t < seq.size(); ++t)
        if (seq.shift_label[t] && seq.eval_mask[t])
          cand.push_back({trp[t], {i, t}});
    }
    REQUIRE(cand.size() >= 4);
    std::vector<double> ps;
    for (auto& c : cand) ps.push_back(c.first);
    std::sort(ps.begin(), ps.end());
    floor = ps[ps.size() / 2];
    for (auto& c : cand)
      if (c.first > floor) want.push_back(c.second);
  }
  auto got = select_targets(s.model, s.dialogs, s.vocab, floor,
                            s.dialogs.size(), 1u << 20, 3);
  std::vector<std::pair<std::size_t, std::size_t>> got_keys;
  for (const IgTarget& t : got) got_keys.push_back({t.dialog_index, t.position});
  std::sort(got_keys.begin(), got_keys.end());
  std::sort(want.begin(), want.end());
  CHECK(got_keys == want);
}

TEST_CASE("attention aggregation yields a probability vector per target") {
  Setup s = tiny_setup(4, 59, false);
  auto targets = select_targets(s.model, s.dialogs, s.vocab, 0.0, 4, 2, 3);
  auto attr = aggregate_attention(s.model, s.dialogs, s.vocab, targets);
  REQUIRE(attr.size() == targets.size());
  for (const TurnAttribution& a : attr) {
    double sum = 0;
    for (double v : a.values) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(a.kind == AttributionKind::kAttention);
  }
}

TEST_CASE("attention aggregation matches a direct recomputation") {
  Setup s = tiny_setup(3, 61, false);
  auto targets = select_targets(s.model, s.dialogs, s.vocab, 0.0, 1, 1, 5);
  REQUIRE(!targets.empty());
  const IgTarget& tg = targets[0];
  auto attr = aggregate_attention(s.model, s.dialogs, s.vocab, {tg});

  TokenSeq seq = encode_dialog(s.dialogs[tg.dialog_index], s.vocab);
  AttnCapture<double> cap = s.model.attention_maps(seq);
  std::array<double, 5> slots{};
  double kept = 0;
  for (std::size_t j = 0; j <= tg.position; ++j) {
    double m = 0;
    for (std::size_t l = 0; l < cap.n_layers; ++l)
      for (std::size_t h = 0; h < cap.n_heads; ++h)
        m += cap.at(l, h).at2(tg.position, j);
    m /= static_cast<double>(cap.n_layers * cap.n_heads);
    int off = seq.turn_index[tg.position] - seq.turn_index[j];
    if (off < 5) {
      slots[static_cast<std::size_t>(off)] += m;
      kept += m;
    }
  }
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(attr[0].values[i] == doctest::Approx(slots[i] / kept).epsilon(1e-12));
}

TEST_CASE("a single-turn dialog holds all its attention") {
  Dialog d;
  d.id = "solo";
  d.turns.push_back({Speaker::A, {"ab", "ba", "ab"}, {"X", "Y", "X"}, -1, -1});
  Dialog dummy;  // vocabulary source
  dummy.id = "v";
  dummy.turns.push_back({Speaker::A, {"ab"}, {}, -1, -1});
  dummy.turns.push_back({Speaker::B, {"ba"}, {}, -1, -1});
  Vocab v = Vocab::train({dummy}, 6);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 1;
  mc.d_model = 8;
  mc.d_ff = 16;
  mc.ctx_len = 16;
  mc.vocab_size = static_cast<int>(v.size());
  auto m = TransformerLM<double>::init(mc, 7);
  TokenSeq seq = encode_dialog(d, v);
  IgTarget tg{0, "solo", seq.size() - 1, 0.0};
  auto attr = aggregate_attention(m, {d}, v, {tg});
  CHECK(attr[0].values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(attr[0].padded);
}

TEST_CASE("per-layer attention view still normalizes") {
  Setup s = tiny_setup(3, 63, false);
  auto targets = select_targets(s.model, s.dialogs, s.vocab, 0.0, 2, 1, 5);
  auto attr = aggregate_attention(s.model, s.dialogs, s.vocab, targets, 1);
  for (const TurnAttribution& a : attr) {
    double sum = 0;
    for (double x : a.values) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(
      aggregate_attention(s.model, s.dialogs, s.vocab, targets, 2),
      InvalidArgument);
}

TEST_CASE("a linear target recovers the closed-form attribution") {
  Rng rng(71);
  Tensor<double> input({3, 4}), baseline({3, 4}), u({1, 3}), v({4, 1});
  for (std::size_t i = 0; i < input.size(); ++i) {
    input.at(i) = rng.normal();
    baseline.at(i) = rng.normal();
  }
  for (std::size_t i = 0; i < 3; ++i) u.at(i) = rng.normal();
  for (std::size_t i = 0; i < 4; ++i) v.at(i) = rng.normal();

  auto f = [&](Tape<double>* tape, const Var<double>& x) {
    Var<double> uu = make_const(u);
    Var<double> vv = make_const(v);
    return op::matmul(tape, op::matmul(tape, uu, x), vv);
  };
  for (IgQuadrature q : {IgQuadrature::kTrapezoid, IgQuadrature::kLeft}) {
    IgConfig cfg;
    cfg.steps = 16;
    cfg.quadrature = q;
    IgResult r = integrate_gradients_fn(input, baseline, cfg, f);
    for (std::size_t t = 0; t < 3; ++t) {
      double want = 0;
      for (std::size_t c = 0; c < 4; ++c)
        want += u.at(t) * v.at(c) * (input.at2(t, c) - baseline.at2(t, c));
      CHECK(r.token_values[t] == doctest::Approx(want).epsilon(1e-10));
    }
    CHECK(r.residual < 1e-10);
  }
}

TEST_CASE("baseline input attributes nothing") {
  Dialog d;
  d.id = "oov";
  d.turns.push_back({Speaker::A, {"zz", "zz"}, {"X", "Y"}, -1, -1});
  d.turns.push_back({Speaker::B, {"zz"}, {"X"}, -1, -1});
  d.turns.push_back({Speaker::A, {"zz"}, {"Y"}, -1, -1});
  Dialog dummy;
  dummy.id = "v";
  dummy.turns.push_back({Speaker::A, {"ab"}, {}, -1, -1});
  dummy.turns.push_back({Speaker::B, {"ba"}, {}, -1, -1});
  Vocab v = Vocab::train({dummy}, 6);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 1;
  mc.d_model = 8;
  mc.d_ff = 16;
  mc.ctx_len = 16;
  mc.vocab_size = static_cast<int>(v.size());
  auto m = TransformerLM<double>::init(mc, 8);
  TokenSeq seq = encode_dialog(d, v);
  // Every word is out of vocabulary, so the input IS the unk baseline.
  for (std::size_t t = 0; t < seq.size(); ++t)
    if (seq.word_index[t] >= 0) REQUIRE(seq.ids[t] == v.special().unk_id);
  IgConfig cfg;
  cfg.steps = 8;
  std::size_t pos = 0;
  while (pos < seq.size() && !seq.shift_label[pos]) ++pos;
  REQUIRE(pos < seq.size());
  IgAttribution a = integrated_gradients(m, v, d, pos, cfg);
  for (double x : a.token_values) CHECK(x == 0.0);
  CHECK(a.f_input == a.f_baseline);
  CHECK(a.residual == 0.0);
}

TEST_CASE("integrated gradients satisfy completeness on a trained model") {
  Setup s = tiny_setup(24, 65, true);
  auto targets =
      select_targets(s.model, s.dialogs, s.vocab, 0.2, 3, 1, 11);
  REQUIRE(!targets.empty());
  for (const IgTarget& tg : targets) {
    IgConfig cfg;
    cfg.steps = 256;
    IgAttribution a = integrated_gradients(
        s.model, s.vocab, s.dialogs[tg.dialog_index], tg.position, cfg);
    double delta = std::abs(a.f_input - a.f_baseline);
    INFO("dialog ", tg.dialog_id, " pos ", tg.position, " delta ", delta,
         " residual ", a.residual);
    CHECK(a.residual <= 0.01 * delta);

    // Speaker tokens are pinned to the path, so they explain nothing.
    TokenSeq seq = encode_dialog(s.dialogs[tg.dialog_index], s.vocab);
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq.word_index[t] < 0) CHECK(a.token_values[t] == 0.0);

    // Refining the quadrature may shift the error constant (the target has
    // kinks where the speaker argmax switches) but never doubles it.
    IgConfig half = cfg;
    half.steps = 128;
    IgAttribution b = integrated_gradients(
        s.model, s.vocab, s.dialogs[tg.dialog_index], tg.position, half);
    CHECK(a.residual <= 2.0 * b.residual + 1e-6);

    // The five-slot view sums the per-token values of recent turns.
    double slot_sum = 0, token_sum = 0;
    for (double x : a.turn.values) slot_sum += x;
    for (std::size_t t = 0; t <= tg.position; ++t)
      if (seq.turn_index[tg.position] - seq.turn_index[t] < 5)
        token_sum += a.token_values[t];
    CHECK(slot_sum == doctest::Approx(token_sum).epsilon(1e-12));
    CHECK(a.turn.kind == AttributionKind::kIg);
  }
}

TEST_CASE("ig configuration rejects a single step") {
  IgConfig cfg;
  cfg.steps = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
