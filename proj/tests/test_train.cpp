#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "checkpoint.hpp"
#include "error.hpp"
#include "synth.hpp"
#include "train.hpp"

using namespace ttlab;
namespace op = ttlab::ops;

namespace {

// Long synthetic stream with a speaker token opening every turn of ten
// tokens, alternating speakers.
TokenSeq long_seq(std::size_t len, int vocab_size) {
  TokenSeq s;
  for (std::size_t t = 0; t < len; ++t) {
    bool turn_start = t % 10 == 0;
    int turn = static_cast<int>(t / 10);
    s.ids.push_back(turn_start ? (turn % 2 == 0 ? 2 : 3)
                               : 4 + static_cast<int>(t * 13 % (vocab_size - 4)));
    s.speaker_ids.push_back(turn % 2 == 0 ? 1 : 2);
    s.turn_index.push_back(turn);
    s.word_index.push_back(turn_start ? -1 : static_cast<int>(t % 10) - 1);
    s.shift_label.push_back(t % 10 == 9 ? 1 : 0);
    s.eval_mask.push_back(turn_start || t + 1 == len ? 0 : 1);
  }
  return s;
}

struct EncodedCorpus {
  Vocab vocab;
  std::vector<TokenSeq> train, valid;
};

EncodedCorpus encoded_synth(int n, std::uint64_t seed, std::size_t vocab_size) {
  auto ds = synth_corpus(Grammar::builtin(), n, seed);
  EncodedCorpus ec{Vocab::train(ds, vocab_size), {}, {}};
  std::size_t n_valid = std::max<std::size_t>(1, ds.size() / 10);
  for (std::size_t i = 0; i < ds.size(); ++i)
    (i < ds.size() - n_valid ? ec.train : ec.valid)
        .push_back(encode_dialog(ds[i], ec.vocab));
  return ec;
}

}  // namespace

TEST_CASE("short sequences window to themselves") {
  TokenSeq s = long_seq(40, 19);
  auto ws = window_dialogs({s}, 64, 32);
  REQUIRE(ws.size() == 1);
  CHECK(ws[0].seq.ids == s.ids);
  for (auto on : ws[0].target_on) CHECK(on == 1);
}

TEST_CASE("length 300 with ctx 256 gives two windows and a masked overlap") {
  TokenSeq s = long_seq(300, 19);
  auto ws = window_dialogs({s}, 256, 128);
  REQUIRE(ws.size() == 2);
  CHECK(ws[0].seq.size() == 256);
  // Second window starts on the latest turn boundary at or before 128.
  CHECK(ws[1].seq.word_index[0] == -1);
  std::size_t start2 = 300 - ws[1].seq.size();
  CHECK(start2 == 120);
  // Its prefix up to the first window's end carries no loss.
  for (std::size_t i = 0; i < ws[1].target_on.size(); ++i)
    CHECK(static_cast<int>(ws[1].target_on[i]) ==
          (start2 + i >= 256 ? 1 : 0));
}

TEST_CASE("every window opens with a speaker token when turns are short") {
  auto ec = encoded_synth(8, 99, 96);
  std::vector<TokenSeq> all = ec.train;
  all.insert(all.end(), ec.valid.begin(), ec.valid.end());
  auto ws = window_dialogs(all, 48, 24);
  CHECK(ws.size() > all.size());
  for (const Window& w : ws) CHECK(w.seq.word_index[0] == -1);
}

TEST_CASE("window stride bounds are enforced") {
  TokenSeq s = long_seq(40, 19);
  CHECK_THROWS_AS(window_dialogs({s}, 32, 0), InvalidArgument);
  CHECK_THROWS_AS(window_dialogs({s}, 32, 33), InvalidArgument);
}

TEST_CASE("masked window positions carry zero gradient") {
  TransformerConfig cfg;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.ctx_len = 32;
  cfg.vocab_size = 19;
  cfg.dropout_p = 0.0;
  auto m = TransformerLM<double>::init(cfg, 5);
  Window w;
  w.seq = long_seq(20, 19);
  w.target_on.assign(20, 1);
  for (std::size_t t = 0; t < 8; ++t) w.target_on[t] = 0;

  Tape<double> tape;
  auto params = m.params();
  zero_grads(params);
  auto wl = lm_window_loss(&tape, m, w, true);
  tape.backward(wl.loss_sum);
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t c = 0; c < 19; ++c)
      CHECK(wl.output->grad.at2(t, c) == 0.0);
  double live = 0;
  for (std::size_t c = 0; c < 19; ++c)
    live += std::abs(wl.output->grad.at2(10, c));
  CHECK(live > 0);
}

TEST_CASE("padding adds no loss-bearing positions") {
  Window w;
  w.seq = long_seq(20, 19);
  w.target_on.assign(20, 1);
  LstmConfig lc;
  lc.vocab_size = 19;
  lc.d_embed = 8;
  lc.hidden = 8;
  lc.dropout_p = 0.0;
  auto m = LstmClassifier<double>::init(lc, 3);
  double before = lstm_window_loss<double>(nullptr, m, w).weight_sum;
  pad_window(w, 32);
  REQUIRE(w.seq.size() == 32);
  CHECK(w.seq.ids[31] == 0);
  CHECK(lstm_window_loss<double>(nullptr, m, w).weight_sum == before);
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
  auto ec = encoded_synth(6, 7, 64);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 64;
  mc.vocab_size = static_cast<int>(ec.vocab.size());
  auto m = TransformerLM<double>::init(mc, 1);
  auto before = train_detail::snapshot(m.params());
  TrainConfig tc;
  tc.batch_size = 2;
  tc.max_steps = 5;
  tc.eval_every = 5;
  tc.lr = 0.0;
  tc.dropout = 0.0;
  train_lm(m, ec.train, ec.valid, tc);
  auto after = train_detail::snapshot(m.params());
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t k = 0; k < before[i].size(); ++k)
      CHECK(before[i].at(k) == after[i].at(k));
}

TEST_CASE("same seed reproduces the training log bit for bit") {
  auto ec = encoded_synth(6, 11, 64);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 64;
  mc.vocab_size = static_cast<int>(ec.vocab.size());
  TrainConfig tc;
  tc.batch_size = 2;
  tc.max_steps = 10;
  tc.eval_every = 5;
  tc.lr = 1e-3;
  tc.seed = 42;

  auto m1 = TransformerLM<double>::init(mc, 2);
  TrainLog a = train_lm(m1, ec.train, ec.valid, tc);
  auto m2 = TransformerLM<double>::init(mc, 2);
  TrainLog b = train_lm(m2, ec.train, ec.valid, tc);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].step == b.records[i].step);
    CHECK(a.records[i].train_loss == b.records[i].train_loss);
    CHECK(a.records[i].valid_loss == b.records[i].valid_loss);
  }
  CHECK(a.best_step == b.best_step);
}

TEST_CASE("lm training loss falls on a small corpus") {
  auto ec = encoded_synth(50, 13, 96);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 64;
  mc.vocab_size = static_cast<int>(ec.vocab.size());
  auto m = TransformerLM<double>::init(mc, 3);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.max_steps = 100;
  tc.eval_every = 10;
  tc.lr = 3e-3;
  tc.dropout = 0.0;
  tc.seed = 1;
  TrainLog log = train_lm(m, ec.train, ec.valid, tc);
  REQUIRE(log.records.size() == 10);
  double head = (log.records[0].train_loss + log.records[1].train_loss +
                 log.records[2].train_loss) / 3;
  double tail = (log.records[7].train_loss + log.records[8].train_loss +
                 log.records[9].train_loss) / 3;
  INFO("head ", head, " tail ", tail);
  CHECK(tail < head - 0.2);

  // Selection invariant: best is the minimum of everything logged, and
  // the returned weights reproduce it.
  for (const TrainRecord& r : log.records) CHECK(log.best_valid <= r.valid_loss);
  double re_eval = 0, wsum = 0;
  auto ws = window_dialogs(ec.valid, 64, 32);
  for (const Window& w : ws) {
    auto wl = lm_window_loss<double>(nullptr, m, w, true);
    re_eval += wl.loss_sum->value.at(0);
    wsum += wl.weight_sum;
  }
  CHECK(re_eval / wsum == doctest::Approx(log.best_valid).epsilon(1e-12));
}

TEST_CASE("exact outputs give zero squared error") {
  Window w;
  w.seq = long_seq(12, 19);
  w.target_on.assign(12, 1);
  Tensor<double> perfect({12, 1});
  std::vector<double> weights(12, 0.0);
  for (std::size_t t = 0; t < 12; ++t)
    if (w.seq.eval_mask[t]) {
      perfect.at2(t, 0) = w.seq.shift_label[t];
      weights[t] = 1.0;
    }
  auto out = make_var<double>(perfect, false);
  auto loss = op::mse_sum<double>(nullptr, out, perfect, weights);
  CHECK(loss->value.at(0) == 0.0);
}

TEST_CASE("coin-flip outputs on balanced labels cost one quarter") {
  // Zero weights force the classifier to answer 0.5 everywhere.
  LstmConfig lc;
  lc.vocab_size = 19;
  lc.d_embed = 8;
  lc.hidden = 8;
  auto m = LstmClassifier<double>::init(lc, 9);
  for (auto& p : m.params()) p.var->value.fill(0.0);
  Window w;
  w.seq = long_seq(13, 19);
  w.target_on.assign(13, 1);
  // Balance the scoreable labels.
  int ones = 0, total = 0;
  for (std::size_t t = 0; t < 13; ++t)
    if (w.seq.eval_mask[t]) ++total, ones += w.seq.shift_label[t];
  for (std::size_t t = 0; t < 13 && ones * 2 < total; ++t)
    if (w.seq.eval_mask[t] && !w.seq.shift_label[t]) {
      w.seq.shift_label[t] = 1;
      ++ones;
    }
  REQUIRE(ones * 2 == total);
  auto wl = lstm_window_loss<double>(nullptr, m, w);
  CHECK(wl.loss_sum->value.at(0) / wl.weight_sum ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("lstm overfits the two-turn fixture") {
  Dialog d;
  d.id = "fixture";
  d.turns.push_back({Speaker::A, {"hello", "there"}, {}, -1, -1});
  d.turns.push_back({Speaker::B, {"hi"}, {}, -1, -1});
  Vocab v = Vocab::train({d}, 64);
  TokenSeq seq = encode_dialog(d, v);
  LstmConfig lc;
  lc.vocab_size = static_cast<int>(v.size());
  lc.d_embed = 8;
  lc.hidden = 16;
  lc.n_layers = 2;
  auto m = LstmClassifier<double>::init(lc, 21);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.max_steps = 300;
  tc.eval_every = 50;
  tc.lr = 0.02;
  tc.dropout = 0.0;
  tc.seed = 4;
  TrainLog log = train_lstm(m, {seq}, {seq}, tc);
  INFO("best valid ", log.best_valid);
  CHECK(log.best_valid < 0.05);

  // The last subtoken of the first turn should now scream turn change.
  Var<double> p = m.forward(nullptr, seq);
  std::size_t there_pos = 0;
  for (std::size_t t = 0; t < seq.size(); ++t)
    if (seq.shift_label[t] && seq.turn_index[t] == 0) there_pos = t;
  REQUIRE(seq.shift_label[there_pos] == 1);
  CHECK(p->value.at2(there_pos, 0) > 0.9);
}

TEST_CASE("training aborts on non-finite loss with the step number") {
  auto ec = encoded_synth(4, 17, 64);
  TransformerConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 1;
  mc.d_model = 8;
  mc.d_ff = 16;
  mc.ctx_len = 64;
  mc.vocab_size = static_cast<int>(ec.vocab.size());
  auto m = TransformerLM<double>::init(mc, 6);
  m.wte->value.at(0) = std::numeric_limits<double>::infinity();
  TrainConfig tc;
  tc.batch_size = 1;
  tc.max_steps = 3;
  tc.eval_every = 1;
  try {
    train_lm(m, ec.train, ec.valid, tc);
    FAIL("expected throw");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("checkpoints round-trip bit for bit") {
  auto ec = encoded_synth(4, 19, 64);
  TransformerConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.ctx_len = 256;
  mc.vocab_size = static_cast<int>(ec.vocab.size());
  auto m = TransformerLM<double>::init(mc, 8);
  std::uint64_t vh = ec.vocab.fingerprint();
  save_lm(m, vh, "tt_ck.bin");

  std::uint64_t vh2 = 0;
  auto m2 = load_lm<double>("tt_ck.bin", &vh2);
  CHECK(vh2 == vh);
  CHECK(m2.cfg.d_model == 16);
  TokenSeq probe = ec.train[0];
  Var<double> a = m.forward(nullptr, probe);
  Var<double> b = m2.forward(nullptr, probe);
  for (std::size_t i = 0; i < a->value.size(); ++i)
    CHECK(a->value.at(i) == b->value.at(i));

  CheckpointInfo info = read_checkpoint_info("tt_ck.bin");
  CHECK(info.kind == "lm");
  CHECK(info.elem_size == 8);

  // Wrong family and wrong precision are refused with clear messages.
  CHECK_THROWS_AS(load_lstm<double>("tt_ck.bin"), StateError);
  CHECK_THROWS_AS(load_lm<float>("tt_ck.bin"), StateError);
  std::remove("tt_ck.bin");
}

TEST_CASE("single-precision checkpoints store and reload floats exactly") {
  LstmConfig lc;
  lc.vocab_size = 32;
  lc.d_embed = 8;
  lc.hidden = 8;
  auto m = LstmClassifier<float>::init(lc, 12);
  save_lstm(m, 77u, "tt_ck32.bin");
  auto m2 = load_lstm<float>("tt_ck32.bin");
  auto pa = m.params(), pb = m2.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i].var->value.size(); ++k)
      CHECK(pa[i].var->value.at(k) == pb[i].var->value.at(k));
  std::remove("tt_ck32.bin");
}

TEST_CASE("corrupt checkpoint files are rejected") {
  {
    std::ofstream out("tt_bad.bin", std::ios::binary);
    out << "NOTACKPT and some trailing bytes";
  }
  CHECK_THROWS_AS(read_checkpoint_info("tt_bad.bin"), ParseError);
  std::remove("tt_bad.bin");
  CHECK_THROWS_AS(read_checkpoint_info("tt_missing.bin"), IoError);

  // Truncation inside the payload.
  LstmConfig lc;
  lc.vocab_size = 32;
  lc.d_embed = 8;
  lc.hidden = 8;
  auto m = LstmClassifier<double>::init(lc, 14);
  save_lstm(m, 1u, "tt_trunc.bin");
  {
    std::ifstream in("tt_trunc.bin", std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out("tt_trunc.bin", std::ios::binary | std::ios::trunc);
    out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  CHECK_THROWS_AS(load_lstm<double>("tt_trunc.bin"), ParseError);
  std::remove("tt_trunc.bin");
}
