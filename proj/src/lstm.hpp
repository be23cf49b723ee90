#pragma once

// Recurrent binary turn-shift classifier: embedding, stacked LSTM layers,
// sigmoid head. Consumes the same serialized token stream as the language
// model, speaker tokens included, and emits per position the probability
// that the next token is a speaker token.

#include <cmath>
#include <string>
#include <vector>

#include "adamw.hpp"
#include "autodiff.hpp"
#include "bpe.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace ttlab {

struct LstmConfig {
  int vocab_size = 0;
  int d_embed = 128;
  int hidden = 128;
  int n_layers = 2;
  double dropout_p = 0.1;

  void validate() const {
    if (vocab_size < 5 || d_embed < 1 || hidden < 1 || n_layers < 1)
      throw InvalidArgument("lstm config: non-positive dimension");
    if (dropout_p < 0 || dropout_p >= 1)
      throw InvalidArgument("lstm config: dropout_p out of range");
  }
};

template <typename T>
class LstmClassifier {
 public:
  struct Layer {
    Var<T> wx;  // [in x 4h], gate order i, f, g, o
    Var<T> wh;  // [h x 4h]
    Var<T> b;   // [4h]
  };

  LstmConfig cfg;
  Var<T> emb;
  std::vector<Layer> layers;
  Var<T> w_head, b_head;

  static LstmClassifier init(const LstmConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    LstmClassifier m;
    m.cfg = cfg;
    Rng rng(seed);
    const auto h = static_cast<std::size_t>(cfg.hidden);
    double k = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    auto uniform = [&](std::vector<std::size_t> shape, double bound) {
      Tensor<T> t(std::move(shape));
      for (std::size_t i = 0; i < t.size(); ++i)
        t.at(i) = T((rng.uniform01() * 2.0 - 1.0) * bound);
      return make_var<T>(std::move(t), true);
    };
    m.emb = uniform({static_cast<std::size_t>(cfg.vocab_size),
                     static_cast<std::size_t>(cfg.d_embed)},
                    0.1);
    for (int l = 0; l < cfg.n_layers; ++l) {
      std::size_t in =
          l == 0 ? static_cast<std::size_t>(cfg.d_embed) : h;
      Layer lay;
      lay.wx = uniform({in, 4 * h}, k);
      lay.wh = uniform({h, 4 * h}, k);
      lay.b = make_var<T>(Tensor<T>({4 * h}), true);
      // Forget-gate bias starts positive so early training does not flush
      // the cell state.
      for (std::size_t i = h; i < 2 * h; ++i) lay.b->value.at(i) = T(1);
      m.layers.push_back(std::move(lay));
    }
    m.w_head = uniform({h, 1}, k);
    m.b_head = make_var<T>(Tensor<T>({1}), true);
    return m;
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> ps;
    ps.push_back({"emb", emb, true});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      ps.push_back({p + "wx", layers[l].wx, true});
      ps.push_back({p + "wh", layers[l].wh, true});
      ps.push_back({p + "b", layers[l].b, false});
    }
    ps.push_back({"w_head", w_head, true});
    ps.push_back({"b_head", b_head, false});
    return ps;
  }

  // Probabilities [T x 1] that the next token is a speaker token.
  Var<T> forward(Tape<T>* tape, const TokenSeq& seq, bool train_mode = false,
                 Rng* rng = nullptr) const {
    if (seq.size() == 0) throw InvalidArgument("forward: empty sequence");
    for (int id : seq.ids)
      if (id < 0 || id >= cfg.vocab_size)
        throw InvalidArgument("forward: token id out of range");
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t n = seq.size();
    double p = train_mode ? cfg.dropout_p : 0.0;
    Var<T> x = ops::embedding_rows(tape, emb, seq.ids);
    x = ops::dropout(tape, x, p, rng, train_mode);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Layer& lay = layers[l];
      Var<T> xw = ops::matmul(tape, x, lay.wx);  // [T x 4h]
      Var<T> hprev = make_const(Tensor<T>({1, h}));
      Var<T> cprev = make_const(Tensor<T>({1, h}));
      std::vector<Var<T>> hs;
      hs.reserve(n);
      for (std::size_t t = 0; t < n; ++t) {
        Var<T> gates = ops::add_rowwise(
            tape,
            ops::add(tape, ops::slice_rows(tape, xw, t, 1),
                     ops::matmul(tape, hprev, lay.wh)),
            lay.b);
        Var<T> ig = ops::sigmoid(tape, ops::slice_cols(tape, gates, 0, h));
        Var<T> fg = ops::sigmoid(tape, ops::slice_cols(tape, gates, h, h));
        Var<T> gg = ops::tanh_op(tape, ops::slice_cols(tape, gates, 2 * h, h));
        Var<T> og =
            ops::sigmoid(tape, ops::slice_cols(tape, gates, 3 * h, h));
        cprev = ops::add(tape, ops::mul(tape, fg, cprev),
                         ops::mul(tape, ig, gg));
        hprev = ops::mul(tape, og, ops::tanh_op(tape, cprev));
        hs.push_back(hprev);
      }
      x = ops::concat_rows(tape, hs);
      if (l + 1 < layers.size())
        x = ops::dropout(tape, x, p, rng, train_mode);
    }
    Var<T> logits = ops::add_rowwise(tape, ops::matmul(tape, x, w_head),
                                     b_head);
    return ops::sigmoid(tape, logits);
  }
};

}  // namespace ttlab
