#pragma once

// Decoder-only transformer language model over the dialog token stream.
// Input representation at position t is word + position + speaker
// embedding; the output projection is tied to the word-embedding table.
// Pre-norm residual blocks, causal attention, GELU feed-forward.

#include <cmath>
#include <string>
#include <vector>

#include "adamw.hpp"
#include "autodiff.hpp"
#include "bpe.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace ttlab {

struct TransformerConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  int ctx_len = 256;
  int vocab_size = 0;
  double dropout_p = 0.1;

  void validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 ||
        vocab_size < 5)
      throw InvalidArgument("transformer config: non-positive dimension");
    if (d_model % n_heads != 0)
      throw InvalidArgument("transformer config: d_model not divisible by n_heads");
    if (ctx_len < 2) throw InvalidArgument("transformer config: ctx_len < 2");
    if (dropout_p < 0 || dropout_p >= 1)
      throw InvalidArgument("transformer config: dropout_p out of range");
  }
};

// Post-softmax attention weights for every layer and head, [T x T] each.
template <typename T>
struct AttnCapture {
  std::size_t n_layers = 0, n_heads = 0, seq_len = 0;
  std::vector<Tensor<T>> maps;

  const Tensor<T>& at(std::size_t layer, std::size_t head) const {
    return maps.at(layer * n_heads + head);
  }
};

template <typename T>
class TransformerLM {
 public:
  struct Layer {
    Var<T> ln1_g, ln1_b;
    Var<T> w_qkv, b_qkv;
    Var<T> w_proj, b_proj;
    Var<T> ln2_g, ln2_b;
    Var<T> w_fc, b_fc;
    Var<T> w_out, b_out;
  };

  TransformerConfig cfg;
  Var<T> wte, wpe, wse;
  std::vector<Layer> layers;
  Var<T> lnf_g, lnf_b;

  static TransformerLM init(const TransformerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TransformerLM m;
    m.cfg = cfg;
    Rng rng(seed);
    auto normal = [&](std::vector<std::size_t> shape, double sd) {
      Tensor<T> t(std::move(shape));
      for (std::size_t i = 0; i < t.size(); ++i)
        t.at(i) = T(rng.normal(0.0, sd));
      return make_var<T>(std::move(t), true);
    };
    auto fill = [&](std::vector<std::size_t> shape, T v) {
      return make_var<T>(Tensor<T>(std::move(shape), v), true);
    };
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto dff = static_cast<std::size_t>(cfg.d_ff);
    m.wte = normal({static_cast<std::size_t>(cfg.vocab_size), d}, 0.02);
    m.wpe = normal({static_cast<std::size_t>(cfg.ctx_len), d}, 0.01);
    m.wse = normal({2, d}, 0.02);
    double resid_sd = 0.02 / std::sqrt(2.0 * cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
      Layer lay;
      lay.ln1_g = fill({d}, T(1));
      lay.ln1_b = fill({d}, T(0));
      lay.w_qkv = normal({d, 3 * d}, 0.02);
      lay.b_qkv = fill({3 * d}, T(0));
      lay.w_proj = normal({d, d}, resid_sd);
      lay.b_proj = fill({d}, T(0));
      lay.ln2_g = fill({d}, T(1));
      lay.ln2_b = fill({d}, T(0));
      lay.w_fc = normal({d, dff}, 0.02);
      lay.b_fc = fill({dff}, T(0));
      lay.w_out = normal({dff, d}, resid_sd);
      lay.b_out = fill({d}, T(0));
      m.layers.push_back(std::move(lay));
    }
    m.lnf_g = fill({d}, T(1));
    m.lnf_b = fill({d}, T(0));
    return m;
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> ps;
    ps.push_back({"wte", wte, true});
    ps.push_back({"wpe", wpe, true});
    ps.push_back({"wse", wse, true});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      Layer& lay = layers[l];
      ps.push_back({p + "ln1_g", lay.ln1_g, false});
      ps.push_back({p + "ln1_b", lay.ln1_b, false});
      ps.push_back({p + "w_qkv", lay.w_qkv, true});
      ps.push_back({p + "b_qkv", lay.b_qkv, false});
      ps.push_back({p + "w_proj", lay.w_proj, true});
      ps.push_back({p + "b_proj", lay.b_proj, false});
      ps.push_back({p + "ln2_g", lay.ln2_g, false});
      ps.push_back({p + "ln2_b", lay.ln2_b, false});
      ps.push_back({p + "w_fc", lay.w_fc, true});
      ps.push_back({p + "b_fc", lay.b_fc, false});
      ps.push_back({p + "w_out", lay.w_out, true});
      ps.push_back({p + "b_out", lay.b_out, false});
    }
    ps.push_back({"lnf_g", lnf_g, false});
    ps.push_back({"lnf_b", lnf_b, false});
    return ps;
  }

  // Word+position+speaker embedding sum for a token sequence.
  Var<T> embed(Tape<T>* tape, const TokenSeq& seq) const {
    check_seq(seq);
    std::vector<int> pos(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
      pos[t] = static_cast<int>(t);
    std::vector<int> spk(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
      spk[t] = seq.speaker_ids[t] - 1;
    Var<T> x = ops::embedding_rows(tape, wte, seq.ids);
    x = ops::add(tape, x, ops::embedding_rows(tape, wpe, pos));
    x = ops::add(tape, x, ops::embedding_rows(tape, wse, spk));
    return x;
  }

  Var<T> forward(Tape<T>* tape, const TokenSeq& seq, bool train_mode = false,
                 Rng* rng = nullptr, AttnCapture<T>* capture = nullptr) const {
    Var<T> x = embed(tape, seq);
    x = ops::dropout(tape, x, train_mode ? cfg.dropout_p : 0.0, rng,
                     train_mode);
    return trunk(tape, x, train_mode, rng, capture);
  }

  // Forward pass from an explicit word-embedding matrix [T x d_model];
  // position and speaker embeddings are added internally. This is the
  // differentiable entry point for input attributions.
  Var<T> forward_from_word_embeddings(Tape<T>* tape, const Var<T>& wemb,
                                      const std::vector<int>& speaker_ids,
                                      AttnCapture<T>* capture = nullptr) const {
    if (wemb->value.rows() != speaker_ids.size() ||
        wemb->value.cols() != static_cast<std::size_t>(cfg.d_model))
      throw InvalidArgument("forward_from_word_embeddings: bad input shape " +
                            wemb->value.shape_str());
    if (speaker_ids.size() > static_cast<std::size_t>(cfg.ctx_len))
      throw InvalidArgument("context overflow: " +
                            std::to_string(speaker_ids.size()) + " > " +
                            std::to_string(cfg.ctx_len));
    std::vector<int> pos(speaker_ids.size());
    for (std::size_t t = 0; t < pos.size(); ++t) pos[t] = static_cast<int>(t);
    std::vector<int> spk(speaker_ids.size());
    for (std::size_t t = 0; t < spk.size(); ++t) {
      if (speaker_ids[t] != 1 && speaker_ids[t] != 2)
        throw InvalidArgument("speaker id out of range");
      spk[t] = speaker_ids[t] - 1;
    }
    Var<T> x = ops::add(tape, wemb, ops::embedding_rows(tape, wpe, pos));
    x = ops::add(tape, x, ops::embedding_rows(tape, wse, spk));
    return trunk(tape, x, false, nullptr, capture);
  }

  AttnCapture<T> attention_maps(const TokenSeq& seq) const {
    AttnCapture<T> cap;
    forward(nullptr, seq, false, nullptr, &cap);
    return cap;
  }

 private:
  void check_seq(const TokenSeq& seq) const {
    if (seq.size() == 0) throw InvalidArgument("forward: empty sequence");
    if (seq.size() > static_cast<std::size_t>(cfg.ctx_len))
      throw InvalidArgument("context overflow: sequence length " +
                            std::to_string(seq.size()) + " > ctx_len " +
                            std::to_string(cfg.ctx_len));
    for (int id : seq.ids)
      if (id < 0 || id >= cfg.vocab_size)
        throw InvalidArgument("forward: token id out of range");
    for (int s : seq.speaker_ids)
      if (s != 1 && s != 2)
        throw InvalidArgument("forward: speaker id out of range");
  }

  Var<T> trunk(Tape<T>* tape, Var<T> x, bool train_mode, Rng* rng,
               AttnCapture<T>* capture) const {
    const std::size_t dh =
        static_cast<std::size_t>(cfg.d_model / cfg.n_heads);
    const std::size_t d = static_cast<std::size_t>(cfg.d_model);
    double p = train_mode ? cfg.dropout_p : 0.0;
    if (capture) {
      capture->n_layers = layers.size();
      capture->n_heads = static_cast<std::size_t>(cfg.n_heads);
      capture->seq_len = x->value.rows();
      capture->maps.clear();
    }
    const T inv_sqrt_dh = T(1.0 / std::sqrt(static_cast<double>(dh)));
    for (const Layer& lay : layers) {
      Var<T> h = ops::layer_norm(tape, x, lay.ln1_g, lay.ln1_b);
      Var<T> qkv =
          ops::add_rowwise(tape, ops::matmul(tape, h, lay.w_qkv), lay.b_qkv);
      std::vector<Var<T>> heads;
      for (int hd = 0; hd < cfg.n_heads; ++hd) {
        Var<T> q = ops::slice_cols(tape, qkv, hd * dh, dh);
        Var<T> k = ops::slice_cols(tape, qkv, d + hd * dh, dh);
        Var<T> v = ops::slice_cols(tape, qkv, 2 * d + hd * dh, dh);
        Var<T> scores =
            ops::scale(tape, ops::matmul_nt(tape, q, k), inv_sqrt_dh);
        Var<T> probs =
            ops::softmax_rows(tape, ops::causal_masked_fill(tape, scores));
        if (capture) capture->maps.push_back(probs->value);
        probs = ops::dropout(tape, probs, p, rng, train_mode);
        heads.push_back(ops::matmul(tape, probs, v));
      }
      Var<T> att = ops::concat_cols(tape, heads);
      att = ops::add_rowwise(tape, ops::matmul(tape, att, lay.w_proj),
                             lay.b_proj);
      att = ops::dropout(tape, att, p, rng, train_mode);
      x = ops::add(tape, x, att);

      Var<T> f = ops::layer_norm(tape, x, lay.ln2_g, lay.ln2_b);
      f = ops::gelu(tape,
                    ops::add_rowwise(tape, ops::matmul(tape, f, lay.w_fc),
                                     lay.b_fc));
      f = ops::add_rowwise(tape, ops::matmul(tape, f, lay.w_out), lay.b_out);
      f = ops::dropout(tape, f, p, rng, train_mode);
      x = ops::add(tape, x, f);
    }
    x = ops::layer_norm(tape, x, lnf_g, lnf_b);
    return ops::matmul_nt(tape, x, wte);
  }
};

}  // namespace ttlab
