#pragma once

// Turn-completion projection: sample continuations of a mid-turn prefix
// under nucleus filtering and histogram how many tokens arrive before the
// first speaker token. Decoding runs through a per-layer key/value cache
// so each sampled token costs one row of attention, not a full forward.

#include <cstdint>
#include <string>
#include <vector>

#include "bpe.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "transformer.hpp"

namespace ttlab {

struct ProjectConfig {
  double nucleus_p = 0.9;
  std::size_t max_len = 50;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  // Default keeps the maximal prefix whose cumulative mass stays <= p; the
  // token that would cross p is excluded. Inclusive mode keeps it instead.
  bool inclusive = false;

  void validate() const {
    if (!(nucleus_p > 0.0) || nucleus_p > 1.0)
      throw InvalidArgument("project config: nucleus_p out of (0, 1]");
    if (max_len < 1) throw InvalidArgument("project config: max_len < 1");
    if (n_samples < 1) throw InvalidArgument("project config: n_samples < 1");
  }
};

// counts[g] = rollouts that produced exactly g tokens before the first
// speaker token; counts[max_len] collects censored rollouts that never
// produced one. The counts always sum to n_samples.
struct TurnLengthHistogram {
  std::vector<std::int64_t> counts;
  std::string prefix_id;
  bool truncated = false;  // prefix was left-trimmed to fit the context

  std::int64_t total() const {
    std::int64_t s = 0;
    for (std::int64_t c : counts) s += c;
    return s;
  }
};

// Sorts descending (ties by lower token id), keeps a prefix per the p rule,
// renormalizes the kept mass. Input must sum to 1 within 1e-6; at least the
// top token is always kept. Output has the same size with zeros elsewhere.
std::vector<double> nucleus_filter(const std::vector<double>& probs, double p,
                                   bool inclusive = false);

// Draws an index proportionally to dist (need not sum to 1).
std::size_t sample_token(const std::vector<double>& dist, Rng& rng);

// Supplies next-token distributions for one rollout at a time. start()
// rewinds to the end of the prefix; step() consumes a sampled word token.
class TokenSampler {
 public:
  virtual ~TokenSampler() = default;
  virtual std::vector<double> start() = 0;
  virtual std::vector<double> step(int token_id) = 0;
};

// The rollout loop itself, independent of any model: n_samples rollouts,
// each on its own derived rng stream, censored at max_len. When keep is
// given, each rollout's generated token ids (closing speaker token
// included, when one arrived) are appended to it.
TurnLengthHistogram project_rollouts(
    TokenSampler& sampler, const ProjectConfig& cfg,
    const std::string& prefix_id = "", bool truncated = false,
    std::vector<std::vector<int>>* keep = nullptr);

// Grows by one attended position per decode_step call.
template <typename T>
struct DecodeState {
  std::vector<std::vector<T>> k, v;  // per layer, row-major [t x d_model]
  std::size_t t = 0;
};

// One incremental decoding step: returns the logits row for the new token.
// Mirrors TransformerLM::forward arithmetic (pre-norm blocks, tanh GELU,
// layer-norm eps 1e-5, tied output projection) on a single row.
template <typename T>
std::vector<T> decode_step(const TransformerLM<T>& m, DecodeState<T>& st,
                           int token_id, int speaker_id) {
  const TransformerConfig& cfg = m.cfg;
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t dh = d / static_cast<std::size_t>(cfg.n_heads);
  const std::size_t nl = m.layers.size();
  if (st.t >= static_cast<std::size_t>(cfg.ctx_len))
    throw InvalidArgument("context overflow: decode position " +
                          std::to_string(st.t) + " >= ctx_len " +
                          std::to_string(cfg.ctx_len));
  if (token_id < 0 || token_id >= cfg.vocab_size)
    throw InvalidArgument("decode: token id out of range");
  if (speaker_id != 1 && speaker_id != 2)
    throw InvalidArgument("decode: speaker id out of range");
  if (st.k.empty()) {
    st.k.resize(nl);
    st.v.resize(nl);
  }

  auto ln = [d](const std::vector<T>& in, const Var<T>& g, const Var<T>& b) {
    T mean = 0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= T(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) {
      T dv = in[c] - mean;
      var += dv * dv;
    }
    var /= T(d);
    T is = T(1) / std::sqrt(var + T(1e-5));
    std::vector<T> out(d);
    for (std::size_t c = 0; c < d; ++c)
      out[c] = (in[c] - mean) * is * g->value.at(c) + b->value.at(c);
    return out;
  };

  std::vector<T> x(d);
  for (std::size_t c = 0; c < d; ++c)
    x[c] = m.wte->value.at2(static_cast<std::size_t>(token_id), c) +
           m.wpe->value.at2(st.t, c) +
           m.wse->value.at2(static_cast<std::size_t>(speaker_id - 1), c);

  const T inv_sqrt_dh = T(1.0 / std::sqrt(static_cast<double>(dh)));
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& lay = m.layers[l];
    std::vector<T> h = ln(x, lay.ln1_g, lay.ln1_b);
    std::vector<T> qkv(3 * d);
    for (std::size_t j = 0; j < 3 * d; ++j) {
      T s = lay.b_qkv->value.at(j);
      for (std::size_t c = 0; c < d; ++c)
        s += h[c] * lay.w_qkv->value.at2(c, j);
      qkv[j] = s;
    }
    st.k[l].insert(st.k[l].end(), qkv.begin() + d, qkv.begin() + 2 * d);
    st.v[l].insert(st.v[l].end(), qkv.begin() + 2 * d, qkv.end());
    const std::size_t n = st.t + 1;  // attended positions
    const T* kc = st.k[l].data();
    const T* vc = st.v[l].data();
    std::vector<T> att(d);
    std::vector<T> scores(n);
    for (std::size_t hd = 0; hd < static_cast<std::size_t>(cfg.n_heads);
         ++hd) {
      const T* q = qkv.data() + hd * dh;
      T mx = 0;
      for (std::size_t j = 0; j < n; ++j) {
        T s = 0;
        const T* kj = kc + j * d + hd * dh;
        for (std::size_t c = 0; c < dh; ++c) s += q[c] * kj[c];
        scores[j] = s * inv_sqrt_dh;
        mx = j == 0 ? scores[j] : std::max(mx, scores[j]);
      }
      T sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        sum += scores[j];
      }
      for (std::size_t c = 0; c < dh; ++c) {
        T s = 0;
        for (std::size_t j = 0; j < n; ++j)
          s += scores[j] * vc[j * d + hd * dh + c];
        att[hd * dh + c] = s / sum;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      T s = lay.b_proj->value.at(c);
      for (std::size_t j = 0; j < d; ++j)
        s += att[j] * lay.w_proj->value.at2(j, c);
      x[c] += s;
    }

    std::vector<T> f = ln(x, lay.ln2_g, lay.ln2_b);
    const std::size_t dff = static_cast<std::size_t>(cfg.d_ff);
    std::vector<T> ff(dff);
    const T gk = T(0.7978845608028654);
    const T c3 = T(0.044715);
    for (std::size_t j = 0; j < dff; ++j) {
      T s = lay.b_fc->value.at(j);
      for (std::size_t c = 0; c < d; ++c)
        s += f[c] * lay.w_fc->value.at2(c, j);
      ff[j] = T(0.5) * s * (T(1) + std::tanh(gk * (s + c3 * s * s * s)));
    }
    for (std::size_t c = 0; c < d; ++c) {
      T s = lay.b_out->value.at(c);
      for (std::size_t j = 0; j < dff; ++j)
        s += ff[j] * lay.w_out->value.at2(j, c);
      x[c] += s;
    }
  }

  std::vector<T> xf = ln(x, m.lnf_g, m.lnf_b);
  std::vector<T> logits(static_cast<std::size_t>(cfg.vocab_size));
  for (std::size_t r = 0; r < logits.size(); ++r) {
    T s = 0;
    for (std::size_t c = 0; c < d; ++c) s += xf[c] * m.wte->value.at2(r, c);
    logits[r] = s;
  }
  ++st.t;
  return logits;
}

namespace sampling_detail {

// Max-shifted softmax over a logits row, in double for the sampler.
template <typename T>
std::vector<double> softmax(const std::vector<T>& logits) {
  double mx = static_cast<double>(logits[0]);
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> out(logits.size());
  double sum = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

template <typename T>
class LmSampler final : public TokenSampler {
 public:
  LmSampler(const TransformerLM<T>& m, const TokenSeq& prefix)
      : m_(m), speaker_(prefix.speaker_ids.back()) {
    for (std::size_t t = 0; t < prefix.size(); ++t)
      base_logits_ = decode_step(m_, base_, prefix.ids[t],
                                 prefix.speaker_ids[t]);
  }

  std::vector<double> start() override {
    cur_ = base_;
    return softmax(base_logits_);
  }

  std::vector<double> step(int token_id) override {
    return softmax(decode_step(m_, cur_, token_id, speaker_));
  }

 private:
  const TransformerLM<T>& m_;
  int speaker_;  // sampled tokens extend the current turn
  DecodeState<T> base_, cur_;
  std::vector<T> base_logits_;
};

}  // namespace sampling_detail

// Samples cfg.n_samples continuations of the prefix, which must end inside
// a turn. A prefix too long for the model context (less max_len headroom)
// is left-trimmed to the nearest turn boundary that fits and flagged.
template <typename T>
TurnLengthHistogram project_turn_end(
    const TransformerLM<T>& m, const TokenSeq& prefix,
    const ProjectConfig& cfg, const std::string& prefix_id = "",
    std::vector<std::vector<int>>* keep = nullptr) {
  cfg.validate();
  if (prefix.size() == 0) throw InvalidArgument("project: empty prefix");
  VocabSpecial sp;
  if (prefix.ids.back() == sp.speaker1_id ||
      prefix.ids.back() == sp.speaker2_id)
    throw InvalidArgument("project: prefix ends on a speaker token");
  if (static_cast<std::size_t>(m.cfg.ctx_len) <= cfg.max_len)
    throw InvalidArgument(
        "project: max_len " + std::to_string(cfg.max_len) +
        " leaves no room in ctx_len " + std::to_string(m.cfg.ctx_len));

  const std::size_t budget =
      static_cast<std::size_t>(m.cfg.ctx_len) - cfg.max_len;
  TokenSeq p = prefix;
  bool truncated = false;
  if (p.size() > budget) {
    std::size_t s = p.size();  // sentinel: no boundary fits
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p.word_index[i] < 0 && p.size() - i <= budget) {
        s = i;
        break;
      }
    if (s == p.size()) s = p.size() - budget;  // oversized single turn
    p = slice_seq(p, s, p.size());
    truncated = true;
  }

  sampling_detail::LmSampler<T> sampler(m, p);
  return project_rollouts(sampler, cfg, prefix_id, truncated, keep);
}

}  // namespace ttlab
