#pragma once

// Reverse-mode automatic differentiation over dense tensors. Every primitive
// computes its forward value eagerly and, when a tape is supplied and an
// input requires gradients, records a backward closure. backward() replays
// the closures in reverse execution order, which is a valid topological
// order, so each node is visited exactly once.

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace ttlab {

template <typename T>
struct AdNode {
  Tensor<T> value;
  Tensor<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
};

template <typename T>
using Var = std::shared_ptr<AdNode<T>>;

template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad) {
  auto n = std::make_shared<AdNode<T>>();
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad = Tensor<T>(value.shape());
  n->value = std::move(value);
  return n;
}

template <typename T>
Var<T> make_const(Tensor<T> value) {
  return make_var<T>(std::move(value), false);
}

template <typename T>
class Tape {
 public:
  void record(std::function<void()> fn) { back_.push_back(std::move(fn)); }

  // Seeds d(out)/d(out) = 1 and propagates to every recorded input.
  void backward(const Var<T>& out) {
    if (!out || out->value.size() != 1)
      throw InvalidArgument("backward: target is not a scalar");
    if (out->requires_grad) out->grad.at(0) += T(1);
    for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)();
  }

  std::size_t node_count() const { return back_.size(); }
  void clear() { back_.clear(); }

 private:
  std::vector<std::function<void()>> back_;
};

namespace ops {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

template <typename T>
ECMap<T> cmap(const Tensor<T>& t) {
  return ECMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
EMap<T> map(Tensor<T>& t) {
  return EMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

template <typename T>
bool track(Tape<T>* tape, std::initializer_list<Var<T>> inputs) {
  if (!tape) return false;
  for (const auto& v : inputs)
    if (v->requires_grad) return true;
  return false;
}

template <typename T>
Var<T> make_out(Tensor<T> value, bool rg) {
  return make_var<T>(std::move(value), rg);
}

// C = A * B
template <typename T>
Var<T> matmul(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
  check(a->value.cols() == b->value.rows(),
        "matmul: inner dims differ " + a->value.shape_str() + " vs " +
            b->value.shape_str());
  Tensor<T> out({a->value.rows(), b->value.cols()});
  map(out) = cmap(a->value) * cmap(b->value);
  bool rg = track(tape, {a, b});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, b, o] {
      if (a->requires_grad)
        map(a->grad) += cmap(o->grad) * cmap(b->value).transpose();
      if (b->requires_grad)
        map(b->grad) += cmap(a->value).transpose() * cmap(o->grad);
    });
  return o;
}

// C = A * B^T
template <typename T>
Var<T> matmul_nt(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
  check(a->value.cols() == b->value.cols(),
        "matmul_nt: inner dims differ " + a->value.shape_str() + " vs " +
            b->value.shape_str());
  Tensor<T> out({a->value.rows(), b->value.rows()});
  map(out) = cmap(a->value) * cmap(b->value).transpose();
  bool rg = track(tape, {a, b});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, b, o] {
      if (a->requires_grad) map(a->grad) += cmap(o->grad) * cmap(b->value);
      if (b->requires_grad)
        map(b->grad) += cmap(o->grad).transpose() * cmap(a->value);
    });
  return o;
}

template <typename T>
Var<T> add(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
  check(a->value.same_shape(b->value), "add: shape mismatch " +
                                           a->value.shape_str() + " vs " +
                                           b->value.shape_str());
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.at(i) = a->value.at(i) + b->value.at(i);
  bool rg = track(tape, {a, b});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, b, o] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        if (a->requires_grad) a->grad.at(i) += o->grad.at(i);
        if (b->requires_grad) b->grad.at(i) += o->grad.at(i);
      }
    });
  return o;
}

// a[m x n] + bias[n] broadcast over rows
template <typename T>
Var<T> add_rowwise(Tape<T>* tape, const Var<T>& a, const Var<T>& bias) {
  check(bias->value.rank() == 1 && bias->value.cols() == a->value.cols(),
        "add_rowwise: bias " + bias->value.shape_str() + " vs " +
            a->value.shape_str());
  Tensor<T> out(a->value.shape());
  std::size_t m = a->value.rows(), n = a->value.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.at2(r, c) = a->value.at2(r, c) + bias->value.at(c);
  bool rg = track(tape, {a, bias});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, bias, o, m, n] {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          if (a->requires_grad) a->grad.at2(r, c) += o->grad.at2(r, c);
          if (bias->requires_grad) bias->grad.at(c) += o->grad.at2(r, c);
        }
    });
  return o;
}

template <typename T>
Var<T> scale(Tape<T>* tape, const Var<T>& a, T c) {
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = a->value.at(i) * c;
  bool rg = track(tape, {a});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, o, c] {
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        a->grad.at(i) += o->grad.at(i) * c;
    });
  return o;
}

// Hadamard product
template <typename T>
Var<T> mul(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
  check(a->value.same_shape(b->value), "mul: shape mismatch " +
                                           a->value.shape_str() + " vs " +
                                           b->value.shape_str());
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.at(i) = a->value.at(i) * b->value.at(i);
  bool rg = track(tape, {a, b});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([a, b, o] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        if (a->requires_grad) a->grad.at(i) += o->grad.at(i) * b->value.at(i);
        if (b->requires_grad) b->grad.at(i) += o->grad.at(i) * a->value.at(i);
      }
    });
  return o;
}

// Gathers rows of an embedding table: out[t] = table[ids[t]].
template <typename T>
Var<T> embedding_rows(Tape<T>* tape, const Var<T>& table,
                      std::span<const int> ids) {
  check(table->value.rank() == 2, "embedding_rows: table must be 2-D");
  std::size_t v = table->value.rows(), d = table->value.cols();
  for (int id : ids)
    check(id >= 0 && static_cast<std::size_t>(id) < v,
          "embedding_rows: id out of range");
  Tensor<T> out({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::size_t c = 0; c < d; ++c)
      out.at2(t, c) = table->value.at2(static_cast<std::size_t>(ids[t]), c);
  bool rg = track(tape, {table});
  Var<T> o = make_out(std::move(out), rg);
  if (rg) {
    std::vector<int> idv(ids.begin(), ids.end());
    tape->record([table, o, idv, d] {
      for (std::size_t t = 0; t < idv.size(); ++t)
        for (std::size_t c = 0; c < d; ++c)
          table->grad.at2(static_cast<std::size_t>(idv[t]), c) +=
              o->grad.at2(t, c);
    });
  }
  return o;
}

// Row-wise layer normalization with learned gain and bias.
template <typename T>
Var<T> layer_norm(Tape<T>* tape, const Var<T>& x, const Var<T>& gain,
                  const Var<T>& bias, T eps = T(1e-5)) {
  std::size_t m = x->value.rows(), n = x->value.cols();
  check(gain->value.size() == n && bias->value.size() == n,
        "layer_norm: gain/bias size mismatch with " + x->value.shape_str());
  Tensor<T> out({m, n});
  Tensor<T> xhat({m, n});
  std::vector<T> inv_sigma(m);
  for (std::size_t r = 0; r < m; ++r) {
    T mean = 0;
    for (std::size_t c = 0; c < n; ++c) mean += x->value.at2(r, c);
    mean /= T(n);
    T var = 0;
    for (std::size_t c = 0; c < n; ++c) {
      T d = x->value.at2(r, c) - mean;
      var += d * d;
    }
    var /= T(n);
    T is = T(1) / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      T h = (x->value.at2(r, c) - mean) * is;
      xhat.at2(r, c) = h;
      out.at2(r, c) = h * gain->value.at(c) + bias->value.at(c);
    }
  }
  bool rg = track(tape, {x, gain, bias});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, gain, bias, o, xhat, inv_sigma, m, n] {
      for (std::size_t r = 0; r < m; ++r) {
        T sum_dh = 0, sum_dh_h = 0;
        for (std::size_t c = 0; c < n; ++c) {
          T dh = o->grad.at2(r, c) * gain->value.at(c);
          sum_dh += dh;
          sum_dh_h += dh * xhat.at2(r, c);
        }
        for (std::size_t c = 0; c < n; ++c) {
          T g = o->grad.at2(r, c);
          if (gain->requires_grad) gain->grad.at(c) += g * xhat.at2(r, c);
          if (bias->requires_grad) bias->grad.at(c) += g;
          if (x->requires_grad) {
            T dh = g * gain->value.at(c);
            x->grad.at2(r, c) +=
                inv_sigma[r] *
                (dh - sum_dh / T(n) - xhat.at2(r, c) * sum_dh_h / T(n));
          }
        }
      }
    });
  return o;
}

// tanh-approximation GELU, as used by the GPT-2 family.
template <typename T>
Var<T> gelu(Tape<T>* tape, const Var<T>& x) {
  const T k = T(0.7978845608028654);  // sqrt(2/pi)
  const T c3 = T(0.044715);
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v = x->value.at(i);
    out.at(i) = T(0.5) * v * (T(1) + std::tanh(k * (v + c3 * v * v * v)));
  }
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, k, c3] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        T v = x->value.at(i);
        T t = std::tanh(k * (v + c3 * v * v * v));
        T d = T(0.5) * (T(1) + t) +
              T(0.5) * v * (T(1) - t * t) * k * (T(1) + T(3) * c3 * v * v);
        x->grad.at(i) += o->grad.at(i) * d;
      }
    });
  return o;
}

template <typename T>
Var<T> softmax_rows(Tape<T>* tape, const Var<T>& x) {
  std::size_t m = x->value.rows(), n = x->value.cols();
  Tensor<T> out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    T mx = x->value.at2(r, 0);
    for (std::size_t c = 1; c < n; ++c)
      mx = std::max(mx, x->value.at2(r, c));
    T sum = 0;
    for (std::size_t c = 0; c < n; ++c) {
      T e = std::exp(x->value.at2(r, c) - mx);
      out.at2(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < n; ++c) out.at2(r, c) /= sum;
  }
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, m, n] {
      for (std::size_t r = 0; r < m; ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < n; ++c)
          dot += o->grad.at2(r, c) * o->value.at2(r, c);
        for (std::size_t c = 0; c < n; ++c)
          x->grad.at2(r, c) +=
              o->value.at2(r, c) * (o->grad.at2(r, c) - dot);
      }
    });
  return o;
}

// Large negative stand-in for -inf; keeps softmax well-defined while
// matching masked behavior to well under 1e-6.
template <typename T>
constexpr T kMaskedLogit = T(-1e9);

// Replaces entries above the diagonal (j > i) with kMaskedLogit.
template <typename T>
Var<T> causal_masked_fill(Tape<T>* tape, const Var<T>& x) {
  std::size_t m = x->value.rows(), n = x->value.cols();
  Tensor<T> out({m, n});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.at2(r, c) = c > r ? kMaskedLogit<T> : x->value.at2(r, c);
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, m, n] {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c <= r && c < n; ++c)
          x->grad.at2(r, c) += o->grad.at2(r, c);
    });
  return o;
}

// Inverted dropout; identity when not training or p == 0.
template <typename T>
Var<T> dropout(Tape<T>* tape, const Var<T>& x, double p, Rng* rng,
               bool training) {
  if (!training || p <= 0.0) return x;
  check(p < 1.0, "dropout: p must be < 1");
  check(rng != nullptr, "dropout: rng required in training mode");
  T inv_keep = T(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x->value.size());
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    T m = rng->uniform01() < p ? T(0) : inv_keep;
    (*mask)[i] = m;
    out.at(i) = x->value.at(i) * m;
  }
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, mask] {
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad.at(i) += o->grad.at(i) * (*mask)[i];
    });
  return o;
}

template <typename T>
Var<T> sigmoid(Tape<T>* tape, const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v = x->value.at(i);
    out.at(i) = v >= 0 ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        T y = o->value.at(i);
        x->grad.at(i) += o->grad.at(i) * y * (T(1) - y);
      }
    });
  return o;
}

template <typename T>
Var<T> tanh_op(Tape<T>* tape, const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.at(i) = std::tanh(x->value.at(i));
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        T y = o->value.at(i);
        x->grad.at(i) += o->grad.at(i) * (T(1) - y * y);
      }
    });
  return o;
}

// Weighted sum of per-row cross entropies: sum_i w_i * (lse(z_i) - z_i[y_i]).
// Divide by the weight total outside (scale) to get a mean.
template <typename T>
Var<T> cross_entropy_sum(Tape<T>* tape, const Var<T>& logits,
                         std::span<const int> targets,
                         std::type_identity_t<std::span<const T>> weights) {
  std::size_t m = logits->value.rows(), n = logits->value.cols();
  check(targets.size() == m && weights.size() == m,
        "cross_entropy_sum: targets/weights length mismatch with " +
            logits->value.shape_str());
  for (int y : targets)
    check(y >= 0 && static_cast<std::size_t>(y) < n,
          "cross_entropy_sum: target out of range");
  T total = 0;
  std::vector<T> lse(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (weights[r] == T(0)) continue;
    T mx = logits->value.at2(r, 0);
    for (std::size_t c = 1; c < n; ++c)
      mx = std::max(mx, logits->value.at2(r, c));
    T s = 0;
    for (std::size_t c = 0; c < n; ++c)
      s += std::exp(logits->value.at2(r, c) - mx);
    lse[r] = mx + std::log(s);
    total += weights[r] *
             (lse[r] - logits->value.at2(r, static_cast<std::size_t>(targets[r])));
  }
  bool rg = track(tape, {logits});
  Var<T> o = make_out(Tensor<T>::scalar(total), rg);
  if (rg) {
    std::vector<int> tv(targets.begin(), targets.end());
    std::vector<T> wv(weights.begin(), weights.end());
    tape->record([logits, o, tv, wv, lse, m, n] {
      T g = o->grad.at(0);
      for (std::size_t r = 0; r < m; ++r) {
        if (wv[r] == T(0)) continue;
        for (std::size_t c = 0; c < n; ++c) {
          T p = std::exp(logits->value.at2(r, c) - lse[r]);
          T onehot = (static_cast<std::size_t>(tv[r]) == c) ? T(1) : T(0);
          logits->grad.at2(r, c) += g * wv[r] * (p - onehot);
        }
      }
    });
  }
  return o;
}

// Weighted sum of squared errors against a constant target.
template <typename T>
Var<T> mse_sum(Tape<T>* tape, const Var<T>& pred, const Tensor<T>& target,
               std::type_identity_t<std::span<const T>> weights) {
  check(pred->value.size() == target.size() &&
            weights.size() == pred->value.size(),
        "mse_sum: size mismatch");
  T total = 0;
  for (std::size_t i = 0; i < pred->value.size(); ++i) {
    T d = pred->value.at(i) - target.at(i);
    total += weights[i] * d * d;
  }
  bool rg = track(tape, {pred});
  Var<T> o = make_out(Tensor<T>::scalar(total), rg);
  if (rg) {
    std::vector<T> wv(weights.begin(), weights.end());
    auto tgt = std::make_shared<Tensor<T>>(target);
    tape->record([pred, o, wv, tgt] {
      T g = o->grad.at(0);
      for (std::size_t i = 0; i < pred->value.size(); ++i)
        pred->grad.at(i) +=
            g * wv[i] * T(2) * (pred->value.at(i) - tgt->at(i));
    });
  }
  return o;
}

template <typename T>
Var<T> slice_rows(Tape<T>* tape, const Var<T>& x, std::size_t r0,
                  std::size_t nrows) {
  std::size_t m = x->value.rows(), n = x->value.cols();
  check(r0 + nrows <= m, "slice_rows: out of range");
  Tensor<T> out({nrows, n});
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.at2(r, c) = x->value.at2(r0 + r, c);
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, r0, nrows, n] {
      for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t c = 0; c < n; ++c)
          x->grad.at2(r0 + r, c) += o->grad.at2(r, c);
    });
  return o;
}

template <typename T>
Var<T> slice_cols(Tape<T>* tape, const Var<T>& x, std::size_t c0,
                  std::size_t ncols) {
  std::size_t m = x->value.rows(), n = x->value.cols();
  check(c0 + ncols <= n, "slice_cols: out of range");
  Tensor<T> out({m, ncols});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < ncols; ++c)
      out.at2(r, c) = x->value.at2(r, c0 + c);
  bool rg = track(tape, {x});
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([x, o, c0, ncols, m] {
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < ncols; ++c)
          x->grad.at2(r, c0 + c) += o->grad.at2(r, c);
    });
  return o;
}

template <typename T>
Var<T> concat_cols(Tape<T>* tape, const std::vector<Var<T>>& parts) {
  check(!parts.empty(), "concat_cols: empty input");
  std::size_t m = parts[0]->value.rows(), n = 0;
  for (const auto& p : parts) {
    check(p->value.rows() == m, "concat_cols: row mismatch");
    n += p->value.cols();
  }
  Tensor<T> out({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < p->value.cols(); ++c)
        out.at2(r, off + c) = p->value.at2(r, c);
    off += p->value.cols();
  }
  bool rg = false;
  if (tape)
    for (const auto& p : parts) rg = rg || p->requires_grad;
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([parts, o, m] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad)
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < p->value.cols(); ++c)
              p->grad.at2(r, c) += o->grad.at2(r, off + c);
        off += p->value.cols();
      }
    });
  return o;
}

template <typename T>
Var<T> concat_rows(Tape<T>* tape, const std::vector<Var<T>>& parts) {
  check(!parts.empty(), "concat_rows: empty input");
  std::size_t n = parts[0]->value.cols(), m = 0;
  for (const auto& p : parts) {
    check(p->value.cols() == n, "concat_rows: col mismatch");
    m += p->value.rows();
  }
  Tensor<T> out({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < p->value.rows(); ++r)
      for (std::size_t c = 0; c < n; ++c)
        out.at2(off + r, c) = p->value.at2(r, c);
    off += p->value.rows();
  }
  bool rg = false;
  if (tape)
    for (const auto& p : parts) rg = rg || p->requires_grad;
  Var<T> o = make_out(std::move(out), rg);
  if (rg)
    tape->record([parts, o, n] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad)
          for (std::size_t r = 0; r < p->value.rows(); ++r)
            for (std::size_t c = 0; c < n; ++c)
              p->grad.at2(r, c) += o->grad.at2(off + r, c);
        off += p->value.rows();
      }
    });
  return o;
}

// Picks a single entry as a scalar.
template <typename T>
Var<T> select_entry(Tape<T>* tape, const Var<T>& x, std::size_t r,
                    std::size_t c) {
  check(r < x->value.rows() && c < x->value.cols(),
        "select_entry: index out of range");
  bool rg = track(tape, {x});
  Var<T> o = make_out(Tensor<T>::scalar(x->value.at2(r, c)), rg);
  if (rg)
    tape->record([x, o, r, c] { x->grad.at2(r, c) += o->grad.at(0); });
  return o;
}

template <typename T>
Var<T> add_scalars(Tape<T>* tape, const std::vector<Var<T>>& xs) {
  check(!xs.empty(), "add_scalars: empty input");
  Var<T> acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(tape, acc, xs[i]);
  return acc;
}

}  // namespace ops
}  // namespace ttlab
