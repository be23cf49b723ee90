#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "error.hpp"
#include "tensor.hpp"

namespace ttlab {

// Named trainable parameter. `decay` marks whether weight decay applies;
// matrices decay, vectors (biases, norm gains) do not.
template <typename T>
struct ParamRef {
  std::string name;
  Var<T> var;
  bool decay = true;
};

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params) {
  for (auto& p : params) p.var->grad.fill(T(0));
}

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<ParamRef<T>>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    const Tensor<T>& g = p.var->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = static_cast<double>(g.at(i));
      sq += v * v;
    }
  }
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw NumericError("clip_global_norm: non-finite gradient norm");
  if (norm > max_norm && norm > 0) {
    T s = T(max_norm / norm);
    for (auto& p : params)
      for (std::size_t i = 0; i < p.var->grad.size(); ++i)
        p.var->grad.at(i) *= s;
  }
  return norm;
}

struct AdamWConfig {
  double lr = 6.25e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay: the decay term multiplies the parameter
// directly and never enters the moment estimates.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(std::vector<ParamRef<T>>& params) {
    if (slots_.empty()) {
      slots_.reserve(params.size());
      for (const auto& p : params)
        slots_.push_back({Tensor<T>(p.var->value.shape()),
                          Tensor<T>(p.var->value.shape())});
    }
    if (slots_.size() != params.size())
      throw StateError("AdamW: parameter set changed between steps");
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      Tensor<T>& val = p.var->value;
      const Tensor<T>& g = p.var->grad;
      if (!g.all_finite())
        throw NumericError("AdamW: non-finite gradient in " + p.name);
      Tensor<T>& m = slots_[k].m;
      Tensor<T>& v = slots_[k].v;
      for (std::size_t i = 0; i < val.size(); ++i) {
        double gi = static_cast<double>(g.at(i));
        double mi = cfg_.beta1 * static_cast<double>(m.at(i)) +
                    (1.0 - cfg_.beta1) * gi;
        double vi = cfg_.beta2 * static_cast<double>(v.at(i)) +
                    (1.0 - cfg_.beta2) * gi * gi;
        m.at(i) = T(mi);
        v.at(i) = T(vi);
        double mh = mi / bc1;
        double vh = vi / bc2;
        double upd = cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        double x = static_cast<double>(val.at(i)) - upd;
        if (p.decay && cfg_.weight_decay > 0)
          x -= cfg_.lr * cfg_.weight_decay * static_cast<double>(val.at(i));
        val.at(i) = T(x);
      }
    }
  }

  std::uint64_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor<T> m, v;
  };
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t t_ = 0;
};

}  // namespace ttlab
