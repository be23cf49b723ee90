#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adamw.hpp"
#include "autodiff.hpp"

namespace ttlab {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double h = 1e-4;
  // Check every `stride`-th entry of each parameter; 1 checks all of them.
  std::size_t stride = 1;
};

// Compares reverse-mode gradients against central finite differences at
// 64-bit precision. `loss_fn` must rebuild the graph from the given
// parameter nodes on every call and be deterministic (no dropout).
// Relative error per entry: |a - n| / max(|a|, |n|, 1e-3).
inline GradCheckReport grad_check(
    std::vector<ParamRef<double>>& params,
    const std::function<Var<double>(Tape<double>*)>& loss_fn,
    GradCheckOptions opt = {}) {
  zero_grads(params);
  Tape<double> tape;
  Var<double> loss = loss_fn(&tape);
  tape.backward(loss);

  GradCheckReport rep;
  for (auto& p : params) {
    Tensor<double>& val = p.var->value;
    for (std::size_t i = 0; i < val.size(); i += opt.stride) {
      double keep = val.at(i);
      val.at(i) = keep + opt.h;
      double lp = loss_fn(nullptr)->value.at(0);
      val.at(i) = keep - opt.h;
      double lm = loss_fn(nullptr)->value.at(0);
      val.at(i) = keep;
      double numeric = (lp - lm) / (2.0 * opt.h);
      double analytic = p.var->grad.at(i);
      double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      double rel = std::abs(analytic - numeric) / denom;
      ++rep.n_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace ttlab
