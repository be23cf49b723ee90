#include "sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ttlab {

std::vector<double> nucleus_filter(const std::vector<double>& probs, double p,
                                   bool inclusive) {
  if (probs.empty())
    throw InvalidArgument("nucleus_filter: empty distribution");
  if (!(p > 0.0) || p > 1.0)
    throw InvalidArgument("nucleus_filter: p out of (0, 1]");
  double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-6)
    throw InvalidArgument("nucleus_filter: input sums to " +
                          std::to_string(sum) + ", not 1");
  for (double v : probs)
    if (v < 0.0) throw InvalidArgument("nucleus_filter: negative probability");

  std::vector<std::size_t> order;
  order.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs[a] != probs[b] ? probs[a] > probs[b] : a < b;
  });

  std::vector<double> out(probs.size(), 0.0);
  double cum = 0.0, kept = 0.0;
  std::size_t taken = 0;
  for (std::size_t id : order) {
    if (taken >= 1 && p < 1.0) {  // p=1 keeps the whole support
      bool take = inclusive ? cum < p : cum + probs[id] <= p;
      if (!take) break;
    }
    out[id] = probs[id];
    kept += probs[id];
    cum += probs[id];
    ++taken;
  }
  for (double& v : out) v /= kept;
  return out;
}

std::size_t sample_token(const std::vector<double>& dist, Rng& rng) {
  if (dist.empty()) throw InvalidArgument("sample_token: empty distribution");
  double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  if (!(total > 0.0))
    throw InvalidArgument("sample_token: distribution has no mass");
  double u = rng.uniform01() * total;
  double cum = 0.0;
  std::size_t last = dist.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    cum += dist[i];
    last = i;
    if (u < cum) return i;
  }
  return last;  // u landed in the rounding tail
}

TurnLengthHistogram project_rollouts(TokenSampler& sampler,
                                     const ProjectConfig& cfg,
                                     const std::string& prefix_id,
                                     bool truncated,
                                     std::vector<std::vector<int>>* keep) {
  cfg.validate();
  VocabSpecial sp;
  TurnLengthHistogram h;
  h.counts.assign(cfg.max_len + 1, 0);
  h.prefix_id = prefix_id;
  h.truncated = truncated;
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Rng rng(Rng::derive(cfg.seed, i));
    std::vector<double> probs = sampler.start();
    std::vector<int> gen;
    for (std::size_t g = 1; g <= cfg.max_len; ++g) {
      std::vector<double> dist =
          nucleus_filter(probs, cfg.nucleus_p, cfg.inclusive);
      int id = static_cast<int>(sample_token(dist, rng));
      if (keep) gen.push_back(id);
      if (id == sp.speaker1_id || id == sp.speaker2_id) {
        ++h.counts[g - 1];  // g-1 tokens preceded the speaker token
        break;
      }
      if (g == cfg.max_len) {
        ++h.counts[cfg.max_len];  // censored: turn still open
        break;
      }
      probs = sampler.step(id);
    }
    if (keep) keep->push_back(std::move(gen));
  }
  return h;
}

}  // namespace ttlab
