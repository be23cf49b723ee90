#pragma once

// Why did the model call a turn shift here? Two lenses: attention mass
// aggregated over the five most recent turns, and integrated gradients
// from an unk-word baseline to the actual input.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "bpe.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "transformer.hpp"

namespace ttlab {

enum class AttributionKind { kAttention, kIg };

// Five slots, current turn first, then one step back per slot. Attention
// values are non-negative and renormalized to sum 1; integrated-gradient
// values keep their sign and scale.
struct TurnAttribution {
  std::array<double, 5> values{};
  std::string dialog_id;
  std::size_t position = 0;
  AttributionKind kind = AttributionKind::kAttention;
  bool padded = false;  // fewer than five turns were available
};

enum class IgBaseline { kUnk, kZero };
enum class IgTargetKind { kTrpProb, kTrpLogit };
enum class IgQuadrature { kTrapezoid, kLeft };

struct IgConfig {
  std::size_t steps = 128;  // quadrature nodes
  IgBaseline baseline = IgBaseline::kUnk;
  IgTargetKind target = IgTargetKind::kTrpProb;
  IgQuadrature quadrature = IgQuadrature::kTrapezoid;

  void validate() const {
    if (steps < 2) throw InvalidArgument("ig config: steps must be >= 2");
  }
};

struct IgTarget {
  std::size_t dialog_index = 0;
  std::string dialog_id;
  std::size_t position = 0;
  double trp = 0;
};

// True shift positions whose model TRP exceeds trp_min, sampled to at
// most n_dialogs dialogs and per_dialog targets each, deterministically
// under seed.
std::vector<IgTarget> select_targets(const TransformerLM<double>& model,
                                     const std::vector<Dialog>& dialogs,
                                     const Vocab& vocab, double trp_min,
                                     std::size_t n_dialogs,
                                     std::size_t per_dialog,
                                     std::uint64_t seed);

// Attention row of each target position, averaged over heads and either
// all layers (layer < 0) or one chosen layer, then summed per turn over
// the five most recent turns and renormalized. Mass on older turns is
// dropped before renormalizing.
std::vector<TurnAttribution> aggregate_attention(
    const TransformerLM<double>& model, const std::vector<Dialog>& dialogs,
    const Vocab& vocab, const std::vector<IgTarget>& targets, int layer = -1);

struct IgResult {
  std::vector<double> token_values;  // one per input position
  double f_input = 0;
  double f_baseline = 0;
  double residual = 0;  // |sum(values) - (f_input - f_baseline)|
};

// Path integral of dF/dx from baseline to input, attributed per row.
// F receives the interpolated input as a differentiable variable and must
// return a scalar. Exact for linear F under either quadrature.
IgResult integrate_gradients_fn(
    const Tensor<double>& input, const Tensor<double>& baseline,
    const IgConfig& cfg,
    const std::function<Var<double>(Tape<double>*, const Var<double>&)>& f);

struct IgAttribution {
  std::vector<double> token_values;
  TurnAttribution turn;
  double f_input = 0;
  double f_baseline = 0;
  double residual = 0;
};

// Integrated gradients for one selected target. The baseline replaces
// every word embedding with the unk row (or zeros); speaker-token rows,
// position embeddings and speaker embeddings stay fixed on the path. The
// scalar is the TRP probability (or pre-softmax logit) of the speaker
// token the model favors at the target position; exact ties resolve to
// the first speaker.
IgAttribution integrated_gradients(const TransformerLM<double>& model,
                                   const Vocab& vocab, const Dialog& dialog,
                                   std::size_t position, const IgConfig& cfg);

}  // namespace ttlab
