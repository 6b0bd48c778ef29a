#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "mrforest/instance.hpp"

namespace mrf {

struct InferenceResult {
  /// A(o) without clamping, A(v, o) when visible nodes are clamped. For
  /// max-product engines: the score of the MAP assignment. For loopy sum-BP:
  /// the Bethe estimate.
  double log_partition = 0.0;
  std::vector<std::vector<double>> node_marginals;  // [v][s]
  /// [e][s_a * S_b + s_b]; empty for edges outside the engine's structure.
  std::vector<std::vector<double>> edge_marginals;
  std::optional<std::vector<State>> map_assignment;
  bool converged = true;
  int rounds = 0;
};

enum class BpMode { sum, max };

struct LoopyBpOptions {
  BpMode mode = BpMode::sum;
  double rate = 1e-4;   // stop once the largest message change is below this
  int max_rounds = 100;
};

inline constexpr double kBruteForceLimit = 1e6;
inline constexpr double kMegaStateLimit = 1e4;

// Engines on precomputed potentials. `clamp` fixes visible nodes; the tree
// engines only use potentials of `tree_edges` and the nodes.

InferenceResult tree_sum_product(const MarkovNetwork& net, std::span<const EdgeId> tree_edges,
                                 const Potentials& pot, const Clamp& clamp, NodeId root = 0);

/// Ties resolve to the lowest state index.
InferenceResult tree_max_product(const MarkovNetwork& net, std::span<const EdgeId> tree_edges,
                                 const Potentials& pot, const Clamp& clamp, NodeId root = 0);

/// Synchronous (flooding) schedule, no damping, log-space messages.
InferenceResult loopy_bp(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp,
                         const LoopyBpOptions& options = {});

/// Forward-backward over per-slice mega-states of a grid network. With
/// `max_product` the result carries the exact MAP assignment instead of
/// marginals.
InferenceResult exact_collapsed_chain(const MarkovNetwork& net, const Potentials& pot,
                                      const Clamp& clamp, bool max_product = false);

/// Full enumeration over free nodes; also returns the MAP assignment.
InferenceResult brute_force(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp);

// Convenience forms evaluating potentials from a template and an instance.

InferenceResult tree_sum_product(const MarkovNetwork& net, const SpanningTree& tree,
                                 const FeatureTemplate& tmpl, const Instance& inst,
                                 ClampMode clamp);
InferenceResult tree_max_product(const MarkovNetwork& net, const SpanningTree& tree,
                                 const FeatureTemplate& tmpl, const Instance& inst,
                                 ClampMode clamp);
InferenceResult loopy_bp(const MarkovNetwork& net, const ParameterVector& params,
                         const FeatureTemplate& tmpl, const Instance& inst, ClampMode clamp,
                         const LoopyBpOptions& options = {});
InferenceResult exact_collapsed_chain(const MarkovNetwork& net, const ParameterVector& params,
                                      const FeatureTemplate& tmpl, const Instance& inst,
                                      ClampMode clamp);
InferenceResult brute_force(const MarkovNetwork& net, const ParameterVector& params,
                            const FeatureTemplate& tmpl, const Instance& inst, ClampMode clamp);

/// Sum of clique log-potentials for a full assignment.
double assignment_score(const MarkovNetwork& net, const Potentials& pot,
                        std::span<const State> assignment);

}  // namespace mrf
