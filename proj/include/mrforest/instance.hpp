#pragma once

#include <optional>
#include <vector>

#include "mrforest/graph.hpp"

namespace mrf {

/// Visible(state) when engaged, Hidden otherwise.
using LabelSlot = std::optional<State>;

struct Instance {
  std::vector<std::vector<double>> observations;  // one vector per slice
  std::vector<LabelSlot> labels;                  // one slot per node
  double weight = 1.0;                            // boosting data weight
};

/// Per-node state restriction used by every inference engine: a clamped node
/// takes exactly one state, a free node ranges over its whole domain.
using Clamp = std::vector<State>;
inline constexpr State kFree = -1;

enum class ClampMode { none, visible };

Clamp free_clamp(const MarkovNetwork& net);
Clamp visible_clamp(const MarkovNetwork& net, const Instance& inst);
Clamp make_clamp(const MarkovNetwork& net, const Instance& inst, ClampMode mode);

/// Instance with every node hidden; labels sized to the network.
Instance unlabelled_instance(const MarkovNetwork& net,
                             std::vector<std::vector<double>> observations = {});

/// Throws invalid_argument on out-of-range visible states, label-count
/// mismatch or negative weight.
void validate_instance(const MarkovNetwork& net, const Instance& inst);

bool has_visible_label(const Instance& inst);

}  // namespace mrf
