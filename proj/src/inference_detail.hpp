#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mrforest/error.hpp"
#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "mrforest/instance.hpp"

namespace mrf::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Allowed states per node under a clamp.
inline std::vector<std::vector<State>> domains(const MarkovNetwork& net, const Clamp& clamp) {
  if (static_cast<int>(clamp.size()) != net.num_nodes()) {
    fail(ErrorCode::invalid_argument, "clamp size does not match network");
  }
  std::vector<std::vector<State>> dom(net.num_nodes());
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (clamp[v] == kFree) {
      dom[v].resize(net.state_size(v));
      for (int s = 0; s < net.state_size(v); ++s) dom[v][s] = s;
    } else {
      if (clamp[v] < 0 || clamp[v] >= net.state_size(v)) {
        fail(ErrorCode::invalid_argument, "clamped state out of range");
      }
      dom[v] = {clamp[v]};
    }
  }
  return dom;
}

/// Log-potential of edge e with node `u` in state su and the other endpoint in
/// state sv.
inline double edge_pot(const MarkovNetwork& net, const Potentials& pot, EdgeId e, NodeId u,
                       State su, State sv) {
  const Edge& edge = net.edge(e);
  const int sb = net.state_size(edge.b);
  return u == edge.a ? pot.edge[e][su * sb + sv] : pot.edge[e][sv * sb + su];
}

inline void check_potentials(const MarkovNetwork& net, const Potentials& pot) {
  if (static_cast<int>(pot.node.size()) != net.num_nodes() ||
      static_cast<int>(pot.edge.size()) != net.num_edges()) {
    fail(ErrorCode::invalid_argument, "potentials do not match network");
  }
}

inline std::vector<std::vector<double>> zero_node_table(const MarkovNetwork& net) {
  std::vector<std::vector<double>> t(net.num_nodes());
  for (int v = 0; v < net.num_nodes(); ++v) t[v].assign(net.state_size(v), 0.0);
  return t;
}

}  // namespace mrf::detail
