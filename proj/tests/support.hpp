#pragma once

// Shared fixtures for the test binaries: random networks and an enumeration
// oracle written independently of the library engines.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "mrforest/inference.hpp"
#include "mrforest/instance.hpp"

namespace mrf::test {

struct Enumeration {
  double log_z = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> node;  // [v][s]
  std::vector<std::vector<double>> edge;  // [e][sa * Sb + sb]
  std::vector<State> argmax;
  double max_score = -std::numeric_limits<double>::infinity();
};

inline double score_of(const MarkovNetwork& net, const Potentials& pot, const std::vector<State>& x) {
  double s = 0.0;
  for (int v = 0; v < net.num_nodes(); ++v) s += pot.node[v][x[v]];
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edge(e);
    s += pot.edge[e][x[ed.a] * net.state_size(ed.b) + x[ed.b]];
  }
  return s;
}

/// Visits every assignment consistent with `clamp` in lexicographic order.
template <class Fn>
void for_each_assignment(const MarkovNetwork& net, const Clamp& clamp, Fn&& fn) {
  const int n = net.num_nodes();
  std::vector<State> x(n, 0);
  for (int v = 0; v < n; ++v) x[v] = clamp[v] == kFree ? 0 : clamp[v];
  while (true) {
    fn(x);
    int v = n - 1;
    for (; v >= 0; --v) {
      if (clamp[v] != kFree) continue;
      if (++x[v] < net.state_size(v)) break;
      x[v] = 0;
    }
    if (v < 0) return;
  }
}

inline Enumeration enumerate(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp) {
  Enumeration out;
  std::vector<std::vector<State>> all;
  std::vector<double> scores;
  for_each_assignment(net, clamp, [&](const std::vector<State>& x) {
    all.push_back(x);
    scores.push_back(score_of(net, pot, x));
  });
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  out.log_z = m + std::log(z);
  out.node.assign(net.num_nodes(), {});
  for (int v = 0; v < net.num_nodes(); ++v) out.node[v].assign(net.state_size(v), 0.0);
  out.edge.assign(net.num_edges(), {});
  for (int e = 0; e < net.num_edges(); ++e) {
    out.edge[e].assign(net.state_size(net.edge(e).a) * net.state_size(net.edge(e).b), 0.0);
  }
  for (std::size_t k = 0; k < all.size(); ++k) {
    const double p = std::exp(scores[k] - out.log_z);
    const auto& x = all[k];
    for (int v = 0; v < net.num_nodes(); ++v) out.node[v][x[v]] += p;
    for (int e = 0; e < net.num_edges(); ++e) {
      const Edge& ed = net.edge(e);
      out.edge[e][x[ed.a] * net.state_size(ed.b) + x[ed.b]] += p;
    }
    if (scores[k] > out.max_score) {
      out.max_score = scores[k];
      out.argmax = x;
    }
  }
  return out;
}

/// Random tree on n nodes: node i > 0 attaches to a uniform earlier node.
inline MarkovNetwork random_tree(std::mt19937_64& rng, int n, int max_states) {
  std::uniform_int_distribution<int> states(1, max_states);
  std::vector<int> sizes(n);
  for (int& s : sizes) s = states(rng);
  sizes[0] = std::max(sizes[0], 2);
  std::vector<Edge> edges;
  for (int i = 1; i < n; ++i) {
    const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
    edges.push_back({p, i});
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  return MarkovNetwork(sizes, edges);
}

inline MarkovNetwork random_grid(std::mt19937_64& rng, int max_slices, int max_states) {
  const int T = std::uniform_int_distribution<int>(1, max_slices)(rng);
  std::uniform_int_distribution<int> states(2, max_states);
  return build_network(2, T, {states(rng), states(rng)});
}

inline ParameterVector random_params(std::mt19937_64& rng, int dim, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ParameterVector w(dim);
  for (int k = 0; k < dim; ++k) w[k] = u(rng);
  return w;
}

inline std::vector<EdgeId> all_edges(const MarkovNetwork& net) {
  std::vector<EdgeId> e(net.num_edges());
  for (int k = 0; k < net.num_edges(); ++k) e[k] = k;
  return e;
}

/// Clamps each node with probability p to a uniform state.
inline Clamp random_clamp(std::mt19937_64& rng, const MarkovNetwork& net, double p) {
  Clamp c(net.num_nodes(), kFree);
  std::bernoulli_distribution hide(p);
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (hide(rng)) c[v] = std::uniform_int_distribution<int>(0, net.state_size(v) - 1)(rng);
  }
  return c;
}

/// Random observations and labels for an IndicatorTemplate with `obs_dim`.
inline Instance random_instance(std::mt19937_64& rng, const MarkovNetwork& net, int obs_dim,
                                double visible_p) {
  Instance inst;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int v = 0; v < net.num_nodes(); ++v) {
    std::vector<double> o(obs_dim);
    for (double& x : o) x = g(rng);
    inst.observations.push_back(std::move(o));
  }
  const Clamp c = random_clamp(rng, net, visible_p);
  inst.labels.resize(net.num_nodes());
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (c[v] != kFree) inst.labels[v] = c[v];
  }
  return inst;
}

inline double max_abs_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].empty()) continue;
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  }
  return d;
}

}  // namespace mrf::test
