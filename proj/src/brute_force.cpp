#include <cmath>

#include "inference_detail.hpp"
#include "mrforest/inference.hpp"

namespace mrf {

InferenceResult brute_force(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp) {
  detail::check_potentials(net, pot);
  const int n = net.num_nodes();
  const auto dom = detail::domains(net, clamp);
  double count = 1.0;
  for (const auto& d : dom) count *= static_cast<double>(d.size());
  if (count > kBruteForceLimit) {
    fail(ErrorCode::capacity_error, "brute_force: more than 1e6 assignments");
  }

  // Odometer over domain positions; node 0 varies fastest.
  std::vector<std::size_t> pos(n, 0);
  std::vector<State> x(n);
  for (int v = 0; v < n; ++v) x[v] = dom[v][0];
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(count));
  double best = detail::kNegInf;
  std::vector<State> best_x;
  for (;;) {
    const double s = assignment_score(net, pot, x);
    scores.push_back(s);
    if (best_x.empty() || s > best) {
      best = s;
      best_x = x;
    }
    int v = 0;
    while (v < n && ++pos[v] == dom[v].size()) {
      pos[v] = 0;
      x[v] = dom[v][0];
      ++v;
    }
    if (v == n) break;
    x[v] = dom[v][pos[v]];
  }

  InferenceResult res;
  res.log_partition = detail::log_sum_exp(scores);
  if (!std::isfinite(res.log_partition)) {
    fail(ErrorCode::numerical_error, "brute_force: non-finite log-partition");
  }
  res.node_marginals = detail::zero_node_table(net);
  res.edge_marginals.resize(net.num_edges());
  for (int e = 0; e < net.num_edges(); ++e) {
    res.edge_marginals[e].assign(
        static_cast<std::size_t>(net.state_size(net.edge(e).a)) * net.state_size(net.edge(e).b), 0.0);
  }
  // Second sweep in the same order to accumulate marginals.
  std::fill(pos.begin(), pos.end(), 0);
  for (int v = 0; v < n; ++v) x[v] = dom[v][0];
  for (std::size_t k = 0;; ++k) {
    const double p = std::exp(scores[k] - res.log_partition);
    for (int v = 0; v < n; ++v) res.node_marginals[v][x[v]] += p;
    for (int e = 0; e < net.num_edges(); ++e) {
      const Edge& edge = net.edge(e);
      res.edge_marginals[e][x[edge.a] * net.state_size(edge.b) + x[edge.b]] += p;
    }
    int v = 0;
    while (v < n && ++pos[v] == dom[v].size()) {
      pos[v] = 0;
      x[v] = dom[v][0];
      ++v;
    }
    if (v == n) break;
    x[v] = dom[v][pos[v]];
  }
  res.map_assignment = std::move(best_x);
  return res;
}

}  // namespace mrf
