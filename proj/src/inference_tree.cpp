#include <algorithm>
#include <cmath>

#include "inference_detail.hpp"
#include "mrforest/inference.hpp"

namespace mrf {

namespace {

using detail::kNegInf;

/// BFS ordering of a spanning tree rooted at `root`.
struct RootedTree {
  std::vector<NodeId> order;          // parents before children
  std::vector<NodeId> parent;         // -1 at the root
  std::vector<EdgeId> parent_edge;    // -1 at the root
  std::vector<std::vector<NodeId>> children;
};

RootedTree root_tree(const MarkovNetwork& net, std::span<const EdgeId> tree_edges, NodeId root) {
  const int n = net.num_nodes();
  if (static_cast<int>(tree_edges.size()) > n - 1) {
    fail(ErrorCode::cycle_detected, "tree engine: edge set contains a cycle");
  }
  if (static_cast<int>(tree_edges.size()) < n - 1) {
    fail(ErrorCode::disconnected, "tree engine: edge set does not span the network");
  }
  if (root < 0 || root >= n) fail(ErrorCode::invalid_argument, "tree engine: bad root");
  std::vector<std::vector<Neighbor>> adj(n);
  for (EdgeId e : tree_edges) {
    if (e < 0 || e >= net.num_edges()) fail(ErrorCode::invalid_argument, "tree engine: bad edge id");
    adj[net.edge(e).a].push_back({net.edge(e).b, e});
    adj[net.edge(e).b].push_back({net.edge(e).a, e});
  }
  RootedTree rt;
  rt.parent.assign(n, -1);
  rt.parent_edge.assign(n, -1);
  rt.children.resize(n);
  rt.order.reserve(n);
  std::vector<char> seen(n, 0);
  rt.order.push_back(root);
  seen[root] = 1;
  for (std::size_t head = 0; head < rt.order.size(); ++head) {
    const NodeId u = rt.order[head];
    for (const auto& nb : adj[u]) {
      if (seen[nb.node]) continue;
      seen[nb.node] = 1;
      rt.parent[nb.node] = u;
      rt.parent_edge[nb.node] = nb.edge;
      rt.children[u].push_back(nb.node);
      rt.order.push_back(nb.node);
    }
  }
  if (static_cast<int>(rt.order.size()) != n) {
    fail(ErrorCode::disconnected, "tree engine: edge set is not connected");
  }
  return rt;
}

}  // namespace

InferenceResult tree_sum_product(const MarkovNetwork& net, std::span<const EdgeId> tree_edges,
                                 const Potentials& pot, const Clamp& clamp, NodeId root) {
  detail::check_potentials(net, pot);
  const int n = net.num_nodes();
  const auto dom = detail::domains(net, clamp);
  const RootedTree rt = root_tree(net, tree_edges, root);

  // up[v]: local potential times messages from v's children (log).
  // msg[v]: message from v to its parent, over the parent's states.
  std::vector<std::vector<double>> up(n), msg(n), down(n);
  for (int v = 0; v < n; ++v) {
    up[v].assign(net.state_size(v), kNegInf);
    for (State s : dom[v]) up[v][s] = pot.node[v][s];
  }
  std::vector<double> scratch;
  for (auto it = rt.order.rbegin(); it != rt.order.rend(); ++it) {
    const NodeId v = *it;
    const NodeId p = rt.parent[v];
    if (p < 0) continue;
    const EdgeId e = rt.parent_edge[v];
    msg[v].assign(net.state_size(p), kNegInf);
    for (State t : dom[p]) {
      scratch.clear();
      for (State s : dom[v]) scratch.push_back(up[v][s] + detail::edge_pot(net, pot, e, v, s, t));
      msg[v][t] = detail::log_sum_exp(scratch);
    }
    for (State t : dom[p]) up[p][t] += msg[v][t];
  }

  InferenceResult res;
  {
    scratch.clear();
    for (State s : dom[root]) scratch.push_back(up[root][s]);
    res.log_partition = detail::log_sum_exp(scratch);
  }
  if (!std::isfinite(res.log_partition)) {
    fail(ErrorCode::numerical_error, "tree_sum_product: non-finite log-partition");
  }
  const double log_z = res.log_partition;

  // down[v]: message from the parent side into v.  belief = up + down.
  res.node_marginals = detail::zero_node_table(net);
  res.edge_marginals.assign(net.num_edges(), {});
  down[root].assign(net.state_size(root), 0.0);
  for (NodeId v : rt.order) {
    const NodeId p = rt.parent[v];
    if (p >= 0) {
      const EdgeId e = rt.parent_edge[v];
      down[v].assign(net.state_size(v), kNegInf);
      // Parent belief excluding v's own message.
      std::vector<double> cavity(net.state_size(p), kNegInf);
      for (State t : dom[p]) cavity[t] = up[p][t] + down[p][t] - msg[v][t];
      for (State s : dom[v]) {
        scratch.clear();
        for (State t : dom[p]) scratch.push_back(cavity[t] + detail::edge_pot(net, pot, e, v, s, t));
        down[v][s] = detail::log_sum_exp(scratch);
      }
      const Edge& edge = net.edge(e);
      const int sb = net.state_size(edge.b);
      auto& em = res.edge_marginals[e];
      em.assign(static_cast<std::size_t>(net.state_size(edge.a)) * sb, 0.0);
      for (State s : dom[v]) {
        for (State t : dom[p]) {
          const double lp = up[v][s] + detail::edge_pot(net, pot, e, v, s, t) + cavity[t] - log_z;
          const std::size_t idx = v == edge.a ? s * sb + t : t * sb + s;
          em[idx] = std::exp(lp);
        }
      }
    }
    for (State s : dom[v]) res.node_marginals[v][s] = std::exp(up[v][s] + down[v][s] - log_z);
  }
  return res;
}

InferenceResult tree_max_product(const MarkovNetwork& net, std::span<const EdgeId> tree_edges,
                                 const Potentials& pot, const Clamp& clamp, NodeId root) {
  detail::check_potentials(net, pot);
  const int n = net.num_nodes();
  const auto dom = detail::domains(net, clamp);
  const RootedTree rt = root_tree(net, tree_edges, root);

  std::vector<std::vector<double>> up(n);
  // best[v][t]: v's best state given parent state t.
  std::vector<std::vector<State>> best(n);
  for (int v = 0; v < n; ++v) {
    up[v].assign(net.state_size(v), kNegInf);
    for (State s : dom[v]) up[v][s] = pot.node[v][s];
  }
  for (auto it = rt.order.rbegin(); it != rt.order.rend(); ++it) {
    const NodeId v = *it;
    const NodeId p = rt.parent[v];
    if (p < 0) continue;
    const EdgeId e = rt.parent_edge[v];
    best[v].assign(net.state_size(p), -1);
    for (State t : dom[p]) {
      double top = kNegInf;
      State arg = -1;
      for (State s : dom[v]) {  // ascending, strict > keeps the lowest index
        const double val = up[v][s] + detail::edge_pot(net, pot, e, v, s, t);
        if (arg < 0 || val > top) {
          top = val;
          arg = s;
        }
      }
      best[v][t] = arg;
      up[p][t] += top;
    }
  }
  std::vector<State> x(n, -1);
  double top = kNegInf;
  for (State s : dom[root]) {
    if (x[root] < 0 || up[root][s] > top) {
      top = up[root][s];
      x[root] = s;
    }
  }
  for (NodeId v : rt.order) {
    if (rt.parent[v] >= 0) x[v] = best[v][x[rt.parent[v]]];
  }
  if (!std::isfinite(top)) fail(ErrorCode::numerical_error, "tree_max_product: non-finite score");
  InferenceResult res;
  res.log_partition = top;
  res.map_assignment = std::move(x);
  return res;
}

double assignment_score(const MarkovNetwork& net, const Potentials& pot,
                        std::span<const State> x) {
  double s = 0.0;
  for (int v = 0; v < net.num_nodes(); ++v) s += pot.node[v][x[v]];
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& edge = net.edge(e);
    s += pot.edge[e][x[edge.a] * net.state_size(edge.b) + x[edge.b]];
  }
  return s;
}

InferenceResult tree_sum_product(const MarkovNetwork& net, const SpanningTree& tree,
                                 const FeatureTemplate& tmpl, const Instance& inst,
                                 ClampMode clamp) {
  validate_instance(net, inst);
  const auto pot = make_potentials(net, tmpl, tmpl.extract(net, inst), tree.params);
  return tree_sum_product(net, tree.edges, pot, make_clamp(net, inst, clamp));
}

InferenceResult tree_max_product(const MarkovNetwork& net, const SpanningTree& tree,
                                 const FeatureTemplate& tmpl, const Instance& inst,
                                 ClampMode clamp) {
  validate_instance(net, inst);
  const auto pot = make_potentials(net, tmpl, tmpl.extract(net, inst), tree.params);
  return tree_max_product(net, tree.edges, pot, make_clamp(net, inst, clamp));
}

InferenceResult loopy_bp(const MarkovNetwork& net, const ParameterVector& params,
                         const FeatureTemplate& tmpl, const Instance& inst, ClampMode clamp,
                         const LoopyBpOptions& options) {
  validate_instance(net, inst);
  const auto pot = make_potentials(net, tmpl, tmpl.extract(net, inst), params);
  return loopy_bp(net, pot, make_clamp(net, inst, clamp), options);
}

InferenceResult exact_collapsed_chain(const MarkovNetwork& net, const ParameterVector& params,
                                      const FeatureTemplate& tmpl, const Instance& inst,
                                      ClampMode clamp) {
  validate_instance(net, inst);
  const auto pot = make_potentials(net, tmpl, tmpl.extract(net, inst), params);
  return exact_collapsed_chain(net, pot, make_clamp(net, inst, clamp));
}

InferenceResult brute_force(const MarkovNetwork& net, const ParameterVector& params,
                            const FeatureTemplate& tmpl, const Instance& inst, ClampMode clamp) {
  validate_instance(net, inst);
  const auto pot = make_potentials(net, tmpl, tmpl.extract(net, inst), params);
  return brute_force(net, pot, make_clamp(net, inst, clamp));
}

}  // namespace mrf
