#include "mrforest/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "mrforest/error.hpp"

namespace mrf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unsupported_structure: return "unsupported-structure";
    case ErrorCode::cycle_detected: return "cycle-detected";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::numerical_error: return "numerical-error";
    case ErrorCode::capacity_error: return "capacity-error";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
  }
  return "unknown";
}

MarkovNetwork::MarkovNetwork(std::vector<int> state_sizes,
                             std::vector<Edge> edges,
                             std::optional<GridShape> grid)
    : state_sizes_(std::move(state_sizes)), grid_(grid) {
  for (int s : state_sizes_) {
    if (s < 1) fail(ErrorCode::invalid_argument, "state size must be positive");
  }
  const int n = num_nodes();
  if (grid_ && grid_->levels * grid_->slices != n) {
    fail(ErrorCode::invalid_argument, "grid shape does not match node count");
  }
  std::set<std::pair<int, int>> seen;
  edges_.reserve(edges.size());
  adjacency_.resize(n);
  for (Edge e : edges) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) {
      fail(ErrorCode::invalid_argument, "edge endpoint is not a declared node");
    }
    if (e.a == e.b) fail(ErrorCode::invalid_argument, "self-loop");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (!seen.insert({e.a, e.b}).second) {
      fail(ErrorCode::invalid_argument, "duplicate edge");
    }
    const auto id = static_cast<EdgeId>(edges_.size());
    edges_.push_back(e);
    adjacency_[e.a].push_back({e.b, id});
    adjacency_[e.b].push_back({e.a, id});
  }
}

std::optional<EdgeId> MarkovNetwork::find_edge(NodeId u, NodeId v) const {
  for (const auto& nb : adjacency_[u]) {
    if (nb.node == v) return nb.edge;
  }
  return std::nullopt;
}

std::vector<Clique> MarkovNetwork::cliques() const {
  std::vector<Clique> out;
  out.reserve(num_nodes() + num_edges());
  for (int v = 0; v < num_nodes(); ++v) out.push_back({Clique::Kind::node, v});
  for (int e = 0; e < num_edges(); ++e) out.push_back({Clique::Kind::edge, e});
  return out;
}

NodeId MarkovNetwork::node_at(int level, int slice) const {
  return level * grid_->slices + slice;
}

int MarkovNetwork::level_of(NodeId v) const {
  return grid_ ? v / grid_->slices : 0;
}

int MarkovNetwork::slice_of(NodeId v) const {
  return grid_ ? v % grid_->slices : v;
}

MarkovNetwork build_network(int num_levels, int num_slices,
                            const std::vector<int>& state_sizes) {
  if (num_levels < 1 || num_slices < 1) {
    fail(ErrorCode::invalid_argument, "build_network: levels and slices must be >= 1");
  }
  if (static_cast<int>(state_sizes.size()) != num_levels) {
    fail(ErrorCode::invalid_argument, "build_network: need one state size per level");
  }
  std::vector<int> sizes;
  sizes.reserve(static_cast<std::size_t>(num_levels) * num_slices);
  for (int l = 0; l < num_levels; ++l) {
    sizes.insert(sizes.end(), num_slices, state_sizes[l]);
  }
  const auto id = [num_slices](int l, int t) { return l * num_slices + t; };
  std::vector<Edge> edges;
  for (int l = 0; l < num_levels; ++l) {
    for (int t = 0; t + 1 < num_slices; ++t) edges.push_back({id(l, t), id(l, t + 1)});
  }
  for (int t = 0; t < num_slices; ++t) {
    for (int l = 0; l + 1 < num_levels; ++l) edges.push_back({id(l, t), id(l + 1, t)});
  }
  return MarkovNetwork(std::move(sizes), std::move(edges),
                       GridShape{num_levels, num_slices});
}

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    parent[x] = y;
    return true;
  }
};

}  // namespace

SpanningTree validate_tree(const MarkovNetwork& net, std::vector<EdgeId> edges,
                           int tree_id, std::size_t dimension) {
  DisjointSets sets(net.num_nodes());
  for (EdgeId e : edges) {
    if (e < 0 || e >= net.num_edges()) {
      fail(ErrorCode::invalid_argument, "validate_tree: edge is not in the network");
    }
    if (!sets.unite(net.edge(e).a, net.edge(e).b)) {
      fail(ErrorCode::cycle_detected, "validate_tree: edge set contains a cycle");
    }
  }
  if (static_cast<int>(edges.size()) != net.num_nodes() - 1) {
    fail(ErrorCode::disconnected, "validate_tree: edge set does not span all nodes");
  }
  SpanningTree tree;
  tree.tree_id = tree_id;
  tree.edges = std::move(edges);
  tree.params = ParameterVector::Zero(static_cast<Eigen::Index>(dimension));
  return tree;
}

std::vector<SpanningTree> spanning_trees_for_grid(const MarkovNetwork& net,
                                                  std::size_t dimension) {
  if (!net.grid() || net.grid()->levels != 2) {
    fail(ErrorCode::unsupported_structure,
         "spanning_trees_for_grid: network is not a 2-level grid");
  }
  std::vector<EdgeId> chain[2];
  std::vector<EdgeId> cross;
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    const int la = net.level_of(net.edge(e).a);
    const int lb = net.level_of(net.edge(e).b);
    if (la == lb) {
      chain[la].push_back(e);
    } else {
      cross.push_back(e);
    }
  }
  static const char* names[2] = {"top-process", "bottom-process"};
  std::vector<SpanningTree> trees;
  for (int level = 0; level < 2; ++level) {
    std::vector<EdgeId> edges = chain[level];
    edges.insert(edges.end(), cross.begin(), cross.end());
    std::sort(edges.begin(), edges.end());
    SpanningTree tree = validate_tree(net, std::move(edges), level, dimension);
    tree.name = names[level];
    trees.push_back(std::move(tree));
  }
  return trees;
}

}  // namespace mrf
