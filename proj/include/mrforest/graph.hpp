#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mrf {

using NodeId = int;
using EdgeId = int;
using State = int;  // 0-based state index

/// Dense weight vector over the shared feature index space.
using ParameterVector = Eigen::VectorXd;

/// Unordered pair stored with a < b.
struct Edge {
  NodeId a = 0;
  NodeId b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Present on networks produced by build_network. Node (level, slice) has id
/// level * slices + slice; level 0 is the top of the hierarchy.
struct GridShape {
  int levels = 0;
  int slices = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct Clique {
  enum class Kind { node, edge } kind;
  int id;  // NodeId or EdgeId
};

struct Neighbor {
  NodeId node;
  EdgeId edge;
};

/// Pairwise undirected network with cliques = singletons and edges.
/// Immutable after construction.
class MarkovNetwork {
 public:
  MarkovNetwork() = default;
  MarkovNetwork(std::vector<int> state_sizes, std::vector<Edge> edges,
                std::optional<GridShape> grid = std::nullopt);

  int num_nodes() const { return static_cast<int>(state_sizes_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int state_size(NodeId v) const { return state_sizes_[v]; }
  const std::vector<int>& state_sizes() const { return state_sizes_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(NodeId v) const { return adjacency_[v]; }
  const std::optional<GridShape>& grid() const { return grid_; }

  std::optional<EdgeId> find_edge(NodeId u, NodeId v) const;

  /// All singletons followed by all edges.
  std::vector<Clique> cliques() const;

  // Grid helpers; only valid when grid() is set.
  NodeId node_at(int level, int slice) const;
  int level_of(NodeId v) const;
  /// Observation slice a node reads from: its time slice on grids, the node
  /// id otherwise.
  int slice_of(NodeId v) const;

 private:
  std::vector<int> state_sizes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::optional<GridShape> grid_;
};

/// An edge subset of a network forming a spanning tree, plus its parameters.
struct SpanningTree {
  int tree_id = 0;
  std::string name;
  std::vector<EdgeId> edges;
  ParameterVector params;
};

/// Multi-level grid: chain edges within each level, then cross edges between
/// vertically adjacent nodes of each slice. `state_sizes` holds one entry per
/// level.
MarkovNetwork build_network(int num_levels, int num_slices,
                            const std::vector<int>& state_sizes);

/// Checks that `edges` (ids into net) form a spanning tree. Throws
/// cycle_detected or disconnected otherwise. Parameters are zero of length
/// `dimension`.
SpanningTree validate_tree(const MarkovNetwork& net, std::vector<EdgeId> edges,
                           int tree_id = 0, std::size_t dimension = 0);

/// The two process trees of a 2-level grid: tree 0 = top chain + all cross
/// edges, tree 1 = bottom chain + all cross edges.
std::vector<SpanningTree> spanning_trees_for_grid(const MarkovNetwork& net,
                                                  std::size_t dimension = 0);

}  // namespace mrf
