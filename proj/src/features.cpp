#include "mrforest/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mrforest/error.hpp"

namespace mrf {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::data_association: return "data-association";
    case FeatureKind::temporal_relation: return "temporal-relation";
    case FeatureKind::cross_semantic_relation: return "cross-semantic-relation";
  }
  return "unknown";
}

Clamp free_clamp(const MarkovNetwork& net) { return Clamp(net.num_nodes(), kFree); }

Clamp visible_clamp(const MarkovNetwork& net, const Instance& inst) {
  Clamp clamp(net.num_nodes(), kFree);
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (inst.labels[v]) clamp[v] = *inst.labels[v];
  }
  return clamp;
}

Clamp make_clamp(const MarkovNetwork& net, const Instance& inst, ClampMode mode) {
  return mode == ClampMode::visible ? visible_clamp(net, inst) : free_clamp(net);
}

Instance unlabelled_instance(const MarkovNetwork& net,
                             std::vector<std::vector<double>> observations) {
  Instance inst;
  inst.observations = std::move(observations);
  inst.labels.assign(net.num_nodes(), std::nullopt);
  return inst;
}

void validate_instance(const MarkovNetwork& net, const Instance& inst) {
  if (static_cast<int>(inst.labels.size()) != net.num_nodes()) {
    fail(ErrorCode::invalid_argument, "instance label count does not match network");
  }
  if (!(inst.weight >= 0.0)) fail(ErrorCode::invalid_argument, "instance weight must be >= 0");
  for (int v = 0; v < net.num_nodes(); ++v) {
    const auto& slot = inst.labels[v];
    if (slot && (*slot < 0 || *slot >= net.state_size(v))) {
      fail(ErrorCode::invalid_argument, "visible state out of range at node " + std::to_string(v));
    }
  }
}

bool has_visible_label(const Instance& inst) {
  return std::any_of(inst.labels.begin(), inst.labels.end(),
                     [](const LabelSlot& s) { return s.has_value(); });
}

int FeatureTemplate::add_block(ParameterBlock block) {
  block.offset = dimension_;
  dimension_ += block.size();
  blocks_.push_back(std::move(block));
  return static_cast<int>(blocks_.size()) - 1;
}

IndicatorTemplate::IndicatorTemplate(const MarkovNetwork& net, int observation_dim)
    : observation_dim_(observation_dim), num_nodes_(net.num_nodes()), num_edges_(net.num_edges()) {
  if (observation_dim < 0) fail(ErrorCode::invalid_argument, "observation_dim must be >= 0");
  for (int v = 0; v < net.num_nodes(); ++v) {
    add_block({"node" + std::to_string(v), FeatureKind::data_association, 1, net.state_size(v), 1,
               1 + observation_dim, 0});
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& edge = net.edge(e);
    const bool cross = net.grid() && net.level_of(edge.a) != net.level_of(edge.b);
    add_block({"edge" + std::to_string(e),
               cross ? FeatureKind::cross_semantic_relation : FeatureKind::temporal_relation, 2,
               net.state_size(edge.a), net.state_size(edge.b), 1, 0});
  }
}

CliqueFeatures IndicatorTemplate::extract(const MarkovNetwork& net, const Instance& inst) const {
  if (net.num_nodes() != num_nodes_ || net.num_edges() != num_edges_) {
    fail(ErrorCode::schema_mismatch, "IndicatorTemplate applied to a different network");
  }
  CliqueFeatures out;
  out.nodes.resize(net.num_nodes());
  out.edges.resize(net.num_edges());
  for (int v = 0; v < net.num_nodes(); ++v) {
    auto& terms = out.nodes[v];
    terms.block = v;
    terms.entries.push_back({0, 1.0});
    const int slice = net.slice_of(v);
    if (observation_dim_ > 0 && slice < static_cast<int>(inst.observations.size())) {
      const auto& obs = inst.observations[slice];
      for (int k = 0; k < observation_dim_ && k < static_cast<int>(obs.size()); ++k) {
        terms.entries.push_back({1 + k, obs[k]});
      }
    }
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    out.edges[e].block = net.num_nodes() + e;
    out.edges[e].entries.push_back({0, 1.0});
  }
  return out;
}

SparseVector compute_features(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                              const CliqueFeatures& features, std::span<const State> assignment) {
  if (static_cast<int>(assignment.size()) != net.num_nodes()) {
    fail(ErrorCode::invalid_argument, "assignment must label every node");
  }
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (assignment[v] < 0 || assignment[v] >= net.state_size(v)) {
      fail(ErrorCode::invalid_argument, "assignment state out of range at node " + std::to_string(v));
    }
  }
  std::map<int, double> acc;
  const auto& blocks = tmpl.blocks();
  for (int v = 0; v < net.num_nodes(); ++v) {
    const auto& terms = features.nodes[v];
    if (terms.block < 0) continue;
    const auto& blk = blocks[terms.block];
    for (const auto& [k, g] : terms.entries) acc[blk.index(assignment[v], 0, k)] += g;
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    const auto& terms = features.edges[e];
    if (terms.block < 0) continue;
    const auto& blk = blocks[terms.block];
    const Edge& edge = net.edge(e);
    for (const auto& [k, g] : terms.entries) {
      acc[blk.index(assignment[edge.a], assignment[edge.b], k)] += g;
    }
  }
  return SparseVector(acc.begin(), acc.end());
}

SparseVector compute_features(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                              const Instance& inst, std::span<const State> assignment) {
  return compute_features(net, tmpl, tmpl.extract(net, inst), assignment);
}

double dot(const SparseVector& f, const ParameterVector& w) {
  double s = 0.0;
  for (const auto& [i, v] : f) s += w[i] * v;
  return s;
}

Potentials make_potentials(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                           const CliqueFeatures& features, const ParameterVector& params) {
  if (params.size() != tmpl.dimension()) {
    fail(ErrorCode::invalid_argument, "parameter vector length does not match feature dimension");
  }
  const auto& blocks = tmpl.blocks();
  Potentials pot;
  pot.node.resize(net.num_nodes());
  pot.edge.resize(net.num_edges());
  const double* w = params.data();
  for (int v = 0; v < net.num_nodes(); ++v) {
    auto& theta = pot.node[v];
    theta.assign(net.state_size(v), 0.0);
    const auto& terms = features.nodes[v];
    if (terms.block < 0) continue;
    const auto& blk = blocks[terms.block];
    for (int s = 0; s < blk.rows; ++s) {
      const double* ws = w + blk.index(s, 0, 0);
      double acc = 0.0;
      for (const auto& [k, g] : terms.entries) acc += ws[k] * g;
      theta[s] = acc;
    }
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    const Edge& edge = net.edge(e);
    const int sa = net.state_size(edge.a);
    const int sb = net.state_size(edge.b);
    auto& theta = pot.edge[e];
    theta.assign(static_cast<std::size_t>(sa) * sb, 0.0);
    const auto& terms = features.edges[e];
    if (terms.block < 0) continue;
    const auto& blk = blocks[terms.block];
    for (int i = 0; i < sa * sb; ++i) {
      const double* wi = w + blk.offset + i * blk.components;
      double acc = 0.0;
      for (const auto& [k, g] : terms.entries) acc += wi[k] * g;
      theta[i] = acc;
    }
  }
  for (const auto& row : pot.node) {
    for (double x : row) {
      if (!std::isfinite(x)) fail(ErrorCode::numerical_error, "non-finite node potential");
    }
  }
  for (const auto& row : pot.edge) {
    for (double x : row) {
      if (!std::isfinite(x)) fail(ErrorCode::numerical_error, "non-finite edge potential");
    }
  }
  return pot;
}

std::vector<char> blocks_in_structure(const MarkovNetwork& net, const CliqueFeatures& features,
                                      std::span<const EdgeId> edges) {
  int max_block = -1;
  for (const auto& t : features.nodes) max_block = std::max(max_block, t.block);
  for (const auto& t : features.edges) max_block = std::max(max_block, t.block);
  std::vector<char> used(static_cast<std::size_t>(max_block + 1), 0);
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (features.nodes[v].block >= 0) used[features.nodes[v].block] = 1;
  }
  for (EdgeId e : edges) {
    if (features.edges[e].block >= 0) used[features.edges[e].block] = 1;
  }
  return used;
}

std::vector<char> tree_parameter_mask(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                                      const CliqueFeatures& features,
                                      std::span<const EdgeId> tree_edges) {
  const auto& blocks = tmpl.blocks();
  std::vector<char> in_tree(blocks.size(), 0);
  std::vector<char> off_tree(blocks.size(), 0);
  for (int v = 0; v < net.num_nodes(); ++v) {
    if (features.nodes[v].block >= 0) in_tree[features.nodes[v].block] = 1;
  }
  std::vector<char> edge_in(net.num_edges(), 0);
  for (EdgeId e : tree_edges) edge_in[e] = 1;
  for (int e = 0; e < net.num_edges(); ++e) {
    const int b = features.edges[e].block;
    if (b < 0) continue;
    (edge_in[e] ? in_tree : off_tree)[b] = 1;
  }
  std::vector<char> mask(tmpl.dimension(), 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (in_tree[b] && off_tree[b]) {
      fail(ErrorCode::unsupported_structure,
           "parameter block '" + blocks[b].name + "' is shared by in-tree and off-tree cliques");
    }
    if (in_tree[b]) {
      std::fill_n(mask.begin() + blocks[b].offset, blocks[b].size(), 1);
    }
  }
  return mask;
}

}  // namespace mrf
