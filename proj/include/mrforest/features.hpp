#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrforest/graph.hpp"
#include "mrforest/instance.hpp"

namespace mrf {

enum class FeatureKind { data_association, temporal_relation, cross_semantic_relation };

const char* to_string(FeatureKind kind);

/// A contiguous run of the global index space shared by every clique of one
/// class (e.g. all bottom-level nodes). Entry (row, col, component) lives at
/// offset + (row * cols + col) * components + component, where row/col are the
/// states of the clique's first/second node (cols == 1 for node cliques).
struct ParameterBlock {
  std::string name;
  FeatureKind kind = FeatureKind::data_association;
  int arity = 1;
  int rows = 1;
  int cols = 1;
  int components = 1;
  int offset = 0;

  int size() const { return rows * cols * components; }
  int index(int row, int col, int component) const {
    return offset + (row * cols + col) * components + component;
  }
};

struct SparseEntry {
  int component;
  double value;
};

/// Observation-dependent part of one clique's features.
struct CliqueTerms {
  int block = -1;  // -1: clique carries no features
  std::vector<SparseEntry> entries;
};

/// Features of one instance, evaluated once and reused by every engine.
struct CliqueFeatures {
  std::vector<CliqueTerms> nodes;
  std::vector<CliqueTerms> edges;
};

/// Sorted (index, value) pairs.
using SparseVector = std::vector<std::pair<int, double>>;

/// Log-potentials theta_c(x_c) = <w, f(x_c, o)> for every clique.
struct Potentials {
  std::vector<std::vector<double>> node;  // [v][s]
  std::vector<std::vector<double>> edge;  // [e][s_a * S_b + s_b]
};

class FeatureTemplate {
 public:
  virtual ~FeatureTemplate() = default;

  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  int dimension() const { return dimension_; }

  virtual CliqueFeatures extract(const MarkovNetwork& net, const Instance& inst) const = 0;

 protected:
  int add_block(ParameterBlock block);

 private:
  std::vector<ParameterBlock> blocks_;
  int dimension_ = 0;
};

/// One parameter block per clique. Node cliques get a bias component plus
/// `observation_dim` components copied from the node's observation slice;
/// edge cliques are pure transition indicators. Bound to the network it was
/// built from.
class IndicatorTemplate final : public FeatureTemplate {
 public:
  explicit IndicatorTemplate(const MarkovNetwork& net, int observation_dim = 0);

  CliqueFeatures extract(const MarkovNetwork& net, const Instance& inst) const override;

 private:
  int observation_dim_;
  int num_nodes_;
  int num_edges_;
};

/// F(x, o) = sum over cliques of f(x_c, o).
SparseVector compute_features(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                              const CliqueFeatures& features, std::span<const State> assignment);
SparseVector compute_features(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                              const Instance& inst, std::span<const State> assignment);

double dot(const SparseVector& f, const ParameterVector& w);

/// Throws numerical_error on any non-finite potential.
Potentials make_potentials(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                           const CliqueFeatures& features, const ParameterVector& params);

/// Blocks touched by the node cliques and the given edges.
std::vector<char> blocks_in_structure(const MarkovNetwork& net, const CliqueFeatures& features,
                                      std::span<const EdgeId> edges);

/// 1 for indices a tree may use, 0 for indices of cliques outside it. Throws
/// unsupported_structure if a block is shared by an in-tree and an off-tree
/// clique.
std::vector<char> tree_parameter_mask(const MarkovNetwork& net, const FeatureTemplate& tmpl,
                                      const CliqueFeatures& features,
                                      std::span<const EdgeId> tree_edges);

}  // namespace mrf
