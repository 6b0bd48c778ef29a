#include "mrforest/learn.hpp"

#include <cmath>
#include <numeric>

#include "mrforest/error.hpp"
#include "parallel.hpp"

namespace mrf {

Example make_example(std::shared_ptr<const MarkovNetwork> net, const FeatureTemplate& tmpl,
                     const Instance& inst, std::vector<std::vector<EdgeId>> trees) {
  if (!net) fail(ErrorCode::invalid_argument, "make_example: null network");
  validate_instance(*net, inst);
  for (auto& edges : trees) edges = validate_tree(*net, std::move(edges)).edges;
  Example ex;
  ex.features = tmpl.extract(*net, inst);
  ex.visible = visible_clamp(*net, inst);
  ex.trees = std::move(trees);
  ex.net = std::move(net);
  return ex;
}

InferenceResult InferenceEngine::run(const Example& ex, const Potentials& pot,
                                     const Clamp& clamp) const {
  ++calls_;
  return do_run(ex, pot, clamp);
}

std::string TreeEngine::name() const { return "tree-" + std::to_string(tree_id_); }

const std::vector<EdgeId>* TreeEngine::structure(const Example& ex) const {
  if (tree_id_ < 0 || tree_id_ >= static_cast<int>(ex.trees.size())) {
    fail(ErrorCode::invalid_argument, "tree engine: example has no tree " + std::to_string(tree_id_));
  }
  return &ex.trees[tree_id_];
}

InferenceResult TreeEngine::do_run(const Example& ex, const Potentials& pot, const Clamp& clamp) const {
  return tree_sum_product(*ex.net, *structure(ex), pot, clamp);
}

InferenceResult CollapsedChainEngine::do_run(const Example& ex, const Potentials& pot,
                                             const Clamp& clamp) const {
  return exact_collapsed_chain(*ex.net, pot, clamp);
}

InferenceResult BruteForceEngine::do_run(const Example& ex, const Potentials& pot,
                                         const Clamp& clamp) const {
  return brute_force(*ex.net, pot, clamp);
}

InferenceResult LoopyBpEngine::do_run(const Example& ex, const Potentials& pot,
                                      const Clamp& clamp) const {
  LoopyBpOptions opt = options_;
  opt.mode = BpMode::sum;
  return loopy_bp(*ex.net, pot, clamp, opt);
}

void accumulate_expectations(const Example& ex, const FeatureTemplate& tmpl,
                             const InferenceResult& res, double scale, ParameterVector& grad) {
  const MarkovNetwork& net = *ex.net;
  const auto& blocks = tmpl.blocks();
  for (int v = 0; v < net.num_nodes(); ++v) {
    const auto& terms = ex.features.nodes[v];
    if (terms.block < 0) continue;
    const auto& blk = blocks[terms.block];
    for (int s = 0; s < net.state_size(v); ++s) {
      const double mu = res.node_marginals[v][s];
      if (mu == 0.0) continue;
      for (const auto& [k, g] : terms.entries) grad[blk.index(s, 0, k)] += scale * mu * g;
    }
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    const auto& terms = ex.features.edges[e];
    if (terms.block < 0 || e >= static_cast<int>(res.edge_marginals.size())) continue;
    const auto& em = res.edge_marginals[e];
    if (em.empty()) continue;
    const auto& blk = blocks[terms.block];
    for (std::size_t i = 0; i < em.size(); ++i) {
      if (em[i] == 0.0) continue;
      for (const auto& [k, g] : terms.entries) {
        grad[blk.offset + static_cast<int>(i) * blk.components + k] += scale * em[i] * g;
      }
    }
  }
}

namespace {

std::vector<double> resolve_weights(std::size_t n, std::span<const double> weights) {
  if (n == 0) fail(ErrorCode::invalid_argument, "empty training data");
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) fail(ErrorCode::invalid_argument, "weight count does not match data");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) fail(ErrorCode::invalid_argument, "data weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::invalid_argument, "data weights must sum to 1");
  return {weights.begin(), weights.end()};
}

}  // namespace

double instance_loglik(const Example& ex, const FeatureTemplate& tmpl, const ParameterVector& params,
                       const InferenceEngine& engine, ParameterVector* grad) {
  const Potentials pot = make_potentials(*ex.net, tmpl, ex.features, params);
  const InferenceResult clamped = engine.run(ex, pot, ex.visible);
  const InferenceResult free = engine.run(ex, pot, free_clamp(*ex.net));
  const double ll = clamped.log_partition - free.log_partition;
  if (!std::isfinite(ll)) fail(ErrorCode::numerical_error, "non-finite log-likelihood");
  if (grad) {
    accumulate_expectations(ex, tmpl, clamped, 1.0, *grad);
    accumulate_expectations(ex, tmpl, free, -1.0, *grad);
  }
  return ll;
}

LikelihoodReport incomplete_loglik(std::span<const Example> data, const FeatureTemplate& tmpl,
                                   const ParameterVector& params, const InferenceEngine& engine,
                                   std::span<const double> weights, const ComputeOptions& compute) {
  const auto lambda = resolve_weights(data.size(), weights);
  const int n = static_cast<int>(data.size());
  std::vector<ParameterVector> grads(n);
  std::vector<double> ll(n, 0.0);
  detail::parallel_for(n, compute.threads, [&](int i) {
    grads[i] = ParameterVector::Zero(tmpl.dimension());
    try {
      ll[i] = instance_loglik(data[i], tmpl, params, engine, &grads[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical_error) throw;
      fail(ErrorCode::numerical_error, std::string(e.what()) + " (instance " + std::to_string(i) + ")");
    }
  });
  LikelihoodReport rep;
  rep.gradient = ParameterVector::Zero(tmpl.dimension());
  for (int i = 0; i < n; ++i) {
    rep.value += lambda[i] * ll[i];
    rep.gradient += lambda[i] * grads[i];
  }
  rep.per_instance = std::move(ll);
  return rep;
}

std::vector<char> tree_mask(std::span<const Example> data, const FeatureTemplate& tmpl, int tree_id) {
  std::vector<char> mask(tmpl.dimension(), 0);
  for (const Example& ex : data) {
    if (tree_id < 0 || tree_id >= static_cast<int>(ex.trees.size())) {
      fail(ErrorCode::invalid_argument, "example has no tree " + std::to_string(tree_id));
    }
    const auto m = tree_parameter_mask(*ex.net, tmpl, ex.features, ex.trees[tree_id]);
    for (std::size_t k = 0; k < m.size(); ++k) mask[k] |= m[k];
  }
  return mask;
}

namespace {

void apply_mask(ParameterVector& v, const std::vector<char>& mask) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!mask[k]) v[k] = 0.0;
  }
}

TrainResult run_training(std::span<const Example> data, const FeatureTemplate& tmpl,
                         std::span<const double> weights, const InferenceEngine& engine,
                         const TrainConfig& config, ParameterVector x0, const std::vector<char>* mask,
                         OptimizerState* state,
                         const std::function<void(const IterationLog&)>& on_iteration) {
  if (!(config.l2 >= 0.0)) fail(ErrorCode::invalid_argument, "l2 must be >= 0");
  if (x0.size() == 0) x0 = ParameterVector::Zero(tmpl.dimension());
  if (x0.size() != tmpl.dimension()) {
    fail(ErrorCode::invalid_argument, "initial parameters do not match feature dimension");
  }
  if (mask) apply_mask(x0, *mask);
  ParameterVector last_x;
  LikelihoodReport last;
  int extra = 0;
  const Objective objective = [&](const ParameterVector& x, ParameterVector& g) {
    last_x = x;
    last = incomplete_loglik(data, tmpl, x, engine, weights, config.compute);
    g = -last.gradient + config.l2 * x;
    if (mask) apply_mask(g, *mask);
    return -last.value + 0.5 * config.l2 * x.squaredNorm();
  };
  OptimizerResult opt;
  try {
    opt = minimize_cg(objective, std::move(x0), config.optimizer, state, on_iteration);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::numerical_error) throw;
    fail(ErrorCode::numerical_error, std::string("training: ") + e.what());
  }
  if (last_x.size() != opt.x.size() || !(last_x.array() == opt.x.array()).all()) {
    ParameterVector g(opt.x.size());
    objective(opt.x, g);
    ++extra;
  }
  TrainResult res;
  res.params = std::move(opt.x);
  res.objective = last.value;
  res.report = std::move(last);
  res.iterations = opt.iterations;
  res.evaluations = opt.evaluations + extra;
  res.converged = opt.converged;
  res.log = std::move(opt.log);
  return res;
}

}  // namespace

TrainResult train_weighted_tree(int tree_id, std::span<const Example> data,
                                const FeatureTemplate& tmpl, std::span<const double> weights,
                                const TrainConfig& config, const ParameterVector& warm_start,
                                OptimizerState* state, const TreeEngine* engine,
                                const std::function<void(const IterationLog&)>& on_iteration) {
  const auto mask = tree_mask(data, tmpl, tree_id);
  const TreeEngine local(tree_id);
  const TreeEngine& eng = engine ? *engine : local;
  if (eng.tree_id() != tree_id) fail(ErrorCode::invalid_argument, "tree engine bound to another tree");
  return run_training(data, tmpl, weights, eng, config, warm_start, &mask, state, on_iteration);
}

TrainResult mle_baseline(std::span<const Example> data, const FeatureTemplate& tmpl,
                         const InferenceEngine& engine, const TrainConfig& config,
                         ParameterVector init,
                         const std::function<void(const IterationLog&)>& on_iteration) {
  return run_training(data, tmpl, {}, engine, config, std::move(init), nullptr, nullptr, on_iteration);
}

}  // namespace mrf
