#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "mrforest/inference.hpp"
#include "mrforest/instance.hpp"
#include "mrforest/optimizer.hpp"

namespace mrf {

/// One training sequence with its features evaluated once. Each instance may
/// have its own network (sequence lengths differ); `trees[k]` lists the edges
/// of pool tree k inside that network.
struct Example {
  std::shared_ptr<const MarkovNetwork> net;
  CliqueFeatures features;
  Clamp visible;
  std::vector<std::vector<EdgeId>> trees;
};

Example make_example(std::shared_ptr<const MarkovNetwork> net, const FeatureTemplate& tmpl,
                     const Instance& inst, std::vector<std::vector<EdgeId>> trees = {});

/// Exact or approximate inference used for likelihoods and expectations.
/// Counts every call to run(); counters are safe to read concurrently.
class InferenceEngine {
 public:
  virtual ~InferenceEngine() = default;
  virtual std::string name() const = 0;
  /// Edges whose marginals run() returns; nullptr means all edges.
  virtual const std::vector<EdgeId>* structure(const Example& ex) const = 0;

  InferenceResult run(const Example& ex, const Potentials& pot, const Clamp& clamp) const;
  long long calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }

 protected:
  virtual InferenceResult do_run(const Example& ex, const Potentials& pot,
                                 const Clamp& clamp) const = 0;

 private:
  mutable std::atomic<long long> calls_{0};
};

/// Two-pass sum-product on pool tree `tree_id` of each example.
class TreeEngine final : public InferenceEngine {
 public:
  explicit TreeEngine(int tree_id) : tree_id_(tree_id) {}
  std::string name() const override;
  const std::vector<EdgeId>* structure(const Example& ex) const override;
  int tree_id() const { return tree_id_; }

 protected:
  InferenceResult do_run(const Example& ex, const Potentials& pot, const Clamp& clamp) const override;

 private:
  int tree_id_;
};

class CollapsedChainEngine final : public InferenceEngine {
 public:
  std::string name() const override { return "exact-collapsed-chain"; }
  const std::vector<EdgeId>* structure(const Example&) const override { return nullptr; }

 protected:
  InferenceResult do_run(const Example& ex, const Potentials& pot, const Clamp& clamp) const override;
};

class BruteForceEngine final : public InferenceEngine {
 public:
  std::string name() const override { return "brute-force"; }
  const std::vector<EdgeId>* structure(const Example&) const override { return nullptr; }

 protected:
  InferenceResult do_run(const Example& ex, const Potentials& pot, const Clamp& clamp) const override;
};

/// Sum-mode loopy BP; the likelihood uses Bethe estimates.
class LoopyBpEngine final : public InferenceEngine {
 public:
  explicit LoopyBpEngine(LoopyBpOptions options = {}) : options_(options) {}
  std::string name() const override { return "loopy-bp"; }
  const std::vector<EdgeId>* structure(const Example&) const override { return nullptr; }

 protected:
  InferenceResult do_run(const Example& ex, const Potentials& pot, const Clamp& clamp) const override;

 private:
  LoopyBpOptions options_;
};

struct ComputeOptions {
  int threads = 1;  // 0: hardware concurrency. Results do not depend on it.
};

struct LikelihoodReport {
  double value = 0.0;                // sum_i lambda_i [A(v_i, o_i) - A(o_i)]
  ParameterVector gradient;          // E_clamped[F] - E_free[F], weighted
  std::vector<double> per_instance;  // A(v_i, o_i) - A(o_i)
};

/// A(v, o) - A(o) of one example; adds its gradient to `grad` when given.
double instance_loglik(const Example& ex, const FeatureTemplate& tmpl, const ParameterVector& params,
                       const InferenceEngine& engine, ParameterVector* grad = nullptr);

/// Weighted incomplete log-likelihood. Empty `weights` means uniform 1/D;
/// otherwise weights must sum to 1 within 1e-9.
LikelihoodReport incomplete_loglik(std::span<const Example> data, const FeatureTemplate& tmpl,
                                   const ParameterVector& params, const InferenceEngine& engine,
                                   std::span<const double> weights = {},
                                   const ComputeOptions& compute = {});

/// Adds scale * E[F] under the engine result to `grad`. Edges without
/// marginals in `res` are skipped.
void accumulate_expectations(const Example& ex, const FeatureTemplate& tmpl,
                             const InferenceResult& res, double scale, ParameterVector& grad);

/// 1 on the indices pool tree `tree_id` may use, over all examples.
std::vector<char> tree_mask(std::span<const Example> data, const FeatureTemplate& tmpl, int tree_id);

struct TrainConfig {
  OptimizerConfig optimizer;
  double l2 = 0.0;  // objective minus l2/2 * |w|^2
  ComputeOptions compute;
};

struct TrainResult {
  ParameterVector params;
  double objective = 0.0;    // weighted loglik at params (without the l2 term)
  LikelihoodReport report;   // at params
  int iterations = 0;
  int evaluations = 0;       // likelihood + gradient evaluations
  bool converged = false;
  std::vector<IterationLog> log;
};

/// Improves the weighted incomplete log-likelihood of one pool tree by CG,
/// starting from `warm_start`. Off-tree entries stay zero.
TrainResult train_weighted_tree(int tree_id, std::span<const Example> data,
                                const FeatureTemplate& tmpl, std::span<const double> weights,
                                const TrainConfig& config, const ParameterVector& warm_start,
                                OptimizerState* state = nullptr,
                                const TreeEngine* engine = nullptr,
                                const std::function<void(const IterationLog&)>& on_iteration = {});

/// Full-structure maximum likelihood from `init` (zeros when empty) using the
/// given engine's expectations.
TrainResult mle_baseline(std::span<const Example> data, const FeatureTemplate& tmpl,
                         const InferenceEngine& engine, const TrainConfig& config,
                         ParameterVector init = {},
                         const std::function<void(const IterationLog&)>& on_iteration = {});

}  // namespace mrf
