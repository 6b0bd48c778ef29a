#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mrforest/features.hpp"
#include "mrforest/learn.hpp"

namespace mrf {

struct EnsembleMember {
  int tree_id = 0;
  ParameterVector params;  // snapshot at selection time
  double alpha = 0.0;
};

/// Per-instance boosting weights kept as log-weights.
class DataWeights {
 public:
  DataWeights() = default;
  explicit DataWeights(int n);

  int size() const { return static_cast<int>(log_.size()); }
  std::vector<double> lambda() const;
  const std::vector<double>& log_lambda() const { return log_; }
  /// lambda_i <- lambda_i * exp(delta_i), then renormalize.
  void multiply(std::span<const double> log_factor);
  double entropy() const;

 private:
  void normalize();
  std::vector<double> log_;
};

struct RoundRecord {
  int round = 0;
  int selected_tree = -1;
  std::vector<double> tree_objectives;  // weighted loglik of every pool tree
  double weighted_loglik = 0.0;         // of the selected tree
  double descent = 0.0;                 // sum_i lambda_i s_l(i)
  bool accepted = false;
  double alpha = 0.0;
  std::vector<double> alphas;           // all member weights after the round
  double log_loss_h = 0.0;              // log L_H after the round
  bool loss_increased = false;          // L_H rose versus the previous round
  double lambda_entropy = 0.0;          // after the update
  double lambda_sum = 0.0;
  /// Instances whose pre-normalization weight factor exp(-beta alpha s) > 1.
  std::vector<int> lambda_up;
  std::vector<double> s;                // s_l per instance
  std::vector<long long> grad_evals;    // per pool tree
  std::vector<long long> tree_sweeps;   // per pool tree; one clamped+free pair per instance
  double seconds = 0.0;                 // wall time, not part of the exported history
};

struct Ensemble {
  std::vector<EnsembleMember> members;
  ParameterVector combined;
  double beta = 0.02;
  std::vector<RoundRecord> history;
  std::vector<double> lambda;   // final data weights
  std::vector<double> H;        // final H(v_i, o_i)
  std::string stop_reason;      // "descent", "max-rounds"
};

struct BoostConfig {
  double beta = 0.02;
  double alpha_step = 0.05;
  int max_rounds = 100;
  int cg_iters = 2;
  /// Golden-section search of alpha on L_H instead of the constant step.
  bool alpha_line_search = false;
  TrainConfig train;  // optimizer.max_iters is overridden by cg_iters
};

void validate(const BoostConfig& config);

/// AdaBoost.MRF over the pool trees present in every example.
Ensemble boost(std::span<const Example> data, const FeatureTemplate& tmpl, int num_trees,
               const BoostConfig& config,
               const std::function<void(const RoundRecord&)>& on_round = {});

/// w = sum_l alpha_l w_l. Throws invalid_argument on empty input or
/// mismatched dimensions.
ParameterVector combine_parameters(std::span<const EnsembleMember> members);

/// log P_tau(v_i | o_i) of one member on every example.
std::vector<double> member_loglik(std::span<const Example> data, const FeatureTemplate& tmpl,
                                  const EnsembleMember& member, const ComputeOptions& compute = {});

/// H(v_i, o_i) = sum_l alpha_l log P_l(v_i | o_i).
std::vector<double> ensemble_scores(std::span<const Example> data, const FeatureTemplate& tmpl,
                                    std::span<const EnsembleMember> members,
                                    const ComputeOptions& compute = {});

/// L_H = (1/D) sum_i exp(-beta H(v_i, o_i)).
double holder_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                   std::span<const EnsembleMember> members, double beta);
double log_holder_loss(std::span<const double> H, double beta);

/// Exact incomplete exponential loss by enumerating the visible states of
/// each example. Throws capacity_error past 1e6 configurations.
double incomplete_exp_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                           std::span<const EnsembleMember> members, double beta);

struct HolderCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// lhs = sum_i prod_j a_ij, rhs = prod_j (sum_i a_ij^r_j)^(1/r_j).
HolderCheck check_holder_inequality(const std::vector<std::vector<double>>& a,
                                    std::span<const double> r);

struct GuidedMleResult {
  ParameterVector params;
  double log_loss = 0.0;      // log L_H at params
  std::vector<double> trajectory;
  int iterations = 0;
};

/// Log L_H of the fixed-alpha ensemble whose trees all read the shared
/// parameter vector, with gradient -beta sum_i lambda_i sum_t alpha_t grad log P_t.
LikelihoodReport guided_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                             const ParameterVector& params, std::span<const double> alphas,
                             double beta, const ComputeOptions& compute = {});

/// Jointly trains all trees on one shared parameter vector with fixed alphas.
GuidedMleResult parallel_guided_mle(std::span<const Example> data, const FeatureTemplate& tmpl,
                                    std::span<const double> alphas, double beta,
                                    const TrainConfig& config, ParameterVector init = {});

}  // namespace mrf
