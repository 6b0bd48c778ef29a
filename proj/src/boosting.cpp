#include "mrforest/boosting.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <cmath>
#include <limits>

#include "inference_detail.hpp"
#include "mrforest/error.hpp"
#include "parallel.hpp"

namespace mrf {

DataWeights::DataWeights(int n) : log_(n, -std::log(static_cast<double>(n))) {
  if (n < 1) fail(ErrorCode::invalid_argument, "DataWeights: need at least one instance");
}

std::vector<double> DataWeights::lambda() const {
  std::vector<double> out(log_.size());
  for (std::size_t i = 0; i < log_.size(); ++i) out[i] = std::exp(log_[i]);
  return out;
}

void DataWeights::multiply(std::span<const double> log_factor) {
  if (log_factor.size() != log_.size()) fail(ErrorCode::invalid_argument, "DataWeights: size mismatch");
  for (std::size_t i = 0; i < log_.size(); ++i) log_[i] += log_factor[i];
  normalize();
}

void DataWeights::normalize() {
  const double z = detail::log_sum_exp(log_);
  if (!std::isfinite(z)) fail(ErrorCode::numerical_error, "DataWeights: non-finite normalizer");
  for (double& l : log_) l -= z;
}

double DataWeights::entropy() const {
  double h = 0.0;
  for (double l : log_) {
    if (l > detail::kNegInf) h -= std::exp(l) * l;
  }
  return h;
}

void validate(const BoostConfig& config) {
  if (!(config.beta > 0.0 && config.beta <= 1.0)) fail(ErrorCode::invalid_argument, "beta must be in (0,1]");
  if (!(config.alpha_step > 0.0 && config.alpha_step < 1.0)) {
    fail(ErrorCode::invalid_argument, "alpha_step must be in (0,1)");
  }
  if (config.max_rounds < 1) fail(ErrorCode::invalid_argument, "max_rounds must be >= 1");
  if (config.cg_iters < 1) fail(ErrorCode::invalid_argument, "cg_iters must be >= 1");
  validate(config.train.optimizer);
}

ParameterVector combine_parameters(std::span<const EnsembleMember> members) {
  if (members.empty()) fail(ErrorCode::invalid_argument, "combine_parameters: no members");
  ParameterVector w = ParameterVector::Zero(members.front().params.size());
  for (const auto& m : members) {
    if (m.params.size() != w.size()) {
      fail(ErrorCode::invalid_argument, "combine_parameters: mismatched dimensions");
    }
    w += m.alpha * m.params;
  }
  return w;
}

std::vector<double> member_loglik(std::span<const Example> data, const FeatureTemplate& tmpl,
                                  const EnsembleMember& member, const ComputeOptions& compute) {
  const TreeEngine engine(member.tree_id);
  std::vector<double> out(data.size());
  detail::parallel_for(static_cast<int>(data.size()), compute.threads,
                       [&](int i) { out[i] = instance_loglik(data[i], tmpl, member.params, engine); });
  return out;
}

std::vector<double> ensemble_scores(std::span<const Example> data, const FeatureTemplate& tmpl,
                                    std::span<const EnsembleMember> members,
                                    const ComputeOptions& compute) {
  std::vector<double> H(data.size(), 0.0);
  for (const auto& m : members) {
    const auto h = member_loglik(data, tmpl, m, compute);
    for (std::size_t i = 0; i < H.size(); ++i) H[i] += m.alpha * h[i];
  }
  return H;
}

double log_holder_loss(std::span<const double> H, double beta) {
  if (H.empty()) fail(ErrorCode::invalid_argument, "holder loss: empty data");
  std::vector<double> terms(H.size());
  for (std::size_t i = 0; i < H.size(); ++i) terms[i] = -beta * H[i];
  return detail::log_sum_exp(terms) - std::log(static_cast<double>(H.size()));
}

double holder_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                   std::span<const EnsembleMember> members, double beta) {
  const auto H = ensemble_scores(data, tmpl, members);
  return std::exp(log_holder_loss(H, beta));
}

double incomplete_exp_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                           std::span<const EnsembleMember> members, double beta) {
  if (data.empty()) fail(ErrorCode::invalid_argument, "incomplete_exp_loss: empty data");
  if (members.empty()) fail(ErrorCode::invalid_argument, "incomplete_exp_loss: no members");
  double total = 0.0;
  for (const Example& ex : data) {
    const MarkovNetwork& net = *ex.net;
    std::vector<NodeId> shown;
    double count = 1.0;
    for (int v = 0; v < net.num_nodes(); ++v) {
      if (ex.visible[v] != kFree) {
        shown.push_back(v);
        count *= net.state_size(v);
      }
    }
    if (count > kBruteForceLimit) {
      fail(ErrorCode::capacity_error, "incomplete_exp_loss: more than 1e6 visible configurations");
    }
    std::vector<Potentials> pots;
    std::vector<double> log_z;
    double H = 0.0;
    for (const auto& m : members) {
      if (m.tree_id < 0 || m.tree_id >= static_cast<int>(ex.trees.size())) {
        fail(ErrorCode::invalid_argument, "incomplete_exp_loss: example lacks a member tree");
      }
      pots.push_back(make_potentials(net, tmpl, ex.features, m.params));
      log_z.push_back(tree_sum_product(net, ex.trees[m.tree_id], pots.back(), free_clamp(net)).log_partition);
      H += m.alpha *
           (tree_sum_product(net, ex.trees[m.tree_id], pots.back(), ex.visible).log_partition - log_z.back());
    }
    // log sum_v prod_j P_j(v|o)^alpha_j over all visible configurations.
    std::vector<double> terms;
    Clamp clamp = free_clamp(net);
    std::vector<State> x(shown.size(), 0);
    for (;;) {
      for (std::size_t k = 0; k < shown.size(); ++k) clamp[shown[k]] = x[k];
      double s = 0.0;
      for (std::size_t j = 0; j < members.size(); ++j) {
        s += members[j].alpha *
             (tree_sum_product(net, ex.trees[members[j].tree_id], pots[j], clamp).log_partition - log_z[j]);
      }
      terms.push_back(s);
      std::size_t k = 0;
      while (k < shown.size() && ++x[k] == net.state_size(shown[k])) x[k++] = 0;
      if (k == shown.size()) break;
    }
    total += std::exp(beta * (detail::log_sum_exp(terms) - H));
  }
  return total / static_cast<double>(data.size());
}

HolderCheck check_holder_inequality(const std::vector<std::vector<double>>& a, std::span<const double> r) {
  if (a.empty()) fail(ErrorCode::invalid_argument, "holder: empty matrix");
  const std::size_t m = r.size();
  if (m == 0) fail(ErrorCode::invalid_argument, "holder: no exponents");
  double inv = 0.0;
  for (double rj : r) {
    if (!(rj >= 1.0) || !std::isfinite(rj)) fail(ErrorCode::invalid_argument, "holder: exponents must be >= 1");
    inv += 1.0 / rj;
  }
  if (std::abs(inv - 1.0) > 1e-9) fail(ErrorCode::invalid_argument, "holder: sum of 1/r_j must be 1");
  std::vector<double> col(m, 0.0);
  HolderCheck out;
  for (const auto& row : a) {
    if (row.size() != m) fail(ErrorCode::invalid_argument, "holder: row length does not match exponents");
    double p = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(row[j] >= 0.0) || !std::isfinite(row[j])) {
        fail(ErrorCode::invalid_argument, "holder: entries must be finite and >= 0");
      }
      p *= row[j];
      col[j] += std::pow(row[j], r[j]);
    }
    out.lhs += p;
  }
  out.rhs = 1.0;
  for (std::size_t j = 0; j < m; ++j) out.rhs *= std::pow(col[j], 1.0 / r[j]);
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

namespace {

/// Minimizer of sum_i lambda_i exp(-beta a s_i) over a in (0, 1).
double golden_alpha(const std::vector<double>& log_lambda, const std::vector<double>& s, double beta) {
  const auto f = [&](double a) {
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = log_lambda[i] - beta * a * s[i];
    return detail::log_sum_exp(t);
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > 1e-9) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return std::clamp(0.5 * (lo + hi), 1e-9, 1.0 - 1e-9);
}

}  // namespace

Ensemble boost(std::span<const Example> data, const FeatureTemplate& tmpl, int num_trees,
               const BoostConfig& config, const std::function<void(const RoundRecord&)>& on_round) {
  validate(config);
  if (data.empty()) fail(ErrorCode::invalid_argument, "boost: empty data");
  if (num_trees < 1) fail(ErrorCode::invalid_argument, "boost: empty tree pool");
  const int D = static_cast<int>(data.size());
  const int R = num_trees;
  for (int t = 0; t < R; ++t) tree_mask(data, tmpl, t);  // validates every pool tree

  TrainConfig train = config.train;
  train.optimizer.max_iters = config.cg_iters;
  std::vector<ParameterVector> params(R, ParameterVector::Zero(tmpl.dimension()));
  std::vector<OptimizerState> states(R);
  std::deque<TreeEngine> engines;
  for (int t = 0; t < R; ++t) engines.emplace_back(t);

  Ensemble ens;
  ens.beta = config.beta;
  DataWeights lambda(D);
  std::vector<double> H(D, 0.0);
  double prev_log_loss = 0.0;
  ens.stop_reason = "max-rounds";

  for (int l = 1; l <= config.max_rounds; ++l) {
    const auto start = std::chrono::steady_clock::now();
    RoundRecord rec;
    rec.round = l;
    const auto lam = lambda.lambda();
    std::vector<std::vector<double>> per_instance(R);
    rec.tree_objectives.resize(R);
    rec.grad_evals.resize(R);
    rec.tree_sweeps.resize(R);
    for (int t = 0; t < R; ++t) {
      engines[t].reset_calls();
      TrainResult tr;
      try {
        tr = train_weighted_tree(t, data, tmpl, lam, train, params[t], &states[t], &engines[t]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numerical_error) throw;
        fail(ErrorCode::numerical_error,
             "round " + std::to_string(l) + ", tree " + std::to_string(t) + ": " + e.what());
      }
      params[t] = std::move(tr.params);
      rec.tree_objectives[t] = tr.objective;
      per_instance[t] = std::move(tr.report.per_instance);
      rec.grad_evals[t] = tr.evaluations;
      rec.tree_sweeps[t] = engines[t].calls() / 2;
    }
    int best = 0;
    for (int t = 1; t < R; ++t) {
      if (rec.tree_objectives[t] > rec.tree_objectives[best]) best = t;
    }
    rec.selected_tree = best;
    rec.weighted_loglik = rec.tree_objectives[best];
    const auto& h = per_instance[best];
    rec.s.resize(D);
    for (int i = 0; i < D; ++i) {
      rec.s[i] = h[i] - H[i];
      if (!std::isfinite(rec.s[i])) {
        fail(ErrorCode::numerical_error, "round " + std::to_string(l) + ": non-finite s at instance " +
                                             std::to_string(i));
      }
      rec.descent += lam[i] * rec.s[i];
    }
    // Round 1 compares against H_0 = 0, where s_1 = h_1 <= 0 always.
    if (l > 1 && rec.descent <= 0.0) {
      rec.accepted = false;
      for (const auto& m : ens.members) rec.alphas.push_back(m.alpha);
      rec.log_loss_h = prev_log_loss;
      rec.lambda_entropy = lambda.entropy();
      rec.lambda_sum = 0.0;
      for (double x : lam) rec.lambda_sum += x;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      ens.history.push_back(rec);
      if (on_round) on_round(ens.history.back());
      ens.stop_reason = "descent";
      break;
    }
    rec.accepted = true;
    double alpha = 1.0;
    if (l > 1) alpha = config.alpha_line_search ? golden_alpha(lambda.log_lambda(), rec.s, config.beta)
                                                : config.alpha_step;
    rec.alpha = alpha;
    for (auto& m : ens.members) m.alpha *= 1.0 - alpha;
    ens.members.push_back({best, params[best], alpha});
    for (const auto& m : ens.members) rec.alphas.push_back(m.alpha);

    std::vector<double> factor(D);
    for (int i = 0; i < D; ++i) {
      factor[i] = -config.beta * alpha * rec.s[i];
      if (factor[i] > 0.0) rec.lambda_up.push_back(i);
    }
    lambda.multiply(factor);
    for (int i = 0; i < D; ++i) H[i] = (1.0 - alpha) * H[i] + alpha * h[i];

    rec.log_loss_h = log_holder_loss(H, config.beta);
    rec.loss_increased = l > 1 && rec.log_loss_h > prev_log_loss + 1e-12 * std::abs(prev_log_loss);
    prev_log_loss = rec.log_loss_h;
    rec.lambda_entropy = lambda.entropy();
    for (double x : lambda.lambda()) rec.lambda_sum += x;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ens.history.push_back(rec);
    if (on_round) on_round(ens.history.back());
  }
  ens.combined = combine_parameters(ens.members);
  ens.lambda = lambda.lambda();
  ens.H = std::move(H);
  return ens;
}

LikelihoodReport guided_loss(std::span<const Example> data, const FeatureTemplate& tmpl,
                             const ParameterVector& params, std::span<const double> alphas,
                             double beta, const ComputeOptions& compute) {
  if (data.empty()) fail(ErrorCode::invalid_argument, "guided loss: empty data");
  if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorCode::invalid_argument, "beta must be in (0,1]");
  double asum = 0.0;
  for (double a : alphas) {
    if (!(a >= 0.0)) fail(ErrorCode::invalid_argument, "guided loss: alphas must be >= 0");
    asum += a;
  }
  if (alphas.empty() || std::abs(asum - 1.0) > 1e-9) {
    fail(ErrorCode::invalid_argument, "guided loss: alphas must sum to 1");
  }
  const int D = static_cast<int>(data.size());
  const int R = static_cast<int>(alphas.size());
  std::vector<double> H(D, 0.0);
  std::vector<ParameterVector> g(D);
  detail::parallel_for(D, compute.threads, [&](int i) {
    g[i] = ParameterVector::Zero(tmpl.dimension());
    for (int t = 0; t < R; ++t) {
      const TreeEngine engine(t);
      ParameterVector gt = ParameterVector::Zero(tmpl.dimension());
      H[i] += alphas[t] * instance_loglik(data[i], tmpl, params, engine, &gt);
      g[i] += alphas[t] * gt;
    }
  });
  LikelihoodReport rep;
  rep.value = log_holder_loss(H, beta);
  rep.gradient = ParameterVector::Zero(tmpl.dimension());
  for (int i = 0; i < D; ++i) {
    const double lam = std::exp(-beta * H[i] - rep.value - std::log(static_cast<double>(D)));
    rep.gradient -= beta * lam * g[i];
  }
  rep.per_instance = std::move(H);
  return rep;
}

GuidedMleResult parallel_guided_mle(std::span<const Example> data, const FeatureTemplate& tmpl,
                                    std::span<const double> alphas, double beta,
                                    const TrainConfig& config, ParameterVector init) {
  if (init.size() == 0) init = ParameterVector::Zero(tmpl.dimension());
  if (init.size() != tmpl.dimension()) {
    fail(ErrorCode::invalid_argument, "initial parameters do not match feature dimension");
  }
  GuidedMleResult out;
  const Objective objective = [&](const ParameterVector& x, ParameterVector& grad) {
    const auto rep = guided_loss(data, tmpl, x, alphas, beta, config.compute);
    grad = rep.gradient + config.l2 * x;
    return rep.value + 0.5 * config.l2 * x.squaredNorm();
  };
  const auto opt = minimize_cg(objective, std::move(init), config.optimizer);
  for (const auto& entry : opt.log) out.trajectory.push_back(entry.objective);
  out.params = opt.x;
  out.log_loss = opt.value - 0.5 * config.l2 * opt.x.squaredNorm();
  out.iterations = opt.iterations;
  return out;
}

}  // namespace mrf
