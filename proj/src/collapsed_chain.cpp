#include <algorithm>
#include <cmath>

#include "inference_detail.hpp"
#include "mrforest/inference.hpp"

namespace mrf {

namespace {

using detail::kNegInf;

// Past this total potential range per slice the scaled linear-space recursion
// could underflow, so the log-space recursion is used instead.
constexpr double kLinearRangeLimit = 600.0;

struct MegaChain {
  int levels = 0;
  int slices = 0;
  int mega = 1;                              // product of level state sizes
  std::vector<int> size;                     // per level
  std::vector<int> stride;                   // level 0 most significant
  std::vector<std::vector<EdgeId>> chain;    // [level][t]: (l,t)-(l,t+1)
  std::vector<std::vector<EdgeId>> cross;    // [level][t]: (l,t)-(l+1,t)
  std::vector<std::vector<int>> domain;      // [t]: allowed mega-states
  std::vector<std::vector<double>> local;    // [t][m]: node + cross potentials

  int digit(int m, int l) const { return (m / stride[l]) % size[l]; }

  // Transition log-potential from mega-state m at t-1 to m2 at t.
  double transition(const Potentials& pot, int t, int m, int m2) const {
    double s = 0.0;
    for (int l = 0; l < levels; ++l) {
      s += pot.edge[chain[l][t - 1]][digit(m, l) * size[l] + digit(m2, l)];
    }
    return s;
  }
};

MegaChain collapse(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp) {
  if (!net.grid()) fail(ErrorCode::unsupported_structure, "exact_collapsed_chain: not a grid network");
  MegaChain mc;
  mc.levels = net.grid()->levels;
  mc.slices = net.grid()->slices;
  const int L = mc.levels;
  const int T = mc.slices;
  if (net.num_edges() != L * (T - 1) + T * (L - 1)) {
    fail(ErrorCode::unsupported_structure, "exact_collapsed_chain: grid has extra or missing edges");
  }
  mc.size.resize(L);
  double product = 1.0;
  for (int l = 0; l < L; ++l) {
    mc.size[l] = net.state_size(net.node_at(l, 0));
    for (int t = 0; t < T; ++t) {
      if (net.state_size(net.node_at(l, t)) != mc.size[l]) {
        fail(ErrorCode::unsupported_structure, "exact_collapsed_chain: state size varies within a level");
      }
    }
    product *= mc.size[l];
  }
  if (product > kMegaStateLimit) {
    fail(ErrorCode::capacity_error, "exact_collapsed_chain: mega-state size exceeds 1e4");
  }
  mc.mega = static_cast<int>(product);
  mc.stride.assign(L, 1);
  for (int l = L - 2; l >= 0; --l) mc.stride[l] = mc.stride[l + 1] * mc.size[l + 1];

  const auto edge_between = [&](NodeId u, NodeId v) {
    const auto e = net.find_edge(u, v);
    if (!e) fail(ErrorCode::unsupported_structure, "exact_collapsed_chain: grid edge missing");
    return *e;
  };
  mc.chain.assign(L, {});
  mc.cross.assign(L, {});
  for (int l = 0; l < L; ++l) {
    for (int t = 0; t + 1 < T; ++t) mc.chain[l].push_back(edge_between(net.node_at(l, t), net.node_at(l, t + 1)));
    if (l + 1 < L) {
      for (int t = 0; t < T; ++t) mc.cross[l].push_back(edge_between(net.node_at(l, t), net.node_at(l + 1, t)));
    }
  }

  if (static_cast<int>(clamp.size()) != net.num_nodes()) {
    fail(ErrorCode::invalid_argument, "clamp size does not match network");
  }
  mc.domain.resize(T);
  mc.local.assign(T, std::vector<double>(mc.mega, kNegInf));
  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < mc.mega; ++m) {
      bool ok = true;
      double s = 0.0;
      for (int l = 0; l < L && ok; ++l) {
        const NodeId v = net.node_at(l, t);
        const int x = mc.digit(m, l);
        if (clamp[v] != kFree && clamp[v] != x) ok = false;
        s += pot.node[v][x];
      }
      if (!ok) continue;
      for (int l = 0; l + 1 < L; ++l) {
        s += pot.edge[mc.cross[l][t]][mc.digit(m, l) * mc.size[l + 1] + mc.digit(m, l + 1)];
      }
      mc.domain[t].push_back(m);
      mc.local[t][m] = s;
    }
    if (mc.domain[t].empty()) fail(ErrorCode::invalid_argument, "clamped state out of range");
  }
  return mc;
}

/// Per-slice transition matrix exp(tau - shift) over the full mega space.
bool linear_transitions(const MegaChain& mc, const Potentials& pot, int t,
                        std::vector<double>& mat, double& shift) {
  shift = 0.0;
  double range = 0.0;
  for (int l = 0; l < mc.levels; ++l) {
    const auto& psi = pot.edge[mc.chain[l][t - 1]];
    const auto [lo, hi] = std::minmax_element(psi.begin(), psi.end());
    shift += *hi;
    range += *hi - *lo;
  }
  if (range > kLinearRangeLimit) return false;
  mat.resize(static_cast<std::size_t>(mc.mega) * mc.mega);
  for (int m = 0; m < mc.mega; ++m) {
    for (int m2 = 0; m2 < mc.mega; ++m2) {
      mat[static_cast<std::size_t>(m) * mc.mega + m2] = std::exp(mc.transition(pot, t, m, m2) - shift);
    }
  }
  return true;
}

InferenceResult viterbi(const MarkovNetwork& net, const MegaChain& mc, const Potentials& pot) {
  const int T = mc.slices;
  std::vector<std::vector<double>> delta(T, std::vector<double>(mc.mega, kNegInf));
  std::vector<std::vector<int>> back(T, std::vector<int>(mc.mega, -1));
  for (int m : mc.domain[0]) delta[0][m] = mc.local[0][m];
  for (int t = 1; t < T; ++t) {
    for (int m2 : mc.domain[t]) {
      double top = kNegInf;
      int arg = -1;
      for (int m : mc.domain[t - 1]) {
        const double val = delta[t - 1][m] + mc.transition(pot, t, m, m2);
        if (arg < 0 || val > top) {
          top = val;
          arg = m;
        }
      }
      delta[t][m2] = mc.local[t][m2] + top;
      back[t][m2] = arg;
    }
  }
  int cur = -1;
  for (int m : mc.domain[T - 1]) {
    if (cur < 0 || delta[T - 1][m] > delta[T - 1][cur]) cur = m;
  }
  InferenceResult res;
  res.log_partition = delta[T - 1][cur];
  std::vector<State> x(net.num_nodes());
  for (int t = T - 1; t >= 0; --t) {
    for (int l = 0; l < mc.levels; ++l) x[net.node_at(l, t)] = mc.digit(cur, l);
    if (t > 0) cur = back[t][cur];
  }
  res.map_assignment = std::move(x);
  return res;
}

}  // namespace

InferenceResult exact_collapsed_chain(const MarkovNetwork& net, const Potentials& pot,
                                      const Clamp& clamp, bool max_product) {
  detail::check_potentials(net, pot);
  const MegaChain mc = collapse(net, pot, clamp);
  if (max_product) return viterbi(net, mc, pot);

  const int T = mc.slices;
  const int M = mc.mega;
  std::vector<std::vector<double>> alpha(T, std::vector<double>(M, kNegInf));
  std::vector<std::vector<double>> beta(T, std::vector<double>(M, kNegInf));
  std::vector<std::vector<double>> trans(T);  // linear transition matrices, empty if log path
  std::vector<double> shift(T, 0.0);
  for (int t = 1; t < T; ++t) {
    if (!linear_transitions(mc, pot, t, trans[t], shift[t])) trans[t].clear();
  }

  std::vector<double> scratch, a(M), r(M);
  for (int m : mc.domain[0]) alpha[0][m] = mc.local[0][m];
  for (int t = 1; t < T; ++t) {
    const auto& prev = alpha[t - 1];
    if (!trans[t].empty()) {
      const double top = *std::max_element(prev.begin(), prev.end());
      std::fill(r.begin(), r.end(), 0.0);
      for (int m : mc.domain[t - 1]) {
        const double am = std::exp(prev[m] - top);
        const double* row = trans[t].data() + static_cast<std::size_t>(m) * M;
        for (int m2 : mc.domain[t]) r[m2] += am * row[m2];
      }
      for (int m2 : mc.domain[t]) alpha[t][m2] = mc.local[t][m2] + top + shift[t] + std::log(r[m2]);
    } else {
      for (int m2 : mc.domain[t]) {
        scratch.clear();
        for (int m : mc.domain[t - 1]) scratch.push_back(prev[m] + mc.transition(pot, t, m, m2));
        alpha[t][m2] = mc.local[t][m2] + detail::log_sum_exp(scratch);
      }
    }
  }
  for (int m : mc.domain[T - 1]) beta[T - 1][m] = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    // b[m2] = local + beta at t+1
    std::vector<double> ahead(M, kNegInf);
    for (int m2 : mc.domain[t + 1]) ahead[m2] = mc.local[t + 1][m2] + beta[t + 1][m2];
    if (!trans[t + 1].empty()) {
      const double top = *std::max_element(ahead.begin(), ahead.end());
      for (int m2 : mc.domain[t + 1]) a[m2] = std::exp(ahead[m2] - top);
      for (int m : mc.domain[t]) {
        const double* row = trans[t + 1].data() + static_cast<std::size_t>(m) * M;
        double s = 0.0;
        for (int m2 : mc.domain[t + 1]) s += row[m2] * a[m2];
        beta[t][m] = top + shift[t + 1] + std::log(s);
      }
    } else {
      for (int m : mc.domain[t]) {
        scratch.clear();
        for (int m2 : mc.domain[t + 1]) scratch.push_back(mc.transition(pot, t + 1, m, m2) + ahead[m2]);
        beta[t][m] = detail::log_sum_exp(scratch);
      }
    }
  }

  InferenceResult res;
  {
    scratch.clear();
    for (int m : mc.domain[T - 1]) scratch.push_back(alpha[T - 1][m]);
    res.log_partition = detail::log_sum_exp(scratch);
  }
  if (!std::isfinite(res.log_partition)) {
    fail(ErrorCode::numerical_error, "exact_collapsed_chain: non-finite log-partition");
  }
  const double log_z = res.log_partition;

  res.node_marginals = detail::zero_node_table(net);
  res.edge_marginals.resize(net.num_edges());
  for (int e = 0; e < net.num_edges(); ++e) {
    res.edge_marginals[e].assign(
        static_cast<std::size_t>(net.state_size(net.edge(e).a)) * net.state_size(net.edge(e).b), 0.0);
  }
  for (int t = 0; t < T; ++t) {
    for (int m : mc.domain[t]) {
      const double p = std::exp(alpha[t][m] + beta[t][m] - log_z);
      for (int l = 0; l < mc.levels; ++l) {
        res.node_marginals[net.node_at(l, t)][mc.digit(m, l)] += p;
        if (l + 1 < mc.levels) {
          res.edge_marginals[mc.cross[l][t]][mc.digit(m, l) * mc.size[l + 1] + mc.digit(m, l + 1)] += p;
        }
      }
    }
  }
  // Pairwise mega marginals, normalized per slice pair, folded onto chain edges.
  std::vector<double> xi;
  for (int t = 1; t < T; ++t) {
    const auto& dom0 = mc.domain[t - 1];
    const auto& dom1 = mc.domain[t];
    xi.assign(dom0.size() * dom1.size(), 0.0);
    double total = 0.0;
    if (!trans[t].empty()) {
      const double top_a = *std::max_element(alpha[t - 1].begin(), alpha[t - 1].end());
      double top_b = kNegInf;
      for (int m2 : dom1) top_b = std::max(top_b, mc.local[t][m2] + beta[t][m2]);
      for (std::size_t j = 0; j < dom1.size(); ++j) a[j] = std::exp(mc.local[t][dom1[j]] + beta[t][dom1[j]] - top_b);
      for (std::size_t i = 0; i < dom0.size(); ++i) {
        const double am = std::exp(alpha[t - 1][dom0[i]] - top_a);
        const double* row = trans[t].data() + static_cast<std::size_t>(dom0[i]) * M;
        for (std::size_t j = 0; j < dom1.size(); ++j) {
          const double v = am * row[dom1[j]] * a[j];
          xi[i * dom1.size() + j] = v;
          total += v;
        }
      }
      for (double& v : xi) v /= total;
    } else {
      for (std::size_t i = 0; i < dom0.size(); ++i) {
        for (std::size_t j = 0; j < dom1.size(); ++j) {
          xi[i * dom1.size() + j] = std::exp(alpha[t - 1][dom0[i]] + mc.transition(pot, t, dom0[i], dom1[j]) +
                                             mc.local[t][dom1[j]] + beta[t][dom1[j]] - log_z);
        }
      }
    }
    for (std::size_t i = 0; i < dom0.size(); ++i) {
      for (std::size_t j = 0; j < dom1.size(); ++j) {
        const double p = xi[i * dom1.size() + j];
        for (int l = 0; l < mc.levels; ++l) {
          res.edge_marginals[mc.chain[l][t - 1]][mc.digit(dom0[i], l) * mc.size[l] + mc.digit(dom1[j], l)] += p;
        }
      }
    }
  }
  return res;
}

}  // namespace mrf
