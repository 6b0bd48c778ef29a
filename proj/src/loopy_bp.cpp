#include <algorithm>
#include <cmath>

#include "inference_detail.hpp"
#include "mrforest/inference.hpp"

namespace mrf {

namespace {

using detail::kNegInf;

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

}  // namespace

InferenceResult loopy_bp(const MarkovNetwork& net, const Potentials& pot, const Clamp& clamp,
                         const LoopyBpOptions& options) {
  if (!(options.rate > 0.0)) fail(ErrorCode::invalid_argument, "loopy_bp: rate must be > 0");
  if (options.max_rounds < 1) fail(ErrorCode::invalid_argument, "loopy_bp: max_rounds must be >= 1");
  detail::check_potentials(net, pot);
  const int n = net.num_nodes();
  const int m = net.num_edges();
  const bool max_mode = options.mode == BpMode::max;
  const auto dom = detail::domains(net, clamp);

  // Directed message 2e carries edge.a -> edge.b, 2e+1 carries edge.b -> edge.a;
  // both are indexed by the receiver's states and normalized (sum or max = 1).
  std::vector<std::vector<double>> msg(2 * m), next(2 * m);
  for (int e = 0; e < m; ++e) {
    msg[2 * e].assign(net.state_size(net.edge(e).b), kNegInf);
    msg[2 * e + 1].assign(net.state_size(net.edge(e).a), kNegInf);
    for (State s : dom[net.edge(e).b]) msg[2 * e][s] = 0.0;
    for (State s : dom[net.edge(e).a]) msg[2 * e + 1][s] = 0.0;
  }
  next = msg;
  const auto incoming = [&](NodeId v, const Neighbor& nb) -> const std::vector<double>& {
    return msg[2 * nb.edge + (net.edge(nb.edge).b == v ? 0 : 1)];
  };

  // total[v] = local potential + all incoming messages.
  std::vector<std::vector<double>> total(n);
  const auto refresh_totals = [&]() {
    for (int v = 0; v < n; ++v) {
      total[v].assign(net.state_size(v), kNegInf);
      for (State s : dom[v]) {
        double t = pot.node[v][s];
        for (const auto& nb : net.neighbors(v)) t += incoming(v, nb)[s];
        total[v][s] = t;
      }
    }
  };

  std::vector<double> scratch;
  InferenceResult res;
  res.converged = false;
  refresh_totals();
  for (int round = 1; round <= options.max_rounds; ++round) {
    double change = 0.0;
    for (int e = 0; e < m; ++e) {
      for (int dir = 0; dir < 2; ++dir) {
        const NodeId u = dir == 0 ? net.edge(e).a : net.edge(e).b;  // sender
        const NodeId v = dir == 0 ? net.edge(e).b : net.edge(e).a;  // receiver
        const auto& back = msg[2 * e + (1 - dir)];                  // v -> u
        auto& out = next[2 * e + dir];
        for (State sv : dom[v]) {
          double acc = kNegInf;
          if (max_mode) {
            for (State su : dom[u]) {
              acc = std::max(acc, total[u][su] - back[su] + detail::edge_pot(net, pot, e, u, su, sv));
            }
          } else {
            scratch.clear();
            for (State su : dom[u]) {
              scratch.push_back(total[u][su] - back[su] + detail::edge_pot(net, pot, e, u, su, sv));
            }
            acc = detail::log_sum_exp(scratch);
          }
          out[sv] = acc;
        }
        double norm = kNegInf;
        if (max_mode) {
          for (State sv : dom[v]) norm = std::max(norm, out[sv]);
        } else {
          scratch.clear();
          for (State sv : dom[v]) scratch.push_back(out[sv]);
          norm = detail::log_sum_exp(scratch);
        }
        if (!std::isfinite(norm)) fail(ErrorCode::numerical_error, "loopy_bp: non-finite message");
        const auto& old = msg[2 * e + dir];
        for (State sv : dom[v]) {
          out[sv] -= norm;
          change = std::max(change, std::abs(std::exp(out[sv]) - std::exp(old[sv])));
        }
      }
    }
    msg.swap(next);
    refresh_totals();
    res.rounds = round;
    if (change < options.rate) {
      res.converged = true;
      break;
    }
  }

  res.node_marginals = detail::zero_node_table(net);
  for (int v = 0; v < n; ++v) {
    scratch.clear();
    for (State s : dom[v]) scratch.push_back(total[v][s]);
    const double z = max_mode ? *std::max_element(scratch.begin(), scratch.end())
                              : detail::log_sum_exp(scratch);
    double sum = 0.0;
    for (State s : dom[v]) sum += res.node_marginals[v][s] = std::exp(total[v][s] - z);
    for (State s : dom[v]) res.node_marginals[v][s] /= sum;
  }

  if (max_mode) {
    std::vector<State> x(n);
    for (int v = 0; v < n; ++v) {
      State arg = dom[v][0];
      for (State s : dom[v]) {
        if (total[v][s] > total[v][arg]) arg = s;
      }
      x[v] = arg;
    }
    res.log_partition = assignment_score(net, pot, x);
    res.map_assignment = std::move(x);
    return res;
  }

  // Edge beliefs and the Bethe estimate:
  // log Z ~= E_b[theta] + sum_e H(b_e) - sum_v (deg_v - 1) H(b_v).
  res.edge_marginals.resize(m);
  double bethe = 0.0;
  for (int e = 0; e < m; ++e) {
    const Edge& edge = net.edge(e);
    const int sb = net.state_size(edge.b);
    const auto& ab = msg[2 * e];      // a -> b
    const auto& ba = msg[2 * e + 1];  // b -> a
    auto& em = res.edge_marginals[e];
    em.assign(static_cast<std::size_t>(net.state_size(edge.a)) * sb, 0.0);
    scratch.clear();
    for (State sa : dom[edge.a]) {
      for (State s2 : dom[edge.b]) {
        scratch.push_back(total[edge.a][sa] - ba[sa] + total[edge.b][s2] - ab[s2] +
                          pot.edge[e][sa * sb + s2]);
      }
    }
    const double z = detail::log_sum_exp(scratch);
    std::size_t k = 0;
    for (State sa : dom[edge.a]) {
      for (State s2 : dom[edge.b]) {
        const double p = std::exp(scratch[k++] - z);
        em[sa * sb + s2] = p;
        bethe += p * pot.edge[e][sa * sb + s2];
      }
    }
    bethe += entropy(em);
  }
  for (int v = 0; v < n; ++v) {
    for (State s : dom[v]) bethe += res.node_marginals[v][s] * pot.node[v][s];
    const auto deg = static_cast<double>(net.neighbors(v).size());
    bethe -= (deg - 1.0) * entropy(res.node_marginals[v]);
  }
  res.log_partition = bethe;
  return res;
}

}  // namespace mrf
