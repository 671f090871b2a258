#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "recibound/core.hpp"

namespace recibound {

/// Optimal transport plan between two empirical distributions.
/// mass[i][j] is the mass moved from P's atom i to Q's atom j; cost is the
/// achieved value of sum mass[i][j] * d_Z(z_i, z'_j)^p (NOT the 1/p root).
struct Coupling {
  std::vector<std::vector<double>> mass;
  double cost = 0.0;
};

struct WassersteinResult {
  double distance = 0.0;  // W_p = cost^(1/p)
  Coupling coupling;
};

namespace detail {

inline double pow_p(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  return std::pow(x, p);
}

inline double root_p(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return std::sqrt(x);
  return std::pow(x, 1.0 / p);
}

/// Exact uncapacitated min-cost transportation on a dense bipartite graph,
/// solved by successive shortest augmenting paths with node potentials
/// (Dijkstra on reduced costs). Supplies and demands are arbitrary
/// nonnegative reals with equal totals.
class TransportSolver {
 public:
  TransportSolver(const std::vector<double>& supply,
                  const std::vector<double>& demand,
                  const std::vector<std::vector<double>>& cost)
      : n_(supply.size()), m_(demand.size()), cost_(cost) {
    rem_supply_ = supply;
    rem_demand_ = demand;
    flow_.assign(n_, std::vector<double>(m_, 0.0));
    pot_.assign(n_ + m_, 0.0);
  }

  Coupling solve() {
    // Each augmentation exhausts a source, a sink, or empties a backward
    // arc; the guard only trips if numerical drift stalls progress.
    const std::size_t max_rounds = n_ * m_ + n_ + m_ + 16;
    std::size_t rounds = 0;
    while (total_remaining_supply() > kMassEps) {
      if (++rounds > max_rounds)
        throw std::runtime_error("wasserstein: transport solver failed to converge");
      augment_once();
    }
    Coupling result;
    result.mass = flow_;
    double c = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j) c += flow_[i][j] * cost_[i][j];
    result.cost = c;
    return result;
  }

 private:
  static constexpr double kMassEps = 1e-15;

  double total_remaining_supply() const {
    return std::accumulate(rem_supply_.begin(), rem_supply_.end(), 0.0);
  }

  // Nodes 0..n-1 are sources, n..n+m-1 sinks.
  void augment_once() {
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t V = n_ + m_;
    std::vector<double> dist(V, inf);
    std::vector<int> parent(V, -1);
    std::vector<char> done(V, 0);

    for (std::size_t i = 0; i < n_; ++i)
      if (rem_supply_[i] > kMassEps) dist[i] = 0.0;

    std::size_t best_sink = V;
    while (true) {
      // Dense Dijkstra: pick the closest unfinished node.
      std::size_t u = V;
      double du = inf;
      for (std::size_t k = 0; k < V; ++k)
        if (!done[k] && dist[k] < du) { du = dist[k]; u = k; }
      if (u == V) break;
      done[u] = 1;
      if (u >= n_ && rem_demand_[u - n_] > kMassEps) { best_sink = u; break; }

      if (u < n_) {
        // Forward arcs source u -> every sink.
        for (std::size_t j = 0; j < m_; ++j) {
          const std::size_t v = n_ + j;
          if (done[v]) continue;
          double rc = cost_[u][j] + pot_[u] - pot_[v];
          if (rc < 0.0) rc = 0.0;  // roundoff guard; exact arcs have rc >= 0
          if (du + rc < dist[v]) { dist[v] = du + rc; parent[v] = static_cast<int>(u); }
        }
      } else {
        // Backward arcs sink u -> sources with positive flow.
        const std::size_t j = u - n_;
        for (std::size_t i = 0; i < n_; ++i) {
          if (done[i] || flow_[i][j] <= kMassEps) continue;
          double rc = -cost_[i][j] + pot_[u] - pot_[i];
          if (rc < 0.0) rc = 0.0;
          if (du + rc < dist[i]) { dist[i] = du + rc; parent[i] = static_cast<int>(u); }
        }
      }
    }

    if (best_sink == V)
      throw std::runtime_error("wasserstein: no augmenting path (unbalanced marginals)");

    const double reach = dist[best_sink];
    // Standard potential update keeps every reduced cost nonnegative.
    for (std::size_t k = 0; k < V; ++k)
      pot_[k] += std::min(dist[k], reach);

    // Trace the path back to its source, collecting the bottleneck.
    std::vector<std::size_t> path;  // alternating sink/source/... ending at a source
    std::size_t cur = best_sink;
    path.push_back(cur);
    while (parent[cur] >= 0) {
      cur = static_cast<std::size_t>(parent[cur]);
      path.push_back(cur);
    }
    const std::size_t origin = path.back();
    double amount = std::min(rem_supply_[origin], rem_demand_[best_sink - n_]);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      // Edge path[k+1] -> path[k]; backward arcs are sink -> source hops.
      if (path[k + 1] >= n_)
        amount = std::min(amount, flow_[path[k] ][path[k + 1] - n_]);
    }

    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const std::size_t to = path[k];
      const std::size_t from = path[k + 1];
      if (from < n_)
        flow_[from][to - n_] += amount;  // forward: push
      else
        flow_[to][from - n_] -= amount;  // backward: cancel
    }
    rem_supply_[origin] -= amount;
    rem_demand_[best_sink - n_] -= amount;
    if (rem_supply_[origin] < kMassEps) rem_supply_[origin] = 0.0;
    if (rem_demand_[best_sink - n_] < kMassEps) rem_demand_[best_sink - n_] = 0.0;
  }

  std::size_t n_, m_;
  const std::vector<std::vector<double>>& cost_;
  std::vector<double> rem_supply_, rem_demand_;
  std::vector<std::vector<double>> flow_;
  std::vector<double> pot_;
};

inline std::vector<std::vector<double>> cost_matrix(
    const EmpiricalDistribution& P, const EmpiricalDistribution& Q,
    const SpaceSpec& space) {
  std::vector<std::vector<double>> c(P.size(), std::vector<double>(Q.size()));
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < Q.size(); ++j)
      c[i][j] = pow_p(instance_distance(P.points[i], Q.points[j], space), space.p());
  return c;
}

}  // namespace detail

/// Exact Wasserstein-p distance and an optimal coupling, via the discrete
/// transportation LP. Entropic or otherwise approximate solvers are not
/// acceptable here: the distortion validation needs certified optima.
inline WassersteinResult wasserstein(const EmpiricalDistribution& P,
                                     const EmpiricalDistribution& Q,
                                     const SpaceSpec& space) {
  P.validate();
  Q.validate();
  for (const auto& pt : P.points)
    if (static_cast<int>(pt.x.size()) != space.d_x())
      throw std::invalid_argument("wasserstein: P has points of wrong dimension");
  for (const auto& pt : Q.points)
    if (static_cast<int>(pt.x.size()) != space.d_x())
      throw std::invalid_argument("wasserstein: Q has points of wrong dimension");

  auto cost = detail::cost_matrix(P, Q, space);

  // Rescale Q's weights so the totals match exactly; both sum to 1 within
  // 1e-12 already, and the LP needs a balanced instance.
  const double sa = std::accumulate(P.weights.begin(), P.weights.end(), 0.0);
  const double sb = std::accumulate(Q.weights.begin(), Q.weights.end(), 0.0);
  std::vector<double> demand = Q.weights;
  for (double& w : demand) w *= sa / sb;

  detail::TransportSolver solver(P.weights, demand, cost);
  WassersteinResult out;
  out.coupling = solver.solve();
  out.distance = detail::root_p(std::max(out.coupling.cost, 0.0), space.p());
  return out;
}

/// Exhaustive oracle: minimizes over all n! assignments of uniform equal-size
/// distributions. Exact by enumeration; scope-limited to n <= 8.
inline double wasserstein_bruteforce(const EmpiricalDistribution& P,
                                     const EmpiricalDistribution& Q,
                                     const SpaceSpec& space) {
  P.validate();
  Q.validate();
  const std::size_t n = P.size();
  if (n != Q.size())
    throw std::invalid_argument("wasserstein_bruteforce: sizes must be equal");
  if (n > 8)
    throw std::invalid_argument("wasserstein_bruteforce: n must be <= 8");
  const double uniform_w = 1.0 / static_cast<double>(n);
  for (double w : P.weights)
    if (std::abs(w - uniform_w) > 1e-9)
      throw std::invalid_argument("wasserstein_bruteforce: P weights must be uniform");
  for (double w : Q.weights)
    if (std::abs(w - uniform_w) > 1e-9)
      throw std::invalid_argument("wasserstein_bruteforce: Q weights must be uniform");

  auto cost = detail::cost_matrix(P, Q, space);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost[i][perm[i]];
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return detail::root_p(best * uniform_w, space.p());
}

}  // namespace recibound
