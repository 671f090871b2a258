#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "recibound/core.hpp"
#include "recibound/learner.hpp"
#include "recibound/rng.hpp"
#include "recibound/transport.hpp"

namespace recibound {

enum class AdaptationMode { greedy_add, nongreedy_replace };
enum class ReplacePolicy { oldest_pseudo, random_seeded };

/// How the sample changes per iteration. `m` is fixed over the run.
struct AdaptationConfig {
  AdaptationMode mode = AdaptationMode::greedy_add;
  int m = 1;
  double selection_temperature = 0.0;  // 0 = deterministic top-m
  ReplacePolicy replace_policy = ReplacePolicy::oldest_pseudo;
  std::uint64_t seed = 0;

  void validate() const {
    if (m < 1) throw std::invalid_argument("AdaptationConfig: m must be >= 1");
    if (selection_temperature < 0.0)
      throw std::invalid_argument("AdaptationConfig: temperature must be >= 0");
  }
};

struct IterationRecord {
  int t = 0;
  Model theta;
  EmpiricalDistribution sample;
  std::optional<double> step_wasserstein;  // W_p(P_t, P_{t-1}); absent at t=0
  double train_risk = 0.0;
  bool erm_converged = true;
};

struct ReciprocalPath {
  std::vector<IterationRecord> iterations;
  std::vector<Instance> pool_remaining;
  bool pool_exhausted = false;
  int horizon = 0;  // actual number of adaptation steps executed
};

/// sigma(<theta, x>): the model's soft prediction, used directly as the
/// pseudo-label so the label assignment stays Lipschitz in theta.
inline double pseudo_label(const Model& model, const std::vector<double>& x) {
  return sigmoid(detail::dot(model.theta, x));
}

/// Select m pool indices by confidence |sigma(<theta,x>) - 0.5|.
///
/// temperature > 0 draws a without-replacement sample whose odds follow
/// softmax(confidence / temperature) (Gumbel top-m); temperature == 0 is the
/// deterministic top-m with lower index winning ties.
inline std::vector<std::size_t> select_candidates(const Model& model,
                                                  const std::vector<Instance>& pool,
                                                  int m, double temperature,
                                                  std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("select_candidates: m must be >= 1");
  if (pool.size() < static_cast<std::size_t>(m))
    throw std::invalid_argument("select_candidates: pool smaller than m");

  std::vector<double> key(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    key[i] = std::abs(pseudo_label(model, pool[i].x) - 0.5);

  if (temperature > 0.0) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < key.size(); ++i)
      key[i] = key[i] / temperature + gumbel(rng);
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  order.resize(static_cast<std::size_t>(m));
  return order;
}

namespace detail {

/// Per-point provenance, carried alongside the sample so the non-greedy
/// replacement policy can find its victims. entry_t == 0 marks original
/// labeled data.
struct SampleMeta {
  std::vector<int> entry_t;
};

struct AdaptOutcome {
  EmpiricalDistribution sample;
  std::vector<Instance> pool;
  SampleMeta meta;
};

inline AdaptOutcome adapt_sample_impl(const Model& model,
                                      const EmpiricalDistribution& P,
                                      const SampleMeta& meta,
                                      const std::vector<Instance>& pool,
                                      const AdaptationConfig& config,
                                      int iteration) {
  config.validate();
  P.validate();
  if (pool.empty()) throw std::invalid_argument("adapt_sample: empty pool");
  if (pool.size() < static_cast<std::size_t>(config.m))
    throw std::invalid_argument("adapt_sample: pool smaller than m");

  const auto picked = select_candidates(model, pool, config.m,
                                        config.selection_temperature, config.seed);

  std::vector<Instance> incoming;
  incoming.reserve(picked.size());
  for (std::size_t idx : picked) {
    Instance z = pool[idx];
    z.y = pseudo_label(model, z.x);
    incoming.push_back(std::move(z));
  }

  AdaptOutcome out;
  // Remove picked points from the pool, preserving order.
  std::vector<char> taken(pool.size(), 0);
  for (std::size_t idx : picked) taken[idx] = 1;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!taken[i]) out.pool.push_back(pool[i]);

  std::vector<Instance> pts = P.points;
  std::vector<int> entries = meta.entry_t;
  if (entries.size() != pts.size())
    entries.assign(pts.size(), 0);

  if (config.mode == AdaptationMode::greedy_add) {
    for (auto& z : incoming) {
      pts.push_back(std::move(z));
      entries.push_back(iteration);
    }
  } else {
    // Replacement order: pseudo-labeled points first (oldest entry first),
    // then original labeled points by position. The first iterations of a
    // fresh run therefore consume labeled points until pseudo ones exist.
    std::vector<std::size_t> victims(pts.size());
    for (std::size_t i = 0; i < victims.size(); ++i) victims[i] = i;
    if (config.replace_policy == ReplacePolicy::oldest_pseudo) {
      std::stable_sort(victims.begin(), victims.end(),
                       [&](std::size_t a, std::size_t b) {
                         const bool pa = entries[a] > 0, pb = entries[b] > 0;
                         if (pa != pb) return pa;  // pseudo before labeled
                         return entries[a] < entries[b];
                       });
    } else {
      std::mt19937_64 rng(mix_seed(config.seed, 0x7265706cULL));
      for (std::size_t i = victims.size(); i > 1; --i)
        std::swap(victims[i - 1], victims[uniform_index(rng, i)]);
    }
    victims.resize(static_cast<std::size_t>(config.m));
    std::sort(victims.begin(), victims.end());
    for (std::size_t k = 0; k < victims.size(); ++k) {
      pts[victims[k]] = std::move(incoming[k]);
      entries[victims[k]] = iteration;
    }
  }

  out.sample = make_empirical(std::move(pts));
  out.meta.entry_t = std::move(entries);
  return out;
}

}  // namespace detail

/// One sample-adaptation step. Greedy mode appends m pseudo-labeled pool
/// points (weights renormalized to uniform over n+m); non-greedy mode
/// replaces m points per the replacement policy, keeping n fixed. Selected
/// points leave the pool.
inline std::pair<EmpiricalDistribution, std::vector<Instance>> adapt_sample(
    const Model& model, const EmpiricalDistribution& P,
    const std::vector<Instance>& pool, const AdaptationConfig& config) {
  detail::SampleMeta meta;
  meta.entry_t.assign(P.size(), 0);
  auto out = detail::adapt_sample_impl(model, P, meta, pool, config, 1);
  return {std::move(out.sample), std::move(out.pool)};
}

struct RunSettings {
  double erm_tol = 1e-8;
  int erm_max_iter = 50000;
};

/// Execute the full loop: initial ERM on the labeled data, then T rounds of
/// sample adaptation followed by ERM, recording every model, every sample,
/// and every consecutive Wasserstein movement. Stops early (with
/// pool_exhausted set) when fewer than m pool points remain.
inline ReciprocalPath run_reciprocal(const std::vector<Instance>& labeled,
                                     const std::vector<Instance>& pool, int T,
                                     const LossSpec& loss,
                                     const AdaptationConfig& adapt,
                                     const RunSettings& settings = {}) {
  if (labeled.empty())
    throw std::invalid_argument("run_reciprocal: labeled set is empty");
  if (T < 0) throw std::invalid_argument("run_reciprocal: T must be >= 0");
  adapt.validate();

  ReciprocalPath path;
  EmpiricalDistribution current = make_empirical(labeled);
  detail::SampleMeta meta;
  meta.entry_t.assign(current.size(), 0);
  std::vector<Instance> remaining = pool;

  auto fit = erm(current, loss, settings.erm_tol, settings.erm_max_iter);
  IterationRecord rec0;
  rec0.t = 0;
  rec0.theta = fit.model;
  rec0.sample = current;
  rec0.train_risk = fit.final_risk;
  rec0.erm_converged = fit.converged;
  path.iterations.push_back(std::move(rec0));

  for (int t = 1; t <= T; ++t) {
    if (remaining.size() < static_cast<std::size_t>(adapt.m)) {
      path.pool_exhausted = true;
      break;
    }
    AdaptationConfig step_cfg = adapt;
    step_cfg.seed = mix_seed(adapt.seed, static_cast<std::uint64_t>(t));
    auto outcome = detail::adapt_sample_impl(
        path.iterations.back().theta, current, meta, remaining, step_cfg, t);

    const double step_w =
        wasserstein(current, outcome.sample, loss.space).distance;

    current = std::move(outcome.sample);
    meta = std::move(outcome.meta);
    remaining = std::move(outcome.pool);

    auto next_fit = erm(current, loss, settings.erm_tol, settings.erm_max_iter);
    IterationRecord rec;
    rec.t = t;
    rec.theta = next_fit.model;
    rec.sample = current;
    rec.step_wasserstein = step_w;
    rec.train_risk = next_fit.final_risk;
    rec.erm_converged = next_fit.converged;
    path.iterations.push_back(std::move(rec));
    path.horizon = t;
  }

  path.pool_remaining = std::move(remaining);
  return path;
}

/// Empirical pathwise contraction witness: the largest consecutive ratio
/// W_p(P_t, P_{t-1}) / W_p(P_{t-1}, P_{t-2}). Zero-denominator steps are
/// skipped; fewer than two usable ratios is an error.
inline double estimate_ls(const ReciprocalPath& path) {
  std::vector<double> steps;
  for (const auto& rec : path.iterations)
    if (rec.step_wasserstein) steps.push_back(*rec.step_wasserstein);
  double best = 0.0;
  int usable = 0;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    if (steps[k - 1] <= 0.0) continue;
    best = std::max(best, steps[k] / steps[k - 1]);
    ++usable;
  }
  if (usable < 2)
    throw std::invalid_argument("estimate_ls: fewer than 2 usable step ratios");
  return best;
}

/// First iteration t where both the parameter movement and the sample
/// movement fall to tol, or nullopt if the path never settles.
inline std::optional<int> detect_convergence(const ReciprocalPath& path,
                                             double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("detect_convergence: tol must be > 0");
  for (std::size_t k = 1; k < path.iterations.size(); ++k) {
    const auto& prev = path.iterations[k - 1];
    const auto& cur = path.iterations[k];
    if (!cur.step_wasserstein) continue;
    double dtheta = 0.0;
    for (std::size_t i = 0; i < cur.theta.theta.size(); ++i) {
      const double d = cur.theta.theta[i] - prev.theta.theta[i];
      dtheta += d * d;
    }
    if (std::sqrt(dtheta) <= tol && *cur.step_wasserstein <= tol)
      return cur.t;
  }
  return std::nullopt;
}

}  // namespace recibound
