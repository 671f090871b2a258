#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "recibound/bounds.hpp"
#include "recibound/core.hpp"
#include "recibound/io.hpp"
#include "recibound/learner.hpp"
#include "recibound/reciprocal.hpp"
#include "recibound/rng.hpp"
#include "recibound/transport.hpp"

namespace recibound {

enum class ValidationSuite { distortion, concentration, oracle_ot, paper_replication };

inline std::string to_string(ValidationSuite s) {
  switch (s) {
    case ValidationSuite::distortion: return "distortion";
    case ValidationSuite::concentration: return "concentration";
    case ValidationSuite::oracle_ot: return "oracle_ot";
    case ValidationSuite::paper_replication: return "paper_replication";
  }
  return "unknown";
}

/// Outcome of one Monte Carlo suite. `worst_slack` is the smallest margin by
/// which any checked inequality held (negative means a violation).
struct ValidationReport {
  ValidationSuite suite = ValidationSuite::oracle_ot;
  long trials = 0;
  long violations = 0;
  double worst_slack = 0.0;
  bool passed = false;
  std::string details_path;
  json details;
};

inline json validation_report_to_json(const ValidationReport& r) {
  json j;
  j["suite"] = to_string(r.suite);
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["worst_slack"] = r.worst_slack;
  j["passed"] = r.passed;
  if (!r.details_path.empty()) j["details_path"] = r.details_path;
  return j;
}

namespace detail {

inline int trial_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("REC_BOUNDS_THREADS")) {
    const long cap = std::atol(env);
    if (cap >= 1 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return static_cast<int>(hw);
}

/// Run fn(trial_index) for every index, in parallel, results merged by
/// index order. Each trial must derive its own RNG state from the index.
template <typename Fn>
void parallel_trials(long count, Fn&& fn) {
  const int threads = trial_threads();
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= count) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

inline Instance draw_from_atoms(const std::vector<WeightedAtom>& atoms,
                                std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& a : atoms) {
    acc += a.weight;
    if (u < acc) return a.point;
  }
  return atoms.back().point;
}

}  // namespace detail

/// Draw a synthetic dataset from a discrete atom mixture. Pool rows drop
/// their labels (pseudo-labeling fills them in later).
inline DataSet generate_synthetic(const SyntheticSpec& spec, const SpaceSpec& space) {
  for (const auto& a : spec.true_distribution)
    if (!a.point.valid_in(space))
      throw std::invalid_argument("generate_synthetic: atom outside the declared space");
  std::mt19937_64 rng(spec.generator_seed);
  DataSet out;
  out.labeled.reserve(spec.n_labeled);
  out.pool.reserve(spec.n_pool);
  for (long i = 0; i < spec.n_labeled; ++i)
    out.labeled.push_back(detail::draw_from_atoms(spec.true_distribution, rng));
  for (long i = 0; i < spec.n_pool; ++i) {
    Instance z = detail::draw_from_atoms(spec.true_distribution, rng);
    z.y = 0.0;
    out.pool.push_back(std::move(z));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suite: oracle_ot — LP solver vs permutation brute force
// ---------------------------------------------------------------------------

inline ValidationReport validate_oracle_ot(long trials, std::uint64_t seed,
                                           double tolerance = 1e-9) {
  struct TrialOut {
    double diff = 0.0;
    int n = 0;
    double p = 1.0;
  };
  std::vector<TrialOut> results(trials);

  detail::parallel_trials(trials, [&](long i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = 2 + static_cast<int>(uniform_index(rng, 5));  // 2..6
    const double p = (i % 2 == 0) ? 1.0 : 2.0;
    const int d_x = (p == 1.0) ? 2 : 4;  // keep d > 2p
    const auto space = SpaceSpec::unit_cube(d_x, 100.0, p);
    std::vector<Instance> a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k].y = uniform01(rng);
      b[k].y = uniform01(rng);
      a[k].x.resize(d_x);
      b[k].x.resize(d_x);
      for (int c = 0; c < d_x; ++c) {
        a[k].x[c] = uniform01(rng);
        b[k].x[c] = uniform01(rng);
      }
    }
    const auto P = make_empirical(a);
    const auto Q = make_empirical(b);
    const double lp = wasserstein(P, Q, space).distance;
    const double bf = wasserstein_bruteforce(P, Q, space);
    results[i] = TrialOut{std::abs(lp - bf), n, p};
  });

  ValidationReport rep;
  rep.suite = ValidationSuite::oracle_ot;
  rep.trials = trials;
  rep.worst_slack = tolerance;
  json worst_detail;
  for (long i = 0; i < trials; ++i) {
    const double slack = tolerance - results[i].diff;
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      worst_detail = {{"trial", i}, {"n", results[i].n}, {"p", results[i].p},
                      {"abs_diff", results[i].diff}};
    }
    if (results[i].diff > tolerance) ++rep.violations;
  }
  rep.passed = rep.violations == 0;
  rep.details["tolerance"] = tolerance;
  if (!worst_detail.is_null()) rep.details["worst_trial"] = worst_detail;
  return rep;
}

// ---------------------------------------------------------------------------
// Suite: distortion — exact Wasserstein against the geometric bound
// ---------------------------------------------------------------------------

struct DistortionRunResult {
  long violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double measured_ls = 0.0;
  double plug_in_ls = 0.0;
  int horizon = 0;
  std::string mode;
};

namespace detail {

/// Random self-training problem: features uniform in the box, labels from a
/// random hyperplane through a sigmoid.
inline DataSet random_selftrain_data(const SpaceSpec& space, long n_labeled,
                                     long n_pool, std::mt19937_64& rng) {
  std::vector<double> theta_star(space.d_x());
  for (auto& v : theta_star) v = uniform(rng, -4.0, 4.0);
  auto draw_x = [&]() {
    std::vector<double> x(space.d_x());
    for (int k = 0; k < space.d_x(); ++k)
      x[k] = uniform(rng, space.feature_box()[k].lo, space.feature_box()[k].hi);
    return x;
  };
  DataSet out;
  for (long i = 0; i < n_labeled; ++i) {
    Instance z;
    z.x = draw_x();
    double s = 0.0;
    for (int k = 0; k < space.d_x(); ++k) s += theta_star[k] * (z.x[k] - 0.5);
    z.y = uniform01(rng) < sigmoid(4.0 * s) ? 1.0 : 0.0;
    out.labeled.push_back(std::move(z));
  }
  for (long i = 0; i < n_pool; ++i) {
    Instance z;
    z.x = draw_x();
    z.y = 0.0;
    out.pool.push_back(std::move(z));
  }
  return out;
}

inline DistortionRunResult check_distortion_run(std::uint64_t run_seed, int variant) {
  std::mt19937_64 rng(run_seed);
  const auto space = SpaceSpec::unit_cube(2);
  const long n = 20 + static_cast<long>(uniform_index(rng, 41));  // 20..60
  const int T = 10 + static_cast<int>(uniform_index(rng, 11));    // 10..20

  AdaptationConfig adapt;
  adapt.seed = rng();
  switch (variant % 3) {
    case 0:
      adapt.mode = AdaptationMode::greedy_add;
      adapt.m = 1;
      break;
    case 1:
      adapt.mode = AdaptationMode::nongreedy_replace;
      adapt.m = 1;
      break;
    default:
      adapt.mode = AdaptationMode::nongreedy_replace;
      adapt.m = 2;
      break;
  }
  adapt.selection_temperature = (variant % 2 == 0) ? 0.0 : 0.3;
  adapt.replace_policy =
      (variant % 4 < 2) ? ReplacePolicy::oldest_pseudo : ReplacePolicy::random_seeded;

  const long pool_needed = static_cast<long>(T) * adapt.m + 4;
  const auto data = random_selftrain_data(space, n, pool_needed, rng);

  const bool ridge = variant % 2 == 1;
  const LossSpec loss(ridge ? LossKind::ridge_logistic : LossKind::logistic,
                      ridge ? 0.05 : 0.0, space);

  const auto path = run_reciprocal(data.labeled, data.pool, T, loss, adapt);

  DistortionRunResult res;
  res.horizon = path.horizon;
  res.mode = adapt.mode == AdaptationMode::greedy_add ? "greedy_add" : "nongreedy_replace";

  std::vector<double> steps;
  for (const auto& rec : path.iterations)
    if (rec.step_wasserstein) steps.push_back(*rec.step_wasserstein);

  double measured = 0.0;
  for (std::size_t k = 1; k < steps.size(); ++k)
    if (steps[k - 1] > 0.0) measured = std::max(measured, steps[k] / steps[k - 1]);
  res.measured_ls = measured;
  double plug_in = measured;
  if (adapt.mode == AdaptationMode::greedy_add && adapt.m == 1)
    plug_in = std::max(plug_in, static_cast<double>(n - 1) / static_cast<double>(n));
  res.plug_in_ls = plug_in;

  const double dz = diameter_z(space);
  const double tol = 1e-9;

  // Per-step cap against the pre-step sample size.
  for (std::size_t k = 1; k < path.iterations.size(); ++k) {
    const auto& rec = path.iterations[k];
    const long n_pre = static_cast<long>(path.iterations[k - 1].sample.size());
    const double cap =
        std::pow(static_cast<double>(adapt.m) / static_cast<double>(n_pre),
                 1.0 / space.p()) * dz;
    const double slack = cap + tol - *rec.step_wasserstein;
    res.worst_slack = std::min(res.worst_slack, cap - *rec.step_wasserstein);
    if (slack < 0.0) ++res.violations;
  }

  // Whole-path distortion at every recorded horizon.
  const auto& P0 = path.iterations.front().sample;
  for (std::size_t k = 1; k < path.iterations.size(); ++k) {
    const double moved = wasserstein(P0, path.iterations[k].sample, space).distance;
    const double bound = distortion_bound(plug_in, static_cast<long>(k), adapt.m,
                                          n, space.p(), dz);
    res.worst_slack = std::min(res.worst_slack, bound - moved);
    if (moved > bound + tol) ++res.violations;
  }
  return res;
}

}  // namespace detail

inline ValidationReport validate_distortion(long runs, std::uint64_t seed) {
  std::vector<DistortionRunResult> results(runs);
  detail::parallel_trials(runs, [&](long i) {
    results[i] = detail::check_distortion_run(
        mix_seed(seed, static_cast<std::uint64_t>(i)), static_cast<int>(i));
  });

  ValidationReport rep;
  rep.suite = ValidationSuite::distortion;
  rep.trials = runs;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (const auto& r : results) {
    rep.violations += r.violations;
    rep.worst_slack = std::min(rep.worst_slack, r.worst_slack);
  }
  rep.passed = rep.violations == 0;
  json per_run = json::array();
  for (long i = 0; i < runs; ++i)
    per_run.push_back({{"run", i},
                       {"mode", results[i].mode},
                       {"horizon", results[i].horizon},
                       {"measured_ls", results[i].measured_ls},
                       {"plug_in_ls", results[i].plug_in_ls},
                       {"violations", results[i].violations},
                       {"worst_slack", results[i].worst_slack}});
  rep.details["runs"] = std::move(per_run);
  return rep;
}

// ---------------------------------------------------------------------------
// Suite: concentration — coverage of the initial-sample radius
// ---------------------------------------------------------------------------

/// Fixed discrete ground truth for the coverage experiment: 8 seeded atoms
/// in the unit cube with nonuniform weights. Small enough that
/// W_p(sample, truth) is exactly computable every trial.
inline std::vector<WeightedAtom> concentration_ground_truth(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xa70b5ULL));
  std::vector<WeightedAtom> atoms(8);
  double sum = 0.0;
  for (auto& a : atoms) {
    a.point.y = uniform01(rng);
    a.point.x = {uniform01(rng), uniform01(rng)};
    a.weight = 0.2 + uniform01(rng);
    sum += a.weight;
  }
  for (auto& a : atoms) a.weight /= sum;
  atoms.back().weight += 1.0 - std::accumulate(atoms.begin(), atoms.end(), 0.0,
                                               [](double s, const WeightedAtom& a) {
                                                 return s + a.weight;
                                               });
  return atoms;
}

inline ValidationReport validate_concentration(long trials, std::uint64_t seed) {
  const auto space = SpaceSpec::unit_cube(2);
  const auto atoms = concentration_ground_truth(seed);
  const auto constants = default_constants(space);

  EmpiricalDistribution truth;
  for (const auto& a : atoms) {
    truth.points.push_back(a.point);
    truth.weights.push_back(a.weight);
  }
  truth.validate();

  const std::vector<long> sizes = {50, 200};
  const std::vector<double> deltas = {0.05, 0.1};

  ValidationReport rep;
  rep.suite = ValidationSuite::concentration;
  rep.trials = trials * static_cast<long>(sizes.size() * deltas.size());
  rep.worst_slack = std::numeric_limits<double>::infinity();
  rep.passed = true;

  json combos = json::array();
  for (long n : sizes) {
    std::vector<double> distances(trials);
    detail::parallel_trials(trials, [&](long i) {
      std::mt19937_64 rng(
          mix_seed(seed, static_cast<std::uint64_t>(i * 1000003 + n)));
      std::vector<Instance> draw(n);
      for (long k = 0; k < n; ++k) draw[k] = detail::draw_from_atoms(atoms, rng);
      const auto sample = make_empirical(draw);
      distances[i] = wasserstein(sample, truth, space).distance;
    });
    for (double delta : deltas) {
      const double beta0 = concentration_radius(n, delta, space.p(), space.d(),
                                                constants.C_a, constants.C_b);
      long covered = 0;
      for (double w : distances)
        if (w <= beta0) ++covered;
      const double coverage = static_cast<double>(covered) / static_cast<double>(trials);
      const double slack = coverage - (1.0 - delta);
      rep.worst_slack = std::min(rep.worst_slack, slack);
      rep.violations += trials - covered;
      if (coverage < 1.0 - delta) rep.passed = false;
      combos.push_back({{"n", n},
                        {"delta", delta},
                        {"beta0", beta0},
                        {"coverage", coverage},
                        {"required", 1.0 - delta}});
    }
  }
  rep.details["combos"] = std::move(combos);
  return rep;
}

// ---------------------------------------------------------------------------
// Suite: paper_replication — the worked-example targets
// ---------------------------------------------------------------------------

inline ValidationReport validate_paper_replication() {
  BoundInputs in;
  in.n = 10000;
  in.m = 1;
  in.T = 100;
  in.p = 1.0;
  in.d = 3;
  in.D_Z = std::sqrt(3.0);
  in.L_s = 9999.0 / 10000.0;
  in.L_ell = std::sqrt(2.0);
  in.delta = 0.05;
  in.C_a = 8.0;
  in.C_b = 1.0 / 12.0;

  const auto rep_bound = anytime_gap_bound(in);
  const auto stop = stopping_rule(0.2, in);

  struct Target {
    const char* name;
    double value;
    double want;
    double tol;
  };
  const Target targets[] = {
      {"initial_gap", rep_bound.initial_gap, 0.1627, 0.0005},
      {"reciprocal_gap", rep_bound.reciprocal_gap, 0.0244, 0.0005},
      {"total_gap", rep_bound.total, 0.1871, 0.001},
      {"stopping_t_star", stop.t_star, 153.46, 0.15},
  };

  ValidationReport rep;
  rep.suite = ValidationSuite::paper_replication;
  rep.trials = 5;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  json list = json::array();
  for (const auto& t : targets) {
    const double err = std::abs(t.value - t.want);
    const double slack = t.tol - err;
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (err > t.tol) ++rep.violations;
    list.push_back({{"target", t.name}, {"value", t.value}, {"want", t.want},
                    {"tolerance", t.tol}, {"abs_error", err}});
  }
  if (stop.t_floor != 153) ++rep.violations;
  list.push_back({{"target", "stopping_floor"},
                  {"value", stop.t_floor},
                  {"want", 153}});
  rep.passed = rep.violations == 0;
  rep.details["targets"] = std::move(list);
  return rep;
}

inline ValidationReport run_validation(ValidationSuite suite, long trials,
                                       std::uint64_t seed) {
  switch (suite) {
    case ValidationSuite::oracle_ot: return validate_oracle_ot(trials, seed);
    case ValidationSuite::distortion: return validate_distortion(trials, seed);
    case ValidationSuite::concentration: return validate_concentration(trials, seed);
    case ValidationSuite::paper_replication: return validate_paper_replication();
  }
  throw std::invalid_argument("run_validation: unknown suite");
}

}  // namespace recibound
