#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "recibound/core.hpp"

namespace recibound {

/// Positive constants of the concentration inequality for the initial
/// i.i.d. sample. The exemplary pair C_a = 2^(d/p), C_b = 1/(4 D_Z^2) is
/// the default everywhere; both are user-overridable.
struct ConcentrationConstants {
  double C_a = 0.0;
  double C_b = 0.0;
};

inline ConcentrationConstants default_constants(const SpaceSpec& space) {
  const double dz = diameter_z(space);
  ConcentrationConstants c;
  c.C_a = std::pow(2.0, static_cast<double>(space.d()) / space.p());
  c.C_b = 1.0 / (4.0 * dz * dz);
  return c;
}

/// Everything the bound formulas consume. Only the fields a given theorem
/// needs are validated when that theorem is evaluated.
struct BoundInputs {
  long n = 0;               // initial sample size
  long m = 1;               // units changed per iteration
  long T = 0;               // iteration horizon (finite-T forms)
  double p = 1.0;           // Wasserstein order
  int d = 0;                // instance-space dimension
  double D_Z = 0.0;         // diameter of Z
  double L_s = 0.0;         // sample-adaptation Lipschitz constant
  double L_ell = 0.0;       // loss Lipschitz constant
  double delta = 0.05;      // failure probability budget
  double C_a = 0.0;
  double C_b = 0.0;
  double kappa = 0.0;       // gradient Lipschitz constant
  double gamma = 0.0;       // strong-convexity modulus
  double L_a = 0.0;         // Lipschitz constant of P -> argmin risk
  double F_bound = 0.0;     // uniform bound on hypothesis outputs
  double covering_entropy = 0.0;  // entropy integral of the hypothesis class
};

enum class BoundKind {
  gen_gap,                // convergent generalization gap
  anytime_gap,            // finite-T generalization gap, anytime valid
  excess_risk,            // convergent excess risk
  anytime_excess_risk,    // finite-T excess risk, anytime valid
  data_dependent_excess,  // excess risk with a measured risk difference
};

inline std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::gen_gap: return "gen-gap";
    case BoundKind::anytime_gap: return "anytime-gap";
    case BoundKind::excess_risk: return "excess-risk";
    case BoundKind::anytime_excess_risk: return "anytime-excess-risk";
    case BoundKind::data_dependent_excess: return "data-dependent-excess";
  }
  return "unknown";
}

/// Evaluated bound, broken into the terms the decomposition names.
/// total is always the exact sum of the present terms.
struct BoundReport {
  BoundKind theorem_id = BoundKind::gen_gap;
  double initial_gap = 0.0;
  double reciprocal_gap = 0.0;
  double complexity_term = 0.0;
  std::optional<double> data_term;
  double total = 0.0;
  double confidence = 0.0;

  void finish() {
    total = initial_gap + reciprocal_gap + complexity_term +
            (data_term ? *data_term : 0.0);
  }
};

namespace detail {

/// sum_{t=0}^{T-1} r^t, continuously extended to T at r == 1.
inline double geometric_sum(double ratio, long T) {
  if (T <= 0) return 0.0;
  if (ratio == 1.0) return static_cast<double>(T);
  if (ratio == 0.0) return 1.0;
  return std::expm1(static_cast<double>(T) * std::log(ratio)) / (ratio - 1.0);
}

inline double per_step_cap(long m, long n, double p, double D_Z) {
  return std::pow(static_cast<double>(m) / static_cast<double>(n), 1.0 / p) * D_Z;
}

}  // namespace detail

/// beta_T: how far T adaptation steps can move the initial sample in
/// Wasserstein space. Geometric in the contraction ratio L_s, with the
/// continuous extension T * (m/n)^(1/p) * D_Z at L_s == 1.
inline double distortion_bound(double L_s, long T, long m, long n, double p,
                               double D_Z) {
  if (L_s < 0.0) throw std::invalid_argument("distortion_bound: L_s must be >= 0");
  if (T < 0) throw std::invalid_argument("distortion_bound: T must be >= 0");
  return detail::geometric_sum(L_s, T) * detail::per_step_cap(m, n, p, D_Z);
}

/// beta_infinity: the T -> infinity limit, finite only for L_s < 1.
inline double distortion_limit(double L_s, long m, long n, double p, double D_Z) {
  if (!(L_s >= 0.0 && L_s < 1.0))
    throw std::domain_error("distortion_limit: requires 0 <= L_s < 1 (limit diverges)");
  return detail::per_step_cap(m, n, p, D_Z) / (1.0 - L_s);
}

/// beta_0: radius such that W_p(initial sample, law) <= beta_0 with
/// probability at least 1 - delta.
///
/// The inversion uses the effective exponential rate 4*C_b*n (equal to
/// n / D_Z^2 at the default C_b), which is the arithmetic the worked
/// logistic example and its stopping rule follow.
inline double concentration_radius(long n, double delta, double p, int d,
                                   double C_a, double C_b) {
  if (n < 1) throw std::invalid_argument("concentration_radius: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("concentration_radius: delta must be in (0,1)");
  if (!(static_cast<double>(d) > 2.0 * p))
    throw std::invalid_argument("concentration_radius: requires d > 2p");
  if (!(C_b > 0.0)) throw std::invalid_argument("concentration_radius: C_b must be > 0");
  if (C_a < delta)
    throw std::domain_error("concentration_radius: C_a < delta makes the radius undefined");
  const double inner =
      std::log(C_a / delta) / (4.0 * C_b * static_cast<double>(n));
  return std::pow(inner, p / static_cast<double>(d));
}

namespace detail {

/// Integral over (0, 1] by tanh-sinh (double-exponential) quadrature.
/// Handles the integrable endpoint singularity of the entropy integrand.
/// `f_of_offset(s)` must evaluate the integrand at distance s from 0.
template <typename F>
double tanh_sinh_01(F f_of_offset, double abs_tol) {
  constexpr double kHalfPi = 1.5707963267948966;
  constexpr double kTMax = 4.5;

  auto node = [&](double t, double& x_offset, double& weight) {
    const double u = kHalfPi * std::sinh(t);
    // 1 + tanh(u) = 2*sigmoid(2u), stable near the left endpoint.
    const double s = 1.0 / (1.0 + std::exp(-2.0 * u));
    x_offset = s;  // in (0, 1)
    const double ch = std::cosh(u);
    weight = kHalfPi * std::cosh(t) / (ch * ch) * 0.5;
  };

  double h = 1.0;
  double sum = 0.0;
  {
    double x, w;
    node(0.0, x, w);
    sum = w * f_of_offset(x);
    for (double t = h; t <= kTMax; t += h) {
      double xp, wp, xm, wm;
      node(t, xp, wp);
      node(-t, xm, wm);
      sum += wp * f_of_offset(xp) + wm * f_of_offset(xm);
    }
  }
  double integral = h * sum;

  for (int level = 1; level <= 12; ++level) {
    h *= 0.5;
    double add = 0.0;
    for (double t = h; t <= kTMax; t += 2.0 * h) {
      double xp, wp, xm, wm;
      node(t, xp, wp);
      node(-t, xm, wm);
      add += wp * f_of_offset(xp) + wm * f_of_offset(xm);
    }
    const double refined = h * (sum + add);
    sum += add;
    const double err = std::abs(refined - integral);
    integral = refined;
    if (level >= 3 && err <= abs_tol) break;
  }
  return integral;
}

}  // namespace detail

/// Entropy integral of a bounded linear predictor class:
/// integral_0^1 sqrt( d_theta * log(1 + 2 * D_Theta * D_X / eps) ) d eps,
/// from the parametric covering bound N(eps) <= (1 + 2 D_Theta D_X / eps)^d_theta.
inline double covering_entropy_linear(int d_theta, double radius_product) {
  if (d_theta < 1)
    throw std::invalid_argument("covering_entropy_linear: d_theta must be >= 1");
  if (radius_product < 0.0)
    throw std::invalid_argument("covering_entropy_linear: radius_product must be >= 0");
  if (radius_product == 0.0) return 0.0;
  const double dth = static_cast<double>(d_theta);
  const double R2 = 2.0 * radius_product;
  return detail::tanh_sinh_01(
      [&](double eps) { return std::sqrt(dth * std::log1p(R2 / eps)); }, 1e-8);
}

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void validate_common(const BoundInputs& in) {
  require(in.n >= 1, "bound inputs: n must be >= 1");
  require(in.m >= 1, "bound inputs: m must be >= 1");
  require(in.p >= 1.0 && in.p <= 2.0, "bound inputs: p must be in [1,2]");
  require(static_cast<double>(in.d) > 2.0 * in.p, "bound inputs: requires d > 2p");
  require(in.D_Z > 0.0, "bound inputs: D_Z must be > 0");
  require(in.L_ell >= 0.0, "bound inputs: L_ell must be >= 0");
  require(in.delta > 0.0 && in.delta < 1.0, "bound inputs: delta must be in (0,1)");
  require(in.C_a > 0.0 && in.C_b > 0.0, "bound inputs: C_a, C_b must be > 0");
  require(in.L_s >= 0.0, "bound inputs: L_s must be >= 0");
}

inline double initial_gap_term(const BoundInputs& in) {
  return in.L_ell *
         concentration_radius(in.n, in.delta, in.p, in.d, in.C_a, in.C_b);
}

inline double complexity_term(const BoundInputs& in) {
  require(in.F_bound >= 0.0, "bound inputs: F_bound must be >= 0");
  require(in.covering_entropy >= 0.0, "bound inputs: covering_entropy must be >= 0");
  return in.F_bound * in.L_ell / std::sqrt(static_cast<double>(in.n)) *
         (24.0 * in.covering_entropy +
          2.0 * std::sqrt(2.0 * std::log(1.0 / in.delta)));
}

}  // namespace detail

/// Generalization gap of the convergent solution:
/// train risk + L_ell * beta_0 + L_ell * (m/n)^(1/p) * D_Z / (1 - L_s),
/// holding with probability 1 - delta.
inline BoundReport gen_gap_bound(const BoundInputs& in, double train_risk = 0.0) {
  detail::validate_common(in);
  if (!(in.L_s < 1.0))
    throw std::domain_error("gen_gap_bound: requires L_s < 1 (limit form diverges)");
  BoundReport r;
  r.theorem_id = BoundKind::gen_gap;
  r.initial_gap = detail::initial_gap_term(in);
  r.reciprocal_gap =
      in.L_ell * distortion_limit(in.L_s, in.m, in.n, in.p, in.D_Z);
  r.data_term = train_risk;
  r.confidence = 1.0 - in.delta;
  r.finish();
  return r;
}

/// Finite-T generalization gap, valid simultaneously for all horizons up to
/// T with a single confidence level 1 - delta.
inline BoundReport anytime_gap_bound(const BoundInputs& in, double train_risk = 0.0) {
  detail::validate_common(in);
  if (in.T < 0) throw std::invalid_argument("anytime_gap_bound: T must be >= 0");
  BoundReport r;
  r.theorem_id = BoundKind::anytime_gap;
  r.initial_gap = detail::initial_gap_term(in);
  r.reciprocal_gap =
      in.L_ell * distortion_bound(in.L_s, in.T, in.m, in.n, in.p, in.D_Z);
  r.data_term = train_risk;
  r.confidence = 1.0 - in.delta;
  r.finish();
  return r;
}

/// Excess risk of the convergent solution (strongly convex losses only):
/// L_ell * beta_0
///   + L_ell * L_a * (m/n)^(1/p) * D_Z / (1 - L_s * kappa / gamma)
///   + F * L_ell / sqrt(n) * (24 * entropy + 2 * sqrt(2 ln(1/delta))),
/// holding with probability 1 - delta/2.
inline BoundReport excess_risk_bound(const BoundInputs& in) {
  detail::validate_common(in);
  if (!(in.gamma > 0.0))
    throw std::domain_error(
        "excess_risk_bound: gamma must be > 0 (strong convexity required; "
        "use ridge_logistic)");
  detail::require(in.kappa >= 0.0, "bound inputs: kappa must be >= 0");
  detail::require(in.L_a > 0.0, "bound inputs: L_a must be > 0");
  const double ratio = in.L_s * in.kappa / in.gamma;
  if (!(ratio < 1.0))
    throw std::domain_error(
        "excess_risk_bound: requires L_s * kappa / gamma < 1 for the "
        "convergent form");
  BoundReport r;
  r.theorem_id = BoundKind::excess_risk;
  r.initial_gap = detail::initial_gap_term(in);
  r.reciprocal_gap = in.L_ell * in.L_a *
                     detail::per_step_cap(in.m, in.n, in.p, in.D_Z) /
                     (1.0 - ratio);
  r.complexity_term = detail::complexity_term(in);
  r.confidence = 1.0 - in.delta / 2.0;
  r.finish();
  return r;
}

/// Finite-T excess risk: the geometric form of the convergent bound, with
/// the continuous extension at L_s * kappa / gamma == 1.
inline BoundReport anytime_excess_risk_bound(const BoundInputs& in) {
  detail::validate_common(in);
  if (!(in.gamma > 0.0))
    throw std::domain_error(
        "anytime_excess_risk_bound: gamma must be > 0 (strong convexity "
        "required; use ridge_logistic)");
  detail::require(in.kappa >= 0.0, "bound inputs: kappa must be >= 0");
  detail::require(in.L_a > 0.0, "bound inputs: L_a must be > 0");
  if (in.T < 0) throw std::invalid_argument("anytime_excess_risk_bound: T must be >= 0");
  const double ratio = in.L_s * in.kappa / in.gamma;
  BoundReport r;
  r.theorem_id = BoundKind::anytime_excess_risk;
  r.initial_gap = detail::initial_gap_term(in);
  r.reciprocal_gap = in.L_ell * in.L_a * detail::geometric_sum(ratio, in.T) *
                     detail::per_step_cap(in.m, in.n, in.p, in.D_Z);
  r.complexity_term = detail::complexity_term(in);
  r.confidence = 1.0 - in.delta / 2.0;
  r.finish();
  return r;
}

/// Excess risk from a measured risk difference on the initial sample:
/// [R(P_0, theta_T) - R(P_0, theta_0)] + L_ell * beta_0 + complexity term.
/// The risk difference may be negative. Requires only an extra model
/// evaluation on P_0, not a refit.
inline BoundReport data_dependent_excess_bound(const BoundInputs& in,
                                               double risk_theta_T_on_P0,
                                               double risk_theta_0_on_P0) {
  detail::validate_common(in);
  BoundReport r;
  r.theorem_id = BoundKind::data_dependent_excess;
  r.initial_gap = detail::initial_gap_term(in);
  r.complexity_term = detail::complexity_term(in);
  r.data_term = risk_theta_T_on_P0 - risk_theta_0_on_P0;
  r.confidence = 1.0 - in.delta / 2.0;
  r.finish();
  return r;
}

enum class StoppingStatus { finite, unbounded };

struct StoppingResult {
  StoppingStatus status = StoppingStatus::finite;
  double t_star = 0.0;  // largest real T keeping the gap within budget
  long t_floor = 0;
};

/// Largest iteration count whose anytime gap terms stay within
/// epsilon_target, in closed form:
/// T* = log(1 - (eps - L_ell beta_0)(1 - L_s) / (L_ell (m/n)^(1/p) D_Z))
///        / log(L_s).
/// A budget at or below the initial gap is an error; a budget above the
/// T -> infinity gap returns unbounded.
inline StoppingResult stopping_rule(double epsilon_target, const BoundInputs& in) {
  detail::validate_common(in);
  if (!(in.L_s > 0.0 && in.L_s < 1.0))
    throw std::domain_error("stopping_rule: requires 0 < L_s < 1");
  const double g0 = detail::initial_gap_term(in);
  if (!(epsilon_target > g0))
    throw std::domain_error(
        "stopping_rule: budget exhausted at T=0 (epsilon_target <= initial gap)");
  const double step = in.L_ell * detail::per_step_cap(in.m, in.n, in.p, in.D_Z);
  const double u = (epsilon_target - g0) * (1.0 - in.L_s) / step;
  StoppingResult res;
  if (u >= 1.0) {
    res.status = StoppingStatus::unbounded;
    res.t_star = std::numeric_limits<double>::infinity();
    res.t_floor = -1;
    return res;
  }
  res.status = StoppingStatus::finite;
  res.t_star = std::log1p(-u) / std::log(in.L_s);
  res.t_floor = static_cast<long>(std::floor(res.t_star));
  return res;
}

}  // namespace recibound
