#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "recibound/core.hpp"

namespace recibound {

enum class LossKind { logistic, ridge_logistic };

/// Loss configuration. `ridge_logistic` adds (lambda/2)||theta||^2, which
/// supplies the strong-convexity modulus the excess-risk bounds need.
struct LossSpec {
  LossKind kind = LossKind::logistic;
  double ridge_lambda = 0.0;
  SpaceSpec space;

  LossSpec(LossKind k, double lambda, SpaceSpec s)
      : kind(k), ridge_lambda(lambda), space(std::move(s)) {
    if (kind == LossKind::ridge_logistic && !(ridge_lambda > 0.0))
      throw std::invalid_argument("LossSpec: ridge_logistic requires ridge_lambda > 0");
    if (kind == LossKind::logistic && ridge_lambda != 0.0)
      throw std::invalid_argument("LossSpec: plain logistic requires ridge_lambda == 0");
  }

  double lambda() const {
    return kind == LossKind::ridge_logistic ? ridge_lambda : 0.0;
  }
};

/// Analytic constants of the loss family over a given space.
struct LossConstants {
  double L_ell = 0.0;    // Lipschitz constant of the loss in theta
  double kappa = 0.0;    // Lipschitz constant of the gradient
  double gamma = 0.0;    // strong-convexity modulus (0 for plain logistic)
  double F_bound = 0.0;  // uniform bound on hypothesis outputs <theta, x>
};

/// Parameter vector, kept inside the declared theta box.
struct Model {
  std::vector<double> theta;
};

inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

namespace detail {

inline double softplus(double u) {
  // log(1 + e^u) without overflow.
  return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) {
  return std::sqrt(dot(a, a));
}

inline void project_into_box(std::vector<double>& theta,
                             const std::vector<Interval>& box) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] < box[i].lo) theta[i] = box[i].lo;
    if (theta[i] > box[i].hi) theta[i] = box[i].hi;
  }
}

}  // namespace detail

/// Soft-label logistic loss. A soft label q in [0,1] is evaluated as the
/// class mixture q * l(+1) + (1-q) * l(-1) with margins +-<theta, x>;
/// hard labels 1.0 / 0.0 recover the usual two-class form.
inline double loss(double y, const std::vector<double>& x, const Model& model,
                   const LossSpec& spec) {
  if (x.size() != model.theta.size())
    throw std::invalid_argument("loss: theta/x dimension mismatch");
  const double s = detail::dot(model.theta, x);
  const double q = y;
  double v = q * detail::softplus(-s) + (1.0 - q) * detail::softplus(s);
  if (spec.lambda() > 0.0) {
    const double t2 = detail::dot(model.theta, model.theta);
    v += 0.5 * spec.lambda() * t2;
  }
  return v;
}

/// Gradient of the soft-label loss in theta: (sigma(<theta,x>) - q) x,
/// plus lambda * theta for the ridge variant.
inline std::vector<double> loss_gradient(double y, const std::vector<double>& x,
                                         const Model& model, const LossSpec& spec) {
  if (x.size() != model.theta.size())
    throw std::invalid_argument("loss_gradient: theta/x dimension mismatch");
  const double s = detail::dot(model.theta, x);
  // sigma(s) - q, written so hard labels keep full precision in the tails
  // (sigma(s) - 1 would cancel to 0 once sigma(s) rounds to 1).
  const double coef = (1.0 - y) * sigmoid(s) - y * sigmoid(-s);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    g[i] = coef * x[i] + spec.lambda() * model.theta[i];
  return g;
}

/// Lipschitz constant of the logistic loss in theta:
/// D_X / (1 + exp(-D_X * D_Theta)), with D_Theta taken in the box-side-norm
/// convention that the worked-example arithmetic uses.
inline double loss_lipschitz_constant(
    const SpaceSpec& space,
    DiameterConvention convention = DiameterConvention::box_side_norm) {
  const auto [dx, dtheta] = diameters_x_theta(space, convention);
  return dx / (1.0 + std::exp(-dx * dtheta));
}

/// All analytic constants of the loss family at once.
inline LossConstants derive_constants(
    const LossSpec& spec,
    DiameterConvention convention = DiameterConvention::box_side_norm) {
  const auto [dx, dtheta_sup] =
      diameters_x_theta(spec.space, DiameterConvention::sup_norm);
  LossConstants c;
  // The convention flag only affects the logistic part; the ridge gradient
  // lambda*theta is bounded by the literal sup norm of the box.
  c.L_ell = loss_lipschitz_constant(spec.space, convention) +
            spec.lambda() * dtheta_sup;
  // Hessian of the logistic part is sigma'(s) x x^T with sigma' <= 1/4.
  c.kappa = 0.25 * dx * dx + spec.lambda();
  c.gamma = spec.lambda();
  c.F_bound = dx * dtheta_sup;
  return c;
}

/// Weighted average loss over an empirical distribution.
inline double risk(const EmpiricalDistribution& P, const Model& model,
                   const LossSpec& spec) {
  P.validate();
  double r = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i)
    r += P.weights[i] * loss(P.points[i].y, P.points[i].x, model, spec);
  return r;
}

/// Gradient of the empirical risk.
inline std::vector<double> risk_gradient(const EmpiricalDistribution& P,
                                         const Model& model, const LossSpec& spec) {
  std::vector<double> g(model.theta.size(), 0.0);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const auto gi = loss_gradient(P.points[i].y, P.points[i].x, model, spec);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += P.weights[i] * gi[k];
  }
  return g;
}

struct ErmResult {
  Model model;
  bool converged = false;     // projected-gradient norm reached tol
  int iterations = 0;
  double final_risk = 0.0;
  double projected_gradient_norm = 0.0;
};

/// Deterministic empirical risk minimizer: projected gradient descent over
/// the theta box with backtracking line search, started at theta = 0
/// (projected into the box). Terminates when || theta - Pi(theta - g) ||
/// drops to tol. Hitting max_iter is reported, not thrown.
inline ErmResult erm(const EmpiricalDistribution& P, const LossSpec& spec,
                     double tol = 1e-8, int max_iter = 50000) {
  if (!(tol > 0.0)) throw std::invalid_argument("erm: tol must be positive");
  P.validate();
  const auto& box = spec.space.theta_box();
  const std::size_t dim = box.size();

  Model m;
  m.theta.assign(dim, 0.0);
  detail::project_into_box(m.theta, box);

  double f = risk(P, m, spec);
  double eta = 1.0;
  ErmResult out;

  int it = 0;
  for (; it < max_iter; ++it) {
    const auto g = risk_gradient(P, m, spec);

    // Projection residual at the current (adaptive) step scale. The step
    // grows while progress is possible, so exponentially flat tails keep
    // moving until the box clips instead of stalling on a tiny gradient.
    std::vector<double> probe = m.theta;
    for (std::size_t k = 0; k < dim; ++k) probe[k] -= std::max(eta, 1.0) * g[k];
    detail::project_into_box(probe, box);
    double pg = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double dthe = m.theta[k] - probe[k];
      pg += dthe * dthe;
    }
    pg = std::sqrt(pg);
    out.projected_gradient_norm = pg;
    if (pg <= tol) {
      out.converged = true;
      break;
    }

    // Backtracking with a growing warm start; the growth matters for flat
    // logistic tails, where fixed steps stall far from the box boundary.
    bool accepted = false;
    while (eta >= 1e-18) {
      std::vector<double> cand = m.theta;
      for (std::size_t k = 0; k < dim; ++k) cand[k] -= eta * g[k];
      detail::project_into_box(cand, box);
      double quad = 0.0, lin = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = cand[k] - m.theta[k];
        lin += g[k] * d;
        quad += d * d;
      }
      Model cm;
      cm.theta = cand;
      const double fc = risk(P, cm, spec);
      if (fc <= f + lin + quad / (2.0 * eta)) {
        m.theta = std::move(cand);
        f = fc;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // step size underflow: no further progress possible
    eta = std::min(eta * 2.0, 1e250);
  }

  out.iterations = it;
  out.model = std::move(m);
  out.final_risk = f;
  return out;
}

}  // namespace recibound
