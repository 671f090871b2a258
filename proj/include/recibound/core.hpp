#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace recibound {

/// Closed interval [lo, hi] on the real line.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
};

/// Which convention to use when turning a parameter box into the scalar
/// radius D_Theta that enters the loss Lipschitz constant.
///
/// `sup_norm` is the literal sup of the Euclidean norm over the box.
/// `box_side_norm` is the Euclidean norm of the per-coordinate side lengths,
/// which is what the worked logistic example in the reference material uses
/// (for [-100,100]^2 it gives sqrt(200^2+200^2) instead of sqrt(100^2+100^2)).
enum class DiameterConvention { sup_norm, box_side_norm };

/// Geometry of the instance space Z = Y x X and the parameter box Theta.
///
/// Every bound constant in this library (D_Z, D_X, D_Theta, the Wasserstein
/// order p, the dimension d) is derived from one of these.
class SpaceSpec {
 public:
  SpaceSpec(int d_x, std::vector<Interval> feature_box, Interval label_range,
            std::vector<Interval> theta_box, double p)
      : d_x_(d_x),
        feature_box_(std::move(feature_box)),
        label_range_(label_range),
        theta_box_(std::move(theta_box)),
        p_(p) {
    if (d_x_ < 1) throw std::invalid_argument("SpaceSpec: d_x must be >= 1");
    if (static_cast<int>(feature_box_.size()) != d_x_)
      throw std::invalid_argument("SpaceSpec: feature_box must have d_x intervals");
    if (theta_box_.empty())
      throw std::invalid_argument("SpaceSpec: theta_box must be nonempty");
    for (const auto& iv : feature_box_)
      if (!iv.valid()) throw std::invalid_argument("SpaceSpec: invalid feature_box interval");
    for (const auto& iv : theta_box_)
      if (!iv.valid()) throw std::invalid_argument("SpaceSpec: invalid theta_box interval");
    if (!label_range_.valid())
      throw std::invalid_argument("SpaceSpec: invalid label_range");
    if (!(p_ >= 1.0 && p_ <= 2.0))
      throw std::invalid_argument("SpaceSpec: Wasserstein order p must be in [1,2]");
    if (!(static_cast<double>(d()) > 2.0 * p_))
      throw std::invalid_argument(
          "SpaceSpec: concentration rate requires d > 2p (got d=" +
          std::to_string(d()) + ", p=" + std::to_string(p_) + ")");
  }

  /// Unit-cube classifier space: labels in [0,1], features in [0,1]^d_x,
  /// parameters in [-100,100]^d_x, Wasserstein-1.
  static SpaceSpec unit_cube(int d_x, double theta_half_width = 100.0, double p = 1.0) {
    std::vector<Interval> fb(d_x, Interval{0.0, 1.0});
    std::vector<Interval> tb(d_x, Interval{-theta_half_width, theta_half_width});
    return SpaceSpec(d_x, std::move(fb), Interval{0.0, 1.0}, std::move(tb), p);
  }

  int d_x() const { return d_x_; }
  int d_y() const { return 1; }
  int d() const { return d_x_ + 1; }
  int d_theta() const { return static_cast<int>(theta_box_.size()); }
  double p() const { return p_; }
  const std::vector<Interval>& feature_box() const { return feature_box_; }
  const Interval& label_range() const { return label_range_; }
  const std::vector<Interval>& theta_box() const { return theta_box_; }

 private:
  int d_x_;
  std::vector<Interval> feature_box_;
  Interval label_range_;
  std::vector<Interval> theta_box_;
  double p_;
};

/// One data point z = (y, x). Soft labels live in label_range; hard labels
/// are encoded as the reals 0.0 / 1.0 so labeled and pseudo-labeled points
/// share a single type.
struct Instance {
  double y = 0.0;
  std::vector<double> x;

  bool valid_in(const SpaceSpec& space) const {
    if (static_cast<int>(x.size()) != space.d_x()) return false;
    if (!space.label_range().contains(y)) return false;
    for (int i = 0; i < space.d_x(); ++i)
      if (!space.feature_box()[i].contains(x[i])) return false;
    return true;
  }
};

/// Euclidean distance on the concatenated (y, x) vector.
inline double instance_distance(const Instance& a, const Instance& b,
                                const SpaceSpec& space) {
  if (a.x.size() != b.x.size() ||
      static_cast<int>(a.x.size()) != space.d_x())
    throw std::invalid_argument("instance_distance: dimension mismatch");
  double s = (a.y - b.y) * (a.y - b.y);
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    const double dx = a.x[i] - b.x[i];
    s += dx * dx;
  }
  return std::sqrt(s);
}

/// Diameter of Z: Euclidean norm of the per-coordinate widths of
/// (label_range, feature_box). For the unit cube in R^3 this is sqrt(3).
inline double diameter_z(const SpaceSpec& space) {
  double s = space.label_range().width() * space.label_range().width();
  for (const auto& iv : space.feature_box()) s += iv.width() * iv.width();
  return std::sqrt(s);
}

namespace detail {

inline double sup_norm_over_box(const std::vector<Interval>& box) {
  // The farthest corner takes, per coordinate, whichever endpoint has the
  // larger magnitude.
  double s = 0.0;
  for (const auto& iv : box) {
    const double m = std::max(std::abs(iv.lo), std::abs(iv.hi));
    s += m * m;
  }
  return std::sqrt(s);
}

inline double side_norm_over_box(const std::vector<Interval>& box) {
  double s = 0.0;
  for (const auto& iv : box) s += iv.width() * iv.width();
  return std::sqrt(s);
}

}  // namespace detail

/// (D_X, D_Theta): the norm radii of the feature and parameter boxes.
/// D_X is always sup ||x||; the convention flag only affects D_Theta.
inline std::pair<double, double> diameters_x_theta(
    const SpaceSpec& space,
    DiameterConvention convention = DiameterConvention::sup_norm) {
  const double dx = detail::sup_norm_over_box(space.feature_box());
  const double dtheta = convention == DiameterConvention::sup_norm
                            ? detail::sup_norm_over_box(space.theta_box())
                            : detail::side_norm_over_box(space.theta_box());
  return {dx, dtheta};
}

/// Weighted point cloud on Z. Weights are explicit so that greedy adaptation
/// (sample grows) and non-greedy (fixed n) share one type.
struct EmpiricalDistribution {
  std::vector<Instance> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty())
      throw std::invalid_argument("EmpiricalDistribution: no points");
    if (weights.size() != points.size())
      throw std::invalid_argument("EmpiricalDistribution: weights/points size mismatch");
    double s = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0))
        throw std::invalid_argument("EmpiricalDistribution: negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("EmpiricalDistribution: weights must sum to 1");
  }
};

/// Uniform empirical distribution over the given points, order preserved.
inline EmpiricalDistribution make_empirical(std::vector<Instance> points) {
  if (points.empty())
    throw std::invalid_argument("make_empirical: empty point list");
  const std::size_t n = points.size();
  EmpiricalDistribution dist;
  dist.points = std::move(points);
  dist.weights.assign(n, 1.0 / static_cast<double>(n));
  // Uniform weights 1/n need not sum to 1 exactly in floating point;
  // absorb the residual into the last weight.
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) s += dist.weights[i];
  dist.weights[n - 1] = 1.0 - s;
  return dist;
}

}  // namespace recibound
