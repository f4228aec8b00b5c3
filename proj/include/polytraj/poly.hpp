#pragma once

#include <span>
#include <vector>

#include "polytraj/anchoring.hpp"
#include "polytraj/types.hpp"

namespace polytraj {

/// Added to every variance before the Gaussian likelihood is evaluated (m^2).
inline constexpr double kVarianceFloor = 1e-6;

/// Polynomial trajectory through the origin: x(t) = sum_j a_j t^j, y(t) = sum_j b_j t^j,
/// j = 1..d, t in frames. sigma_* are per-coefficient standard deviations.
struct PolyTrajectory {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> sigma_a;
  std::vector<double> sigma_b;

  std::size_t degree_x() const { return a.size(); }
  std::size_t degree_y() const { return b.size(); }
  /// Throws std::invalid_argument / NumericalError when an invariant is broken.
  void validate() const;
};

struct PointPrediction {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
};

double eval_poly(std::span<const double> coeffs, double t);

/// var(x(t)) = sum_j sigma_j^2 (t^j)^2 for independent coefficients.
double propagate_variance(std::span<const double> sigma, double t);

/// 0.5 (pred - target)^2 / v + 0.5 ln(2 pi v) with v = var + kVarianceFloor.
double gaussian_nll(double pred, double var, double target);

std::vector<PointPrediction> eval_traj(const PolyTrajectory& p, const AnchorSchedule& schedule);
/// Same as eval_traj for arbitrary non-negative (possibly fractional) offsets.
std::vector<PointPrediction> eval_at(const PolyTrajectory& p, std::span<const double> offsets);

/// Mean over anchors of the x and y negative log-likelihoods. truth[t] is the
/// true position at offset t, so truth[0] is the origin.
double trajectory_loss(const PolyTrajectory& p, std::span<const Vec2> truth, const AnchorSchedule& schedule);

}  // namespace polytraj
