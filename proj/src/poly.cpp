#include "polytraj/poly.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "polytraj/errors.hpp"

namespace polytraj {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

void check_schedule(const AnchorSchedule& schedule) {
  if (schedule.offsets.empty()) throw std::invalid_argument("anchor schedule is empty");
  for (std::size_t i = 0; i < schedule.offsets.size(); ++i) {
    if (schedule.offsets[i] < 1 || (i > 0 && schedule.offsets[i] <= schedule.offsets[i - 1])) {
      throw std::invalid_argument("anchor schedule must be strictly increasing positive offsets");
    }
  }
}

}  // namespace

void PolyTrajectory::validate() const {
  if (a.empty() || b.empty()) throw std::invalid_argument("polynomial degrees must be >= 1");
  if (sigma_a.size() != a.size() || sigma_b.size() != b.size()) {
    throw std::invalid_argument("one sigma per coefficient required");
  }
  for (const auto* v : {&a, &b, &sigma_a, &sigma_b}) {
    for (double c : *v) require_finite(c, "trajectory coefficient");
  }
  for (const auto* v : {&sigma_a, &sigma_b}) {
    for (double s : *v) {
      if (s < 0.0) throw NumericalError("negative coefficient sigma " + std::to_string(s));
    }
  }
}

double eval_poly(std::span<const double> coeffs, double t) {
  if (coeffs.empty()) throw std::invalid_argument("eval_poly: no coefficients");
  require_finite(t, "time offset");
  if (t < 0.0) throw std::invalid_argument("eval_poly: negative time offset");
  // Horner on t * (c1 + t (c2 + ...)).
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) {
    require_finite(coeffs[j], "coefficient");
    acc = acc * t + coeffs[j];
  }
  return acc * t;
}

double propagate_variance(std::span<const double> sigma, double t) {
  require_finite(t, "time offset");
  double var = 0.0;
  double tj = 1.0;
  for (double s : sigma) {
    require_finite(s, "sigma");
    if (s < 0.0) throw NumericalError("propagate_variance: negative sigma " + std::to_string(s));
    tj *= t;
    var += s * s * tj * tj;
  }
  return var;
}

double gaussian_nll(double pred, double var, double target) {
  require_finite(pred, "prediction");
  require_finite(var, "variance");
  require_finite(target, "target");
  const double v = var + kVarianceFloor;
  if (!(v > 0.0)) throw NumericalError("gaussian_nll: variance " + std::to_string(var) + " is not positive");
  const double r = pred - target;
  return 0.5 * r * r / v + 0.5 * std::log(2.0 * std::numbers::pi * v);
}

std::vector<PointPrediction> eval_at(const PolyTrajectory& p, std::span<const double> offsets) {
  p.validate();
  std::vector<PointPrediction> out;
  out.reserve(offsets.size());
  for (double t : offsets) {
    out.push_back({t, eval_poly(p.a, t), eval_poly(p.b, t), propagate_variance(p.sigma_a, t),
                   propagate_variance(p.sigma_b, t)});
  }
  return out;
}

std::vector<PointPrediction> eval_traj(const PolyTrajectory& p, const AnchorSchedule& schedule) {
  check_schedule(schedule);
  std::vector<double> ts(schedule.offsets.begin(), schedule.offsets.end());
  return eval_at(p, ts);
}

double trajectory_loss(const PolyTrajectory& p, std::span<const Vec2> truth, const AnchorSchedule& schedule) {
  check_schedule(schedule);
  if (static_cast<std::size_t>(schedule.last()) >= truth.size()) {
    throw std::invalid_argument("anchor offset " + std::to_string(schedule.last()) + " beyond ground truth of " +
                                std::to_string(truth.size()) + " positions");
  }
  double total = 0.0;
  for (const auto& pt : eval_traj(p, schedule)) {
    const Vec2 mu = truth[static_cast<std::size_t>(pt.t)];
    total += gaussian_nll(pt.x, pt.var_x, mu.x) + gaussian_nll(pt.y, pt.var_y, mu.y);
  }
  return total / static_cast<double>(schedule.count());
}

}  // namespace polytraj
