#include "polytraj/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace polytraj::eval {

double ade(std::span<const Vec2> pred, std::span<const Vec2> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("ade: " + std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(truth.size()) + " ground-truth points");
  }
  if (pred.empty()) throw std::invalid_argument("ade: empty sequences");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += distance(pred[i], truth[i]);
  return total / static_cast<double>(pred.size());
}

double EvalReport::mean_ade() const {
  if (ade.empty()) throw std::logic_error("mean_ade of an empty report");
  double s = 0.0;
  for (double v : ade) s += v;
  return s / static_cast<double>(ade.size());
}

double EvalReport::mean_ade_beyond(int offset) const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    if (offsets[k] > offset) {
      s += ade[k];
      ++n;
    }
  }
  if (n == 0) throw std::logic_error("no offsets beyond " + std::to_string(offset));
  return s / static_cast<double>(n);
}

double EvalReport::ade_at(int offset) const {
  auto it = std::find(offsets.begin(), offsets.end(), offset);
  if (it == offsets.end()) throw std::out_of_range("report has no offset " + std::to_string(offset));
  return ade[static_cast<std::size_t>(it - offsets.begin())];
}

EvalReport evaluate_positions(std::span<const std::vector<Vec2>> predicted, std::span<const Sample> test,
                              std::span<const int> offsets) {
  if (test.empty()) throw std::invalid_argument("evaluation on an empty test set");
  if (predicted.size() != test.size()) throw std::invalid_argument("one prediction row per test sample required");
  EvalReport r;
  r.offsets.assign(offsets.begin(), offsets.end());
  std::vector<double> sq(offsets.size(), 0.0), abs(offsets.size(), 0.0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (predicted[i].size() != offsets.size()) throw std::invalid_argument("prediction row length mismatch");
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      if (offsets[k] < 0 || offsets[k] > test[i].max_offset()) {
        throw std::invalid_argument("offset " + std::to_string(offsets[k]) + " beyond ground truth of sample '" +
                                    test[i].id + "'");
      }
      const double d = distance(predicted[i][k], test[i].future[static_cast<std::size_t>(offsets[k])]);
      sq[k] += d * d;
      abs[k] += d;
    }
  }
  const double n = static_cast<double>(test.size());
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    r.rmse.push_back(std::sqrt(sq[k] / n));
    r.ade.push_back(abs[k] / n);
  }
  r.samples = test.size();
  return r;
}

std::vector<model::ModelOutput> predict_all(const model::TrajectoryModel& model, std::span<const Sample> test) {
  constexpr std::size_t kBatch = 128;
  std::vector<model::ModelOutput> out;
  out.reserve(test.size());
  // Batches need equal history lengths; group consecutive runs.
  std::size_t i = 0;
  while (i < test.size()) {
    std::vector<const Sample*> batch;
    const std::size_t len = test[i].history_length();
    while (i < test.size() && batch.size() < kBatch && test[i].history_length() == len) batch.push_back(&test[i++]);
    auto preds = model.predict(batch);
    for (auto& p : preds) out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<Vec2>> predict_positions(const model::TrajectoryModel& model, std::span<const Sample> test,
                                                 std::span<const int> offsets) {
  std::vector<std::vector<Vec2>> rows;
  for (const auto& out : predict_all(model, test)) rows.push_back(model::positions_at(out, offsets));
  return rows;
}

EvalReport rmse_at_offsets(const model::TrajectoryModel& model, std::span<const Sample> test,
                           std::span<const int> offsets) {
  if (test.empty()) throw std::invalid_argument("evaluation on an empty test set");
  const auto rows = predict_positions(model, test, offsets);
  EvalReport r = evaluate_positions(rows, test, offsets);
  r.method = model::to_string(model.config().head);
  return r;
}

double FitResult::operator()(double t) const {
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * t + coeffs[j];
  return acc;
}

FitResult least_squares_fit(std::span<const FitPoint> points, int degree) {
  if (degree < 0) throw std::invalid_argument("least_squares_fit: negative degree");
  const auto cols = static_cast<std::size_t>(degree) + 1;
  std::set<double> distinct;
  double t_scale = 0.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.t) || !std::isfinite(p.value)) throw std::invalid_argument("least_squares_fit: non-finite point");
    distinct.insert(p.t);
    t_scale = std::max(t_scale, std::abs(p.t));
  }
  if (distinct.size() < cols) {
    throw std::invalid_argument("least_squares_fit: rank-deficient system, " + std::to_string(distinct.size()) +
                                " distinct abscissae for degree " + std::to_string(degree));
  }
  if (t_scale == 0.0) t_scale = 1.0;
  // Columns use t / t_scale for conditioning; rescaled below.
  Eigen::MatrixXd v(points.size(), cols);
  Eigen::VectorXd y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double tj = 1.0;
    for (std::size_t j = 0; j < cols; ++j) {
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tj;
      tj *= points[i].t / t_scale;
    }
    y(static_cast<Eigen::Index>(i)) = points[i].value;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  if (qr.rank() < static_cast<Eigen::Index>(cols)) throw std::invalid_argument("least_squares_fit: rank-deficient system");
  const Eigen::VectorXd c = qr.solve(y);
  FitResult fit;
  double s = 1.0;
  for (std::size_t j = 0; j < cols; ++j) {
    fit.coeffs.push_back(c(static_cast<Eigen::Index>(j)) / s);
    s *= t_scale;
  }
  fit.residual = (v * c - y).norm();
  return fit;
}

std::vector<int> even_offsets(int last) {
  std::vector<int> out;
  for (int t = 2; t <= last; t += 2) out.push_back(t);
  return out;
}

}  // namespace polytraj::eval
