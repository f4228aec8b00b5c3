#pragma once

#include <span>
#include <string>
#include <vector>

#include "polytraj/model.hpp"
#include "polytraj/sample.hpp"
#include "polytraj/types.hpp"

namespace polytraj::eval {

/// Mean Euclidean displacement between aligned position sequences.
double ade(std::span<const Vec2> pred, std::span<const Vec2> truth);

/// Error statistics of one method at a set of offsets (frames).
struct EvalReport {
  std::string method;
  std::vector<int> offsets;
  std::vector<double> rmse;  // root-mean-square displacement per offset
  std::vector<double> ade;   // mean displacement per offset
  std::size_t samples = 0;
  std::size_t skipped = 0;
  std::string fingerprint;

  double mean_ade() const;
  /// Mean of ade over offsets strictly greater than `offset`.
  double mean_ade_beyond(int offset) const;
  /// ade at a listed offset; throws if absent.
  double ade_at(int offset) const;
};

/// predicted[i][k] is the prediction for test[i] at offsets[k].
EvalReport evaluate_positions(std::span<const std::vector<Vec2>> predicted, std::span<const Sample> test,
                              std::span<const int> offsets);

/// Predictions of a model for every test sample at the given offsets.
std::vector<std::vector<Vec2>> predict_positions(const model::TrajectoryModel& model, std::span<const Sample> test,
                                                 std::span<const int> offsets);

std::vector<model::ModelOutput> predict_all(const model::TrajectoryModel& model, std::span<const Sample> test);

/// Per-offset RMSE of Euclidean displacement over the test set (Table-style,
/// default offsets 1..5 s at 10 Hz).
EvalReport rmse_at_offsets(const model::TrajectoryModel& model, std::span<const Sample> test,
                           std::span<const int> offsets = std::vector<int>{10, 20, 30, 40, 50});

/// Least-squares polynomial with a constant term: coeffs[0..D].
struct FitResult {
  std::vector<double> coeffs;
  double residual = 0.0;  // Euclidean norm of the residual vector

  double operator()(double t) const;
};

struct FitPoint {
  double t = 0.0;
  double value = 0.0;
};

/// Ordinary least squares on the Vandermonde system. Throws std::invalid_argument
/// when fewer than D+1 distinct abscissae are given.
FitResult least_squares_fit(std::span<const FitPoint> points, int degree);

std::vector<int> even_offsets(int last);

}  // namespace polytraj::eval
