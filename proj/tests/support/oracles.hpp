#pragma once

// Independent restatements used as test oracles. They use explicit loops and
// powers and share no evaluation helpers with the library.

#include <cmath>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include "polytraj/metrics.hpp"
#include "polytraj/model.hpp"
#include "polytraj/poly.hpp"

namespace polytraj::testing {

/// floor(r k / count) for k = 1..count by repeated subtraction.
inline std::vector<int> floor_oracle(int r, int count) {
  std::vector<int> out;
  for (int k = 1; k <= count; ++k) {
    long num = 0;
    for (int i = 0; i < k; ++i) num += r;
    int q = 0;
    while (num >= count) {
      num -= count;
      ++q;
    }
    out.push_back(q);
  }
  return out;
}

inline double brute_loss(const PolyTrajectory& p, const std::vector<Vec2>& truth, const std::vector<int>& offsets) {
  double total = 0.0;
  for (int t : offsets) {
    double x = 0, y = 0, vx = 0, vy = 0;
    for (std::size_t j = 0; j < p.a.size(); ++j) {
      x += p.a[j] * std::pow(t, j + 1.0);
      vx += std::pow(p.sigma_a[j], 2) * std::pow(t, 2.0 * (j + 1.0));
    }
    for (std::size_t j = 0; j < p.b.size(); ++j) {
      y += p.b[j] * std::pow(t, j + 1.0);
      vy += std::pow(p.sigma_b[j], 2) * std::pow(t, 2.0 * (j + 1.0));
    }
    vx += kVarianceFloor;
    vy += kVarianceFloor;
    const Vec2 g = truth[static_cast<std::size_t>(t)];
    total += 0.5 * (x - g.x) * (x - g.x) / vx + 0.5 * std::log(2 * std::numbers::pi * vx);
    total += 0.5 * (y - g.y) * (y - g.y) / vy + 0.5 * std::log(2 * std::numbers::pi * vy);
  }
  return total / static_cast<double>(offsets.size());
}

/// Per-sample RMSE loop for a polynomial model.
inline std::vector<double> brute_rmse(const model::TrajectoryModel& m, const std::vector<Sample>& test,
                                      const std::vector<int>& offsets) {
  std::vector<double> out;
  for (int t : offsets) {
    double acc = 0.0;
    for (const auto& s : test) {
      const auto p = std::get<PolyTrajectory>(m.predict(s));
      double x = 0, y = 0;
      for (std::size_t j = 0; j < p.a.size(); ++j) x += p.a[j] * std::pow(t, j + 1.0);
      for (std::size_t j = 0; j < p.b.size(); ++j) y += p.b[j] * std::pow(t, j + 1.0);
      const Vec2 g = s.future[static_cast<std::size_t>(t)];
      acc += (x - g.x) * (x - g.x) + (y - g.y) * (y - g.y);
    }
    out.push_back(std::sqrt(acc / static_cast<double>(test.size())));
  }
  return out;
}

inline double brute_ade(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::hypot(pred[i].x - truth[i].x, pred[i].y - truth[i].y);
  }
  return acc / static_cast<double>(pred.size());
}

/// Gaussian elimination with partial pivoting on the normal equations.
inline std::vector<double> normal_equation_fit(const std::vector<eval::FitPoint>& pts, int degree) {
  const int n = degree + 1;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (const auto& p : pts) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) a[r][c] += std::pow(p.t, r + c);
      a[r][n] += std::pow(p.t, r) * p.value;
    }
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> out(n);
  for (int r = 0; r < n; ++r) out[r] = a[r][n] / a[r][r];
  return out;
}

}  // namespace polytraj::testing
