#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "polytraj/errors.hpp"
#include "polytraj/poly.hpp"
#include "polytraj/rng.hpp"
#include "support/oracles.hpp"

using namespace polytraj;
using polytraj::testing::brute_loss;

namespace {

constexpr double kUnitDensityVar = 1.0 / (2.0 * std::numbers::pi);

}  // namespace

TEST(EvalPoly, Examples) {
  EXPECT_DOUBLE_EQ(eval_poly(std::vector<double>{1}, 3), 3.0);
  EXPECT_DOUBLE_EQ(eval_poly(std::vector<double>{0, 2}, 3), 18.0);
  EXPECT_DOUBLE_EQ(eval_poly(std::vector<double>{4.5, -1, 7}, 0), 0.0);
}

TEST(EvalPoly, Errors) {
  EXPECT_THROW(eval_poly(std::vector<double>{}, 1), std::invalid_argument);
  EXPECT_THROW(eval_poly(std::vector<double>{1}, -1), std::invalid_argument);
  EXPECT_THROW(eval_poly(std::vector<double>{NAN}, 1), NumericalError);
  EXPECT_THROW(eval_poly(std::vector<double>{1}, INFINITY), NumericalError);
}

TEST(EvalPoly, LinearInCoefficients) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> c1(3), c2(3), s(3);
    for (int j = 0; j < 3; ++j) {
      c1[j] = rng.uniform(-2, 2);
      c2[j] = rng.uniform(-2, 2);
      s[j] = c1[j] + c2[j];
    }
    const double t = rng.uniform(0, 55);
    const double lhs = eval_poly(s, t), rhs = eval_poly(c1, t) + eval_poly(c2, t);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(EvalTraj, Examples) {
  PolyTrajectory p{{1}, {2}, {0}, {0}};
  const auto pts = eval_traj(p, AnchorSchedule{{1, 2}});
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].x, 1);
  EXPECT_DOUBLE_EQ(pts[0].y, 2);
  EXPECT_DOUBLE_EQ(pts[1].x, 2);
  EXPECT_DOUBLE_EQ(pts[1].y, 4);
  for (const auto& q : pts) {
    EXPECT_EQ(q.var_x, 0.0);
    EXPECT_EQ(q.var_y, 0.0);
  }
  PolyTrajectory q{{1, 1}, {0}, {0, 0}, {0}};
  EXPECT_DOUBLE_EQ(eval_traj(q, AnchorSchedule{{2}})[0].x, 6.0);
}

TEST(EvalTraj, RejectsNonIncreasingSchedule) {
  PolyTrajectory p{{1}, {2}, {0}, {0}};
  EXPECT_THROW(eval_traj(p, AnchorSchedule{{2, 2}}), std::invalid_argument);
  EXPECT_THROW(eval_traj(p, AnchorSchedule{}), std::invalid_argument);
}

TEST(PropagateVariance, Examples) {
  EXPECT_NEAR(propagate_variance(std::vector<double>{0.1, 0.2}, 2), 0.68, 1e-15);
  EXPECT_EQ(propagate_variance(std::vector<double>{0, 0, 0}, 17), 0.0);
  EXPECT_EQ(propagate_variance(std::vector<double>{1}, 1), 1.0);
  EXPECT_THROW(propagate_variance(std::vector<double>{0.1, -0.1}, 2), NumericalError);
}

TEST(PropagateVariance, NonDecreasingInTime) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> s{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
    double prev = propagate_variance(s, 1.0);
    for (double t = 1.5; t <= 55; t += 0.5) {
      const double v = propagate_variance(s, t);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(PropagateVariance, MatchesMonteCarloAtSmallT) {
  Rng rng(21);
  const std::vector<double> sigma{0.1, 0.2};
  const int n = 1'000'000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> c{rng.normal(0, sigma[0]), rng.normal(0, sigma[1])};
    const double x = eval_poly(c, 2.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(var / propagate_variance(sigma, 2.0), 1.0, 0.02);
}

TEST(GaussianNll, Examples) {
  EXPECT_NEAR(gaussian_nll(3.0, kUnitDensityVar - kVarianceFloor, 3.0), 0.0, 1e-12);
  EXPECT_NEAR(gaussian_nll(0.0, 1.0 - kVarianceFloor, 0.0), 0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gaussian_nll(1.0, 1.0 - kVarianceFloor, 0.0), 0.5 + 0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gaussian_nll(1.0, 1.0 - kVarianceFloor, 0.0), 1.4189385332, 1e-9);
}

TEST(GaussianNll, FloorKeepsZeroVarianceFinite) {
  EXPECT_TRUE(std::isfinite(gaussian_nll(0.0, 0.0, 0.0)));
  EXPECT_THROW(gaussian_nll(0.0, -1.0, 0.0), NumericalError);
}

TEST(GaussianNll, MinimisedAtTarget) {
  const double h = 1e-6, target = 2.0, var = 0.3;
  const double slope_below = (gaussian_nll(target - h, var, target) - gaussian_nll(target - 2 * h, var, target));
  const double slope_above = (gaussian_nll(target + 2 * h, var, target) - gaussian_nll(target + h, var, target));
  EXPECT_LT(slope_below, 0.0);
  EXPECT_GT(slope_above, 0.0);
}

TEST(GaussianNll, CalibratedVarianceIsResidualSquared) {
  // With the floor added internally the optimum sits at var + floor = residual^2.
  const double r = 0.7;
  const double best = r * r - kVarianceFloor;
  const double at = gaussian_nll(r, best, 0.0);
  for (double f : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) EXPECT_LT(at, gaussian_nll(r, best * f, 0.0));
}

TEST(TrajectoryLoss, PerfectPredictionWithUnitDensity) {
  // sigma chosen so var + floor = 1/(2 pi) at t = 1.
  const double s = std::sqrt(kUnitDensityVar - kVarianceFloor);
  PolyTrajectory p{{2}, {3}, {s}, {s}};
  const std::vector<Vec2> truth{{0, 0}, {2, 3}};
  EXPECT_NEAR(trajectory_loss(p, truth, AnchorSchedule{{1}}), 0.0, 1e-12);
}

TEST(TrajectoryLoss, SingleAnchorIsSumOfAxisTerms) {
  PolyTrajectory p{{0.5, 0.01}, {1.5}, {0.1, 0.01}, {0.2}};
  std::vector<Vec2> truth(5);
  truth[4] = {1.0, 7.0};
  const auto pt = eval_traj(p, AnchorSchedule{{4}})[0];
  EXPECT_NEAR(trajectory_loss(p, truth, AnchorSchedule{{4}}),
              gaussian_nll(pt.x, pt.var_x, 1.0) + gaussian_nll(pt.y, pt.var_y, 7.0), 1e-12);
}

TEST(TrajectoryLoss, OffsetBeyondTruthIsAnError) {
  PolyTrajectory p{{1}, {1}, {1}, {1}};
  std::vector<Vec2> truth(10);
  EXPECT_THROW(trajectory_loss(p, truth, AnchorSchedule{{5, 10}}), std::invalid_argument);
}

TEST(TrajectoryLoss, MatchesBruteForceOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    PolyTrajectory p;
    const int dx = rng.uniform_int(1, 4), dy = rng.uniform_int(1, 4);
    for (int j = 0; j < dx; ++j) {
      p.a.push_back(rng.uniform(-1, 1) / std::pow(10, j));
      p.sigma_a.push_back(rng.uniform(0, 0.5) / std::pow(10, j));
    }
    for (int j = 0; j < dy; ++j) {
      p.b.push_back(rng.uniform(-1, 1) / std::pow(10, j));
      p.sigma_b.push_back(rng.uniform(0, 0.5) / std::pow(10, j));
    }
    std::vector<Vec2> truth(60);
    for (auto& g : truth) g = {rng.uniform(-5, 5), rng.uniform(-5, 50)};
    const int count = rng.uniform_int(1, 6);
    const int r = rng.uniform_int(std::max(count, 10), 55);
    std::vector<int> offsets;
    for (int k = 1; k <= count; ++k) offsets.push_back(r * k / count);
    const double got = trajectory_loss(p, truth, AnchorSchedule{offsets});
    const double want = brute_loss(p, truth, offsets);
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want)));
  }
}
