#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "polytraj/errors.hpp"
#include "polytraj/model.hpp"
#include "polytraj/train.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace polytraj;
using namespace polytraj::model;
using ad::Array;
using ad::Node;
using ad::Shape;
using polytraj::testing::random_array;
using polytraj::testing::synthetic_samples;

namespace {

GruWeights zero_gru(std::size_t in, std::size_t h) {
  return {ad::variable(Array(Shape{in, 3 * h})), ad::variable(Array(Shape{h, 2 * h})),
          ad::variable(Array(Shape{h, h})), ad::variable(Array(Shape{1, 3 * h}))};
}

std::vector<const Sample*> pointers(const std::vector<Sample>& s) {
  std::vector<const Sample*> out;
  for (const auto& x : s) out.push_back(&x);
  return out;
}

ModelConfig small_config(HeadKind head = HeadKind::polynomial) {
  ModelConfig c;
  c.units = 4;
  c.head = head;
  return c;
}

}  // namespace

TEST(GruCell, ZeroWeightsKeepZeroState) {
  Rng rng(1);
  const auto w = zero_gru(3, 4);
  const Node h = gru_cell(ad::constant(random_array({2, 3}, rng)), ad::constant(Array(Shape{2, 4})), w);
  for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, SaturatedUpdateGateKeepsState) {
  Rng rng(2);
  auto w = zero_gru(3, 4);
  w.input = ad::variable(random_array({3, 12}, rng));
  for (std::size_t i = 0; i < 4; ++i) w.bias.mutable_value()[i] = 50.0;  // update gate -> 1
  const Array h0 = random_array({2, 4}, rng);
  const Node h = gru_cell(ad::constant(random_array({2, 3}, rng)), ad::constant(h0), w);
  for (std::size_t i = 0; i < h0.size(); ++i) EXPECT_NEAR(h.value()[i], h0[i], 1e-12);
}

TEST(GruCell, ShapeMismatchIsAnError) {
  const auto w = zero_gru(3, 4);
  EXPECT_THROW(gru_cell(ad::constant(Array(Shape{2, 5})), ad::constant(Array(Shape{2, 4})), w), ShapeError);
}

TEST(GruCell, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  const Array x = random_array({3, 2}, rng);
  std::vector<Node> leaves{ad::variable(random_array({2, 9}, rng)), ad::variable(random_array({3, 6}, rng)),
                           ad::variable(random_array({3, 3}, rng)), ad::variable(random_array({1, 9}, rng)),
                           ad::variable(random_array({3, 3}, rng))};
  const auto bad = polytraj::testing::check_gradients(
      [&](const std::vector<Node>& l) {
        const GruWeights w{l[0], l[1], l[2], l[3]};
        const Node h1 = gru_cell(ad::constant(x), l[4], w);
        const Node h2 = gru_cell(ad::constant(x), h1, w);
        return ad::sum(h2 * h2);
      },
      leaves);
  for (const auto& m : bad) ADD_FAILURE() << m.where << " analytic " << m.analytic << " numeric " << m.numeric;
}

TEST(Attention, SingleKeyReturnsValue) {
  Rng rng(4);
  const Node v = ad::constant(random_array({2, 3}, rng));
  const Node k = ad::constant(random_array({2, 3}, rng));
  const Node out = attention(ad::constant(random_array({2, 3}, rng)), std::vector<Node>{k}, std::vector<Node>{v});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out.value()[i], v.value()[i], 1e-15);
}

TEST(Attention, IdenticalKeysAverageValues) {
  Rng rng(5);
  const Node k = ad::constant(random_array({1, 3}, rng));
  const Node v1 = ad::constant(Array::matrix({{1, 2, 3}})), v2 = ad::constant(Array::matrix({{3, 6, 9}}));
  const Node out = attention(ad::constant(random_array({1, 3}, rng)), std::vector<Node>{k, k},
                             std::vector<Node>{v1, v2});
  EXPECT_NEAR(out.value()[0], 2.0, 1e-12);
  EXPECT_NEAR(out.value()[1], 4.0, 1e-12);
  EXPECT_NEAR(out.value()[2], 6.0, 1e-12);
}

TEST(Attention, OrthogonalQueryGivesMeanOfValues) {
  const Node q = ad::constant(Array::matrix({{1, 0}}));
  const Node k1 = ad::constant(Array::matrix({{0, 1}})), k2 = ad::constant(Array::matrix({{0, -3}}));
  const Node v1 = ad::constant(Array::matrix({{2, 0}})), v2 = ad::constant(Array::matrix({{0, 4}}));
  const Node out = attention(q, std::vector<Node>{k1, k2}, std::vector<Node>{v1, v2});
  EXPECT_NEAR(out.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(out.value()[1], 2.0, 1e-12);
}

TEST(Attention, EmptyKeySetIsAnError) {
  EXPECT_THROW(attention(ad::constant(Array(Shape{1, 2})), {}, {}), std::invalid_argument);
}

TEST(Attention, MaskedKeyIsIgnored) {
  const Node q = ad::constant(Array::matrix({{1, 1}}));
  const Node k1 = ad::constant(Array::matrix({{1, 0}})), k2 = ad::constant(Array::matrix({{5, 5}}));
  const Node v1 = ad::constant(Array::matrix({{7, 8}})), v2 = ad::constant(Array::matrix({{0, 0}}));
  const Array mask = Array::matrix({{0.0, -1e9}});
  const Node out = attention(q, std::vector<Node>{k1, k2}, std::vector<Node>{v1, v2}, &mask);
  EXPECT_NEAR(out.value()[0], 7.0, 1e-12);
  EXPECT_NEAR(out.value()[1], 8.0, 1e-12);
}

TEST(Model, OutputWidthMatchesHead) {
  ModelConfig c;
  EXPECT_EQ(c.output_width(), 12u);
  c.head = HeadKind::coordinates;
  c.anchor_count = 5;
  EXPECT_EQ(c.output_width(), 20u);
}

TEST(Model, WholeModelGradientCheck) {
  const auto samples = synthetic_samples(data::SyntheticKind::lane_change, 3, 4, 55, 3);
  const auto batch = pointers(samples);
  for (HeadKind head : {HeadKind::polynomial, HeadKind::coordinates}) {
    TrajectoryModel m(small_config(head), 17);
    std::vector<AnchorSchedule> sched(batch.size(), fixed_schedule(5, 50));
    std::vector<Node> leaves;
    for (auto& p : m.parameters().items()) leaves.push_back(p.node);
    const auto bad = polytraj::testing::check_gradients(
        [&](const std::vector<Node>&) { return m.loss(m.forward(batch), batch, sched); }, leaves);
    EXPECT_TRUE(bad.empty()) << to_string(head) << ": " << bad.size() << " mismatches, first at "
                             << (bad.empty() ? "" : bad[0].where);
  }
}

TEST(Model, ZeroHeadPredictsOrigin) {
  const auto samples = synthetic_samples(data::SyntheticKind::arc, 2, 5, 50);
  for (HeadKind head : {HeadKind::polynomial, HeadKind::coordinates}) {
    TrajectoryModel m(ModelConfig{.head = head}, 1);
    for (auto& p : m.parameters().items()) {
      if (p.name.rfind("head.", 0) == 0) p.node.mutable_value().fill(0.0);
    }
    const std::vector<int> offsets{1, 10, 25, 50};
    for (const auto& s : samples) {
      for (const Vec2& q : positions_at(m.predict(s), offsets)) {
        EXPECT_EQ(q.x, 0.0);
        EXPECT_EQ(q.y, 0.0);
      }
    }
  }
}

TEST(Model, PolynomialPassesThroughOrigin) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_acc, 4, 6, 50);
  TrajectoryModel m(ModelConfig{}, 9);
  for (const auto& s : samples) {
    const auto out = m.predict(s);
    const auto& p = std::get<PolyTrajectory>(out);
    EXPECT_EQ(eval_poly(p.a, 0.0), 0.0);
    EXPECT_EQ(eval_poly(p.b, 0.0), 0.0);
    for (double sg : p.sigma_a) EXPECT_GT(sg, 0.0);
  }
}

TEST(Model, AcceptsArbitraryHistoryLength) {
  TrajectoryModel m(ModelConfig{}, 2);
  for (std::size_t h : {1u, 5u}) {
    const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 1, h, 50);
    EXPECT_NO_THROW(m.predict(samples[0]));
  }
  Sample empty;
  empty.agents.resize(1);
  EXPECT_THROW(m.predict(empty), std::invalid_argument);
}

TEST(Model, DeterministicGivenSeed) {
  const auto samples = synthetic_samples(data::SyntheticKind::lane_change, 3, 8, 50);
  const auto batch = pointers(samples);
  TrajectoryModel a(ModelConfig{}, 5), b(ModelConfig{}, 5), c(ModelConfig{}, 6);
  EXPECT_EQ(a.forward(batch).value(), b.forward(batch).value());
  EXPECT_NE(a.forward(batch).value(), c.forward(batch).value());
}

TEST(Model, NeighbourOrderDoesNotMatter) {
  auto samples = synthetic_samples(data::SyntheticKind::lane_change, 2, 8, 50, 4, 3);
  TrajectoryModel m(ModelConfig{}, 3);
  for (auto& s : samples) {
    const auto before = positions_at(m.predict(s), std::vector<int>{10, 30, 50});
    std::reverse(s.agents.begin() + 1, s.agents.end());
    const auto after = positions_at(m.predict(s), std::vector<int>{10, 30, 50});
    for (std::size_t k = 0; k < before.size(); ++k) {
      EXPECT_NEAR(before[k].x, after[k].x, 1e-12);
      EXPECT_NEAR(before[k].y, after[k].y, 1e-12);
    }
  }
}

TEST(Model, CoordinateLossOnlySeesItsAnchors) {
  auto samples = synthetic_samples(data::SyntheticKind::const_vel, 2, 5, 55);
  ModelConfig c;
  c.head = HeadKind::coordinates;
  c.anchor_count = 2;
  TrajectoryModel m(c, 4);
  const std::vector<AnchorSchedule> sched(2, fixed_schedule(2, 50));
  const double before = m.loss(m.forward(pointers(samples)), pointers(samples), sched).value().item();
  for (auto& s : samples) {
    for (std::size_t t = 0; t < s.future.size(); ++t) {
      if (t != 25 && t != 50) s.future[t] = {1e3, -1e3};
    }
  }
  const double after = m.loss(m.forward(pointers(samples)), pointers(samples), sched).value().item();
  EXPECT_EQ(before, after);
  const std::vector<AnchorSchedule> other(2, fixed_schedule(5, 50));
  EXPECT_THROW(m.loss(m.forward(pointers(samples)), pointers(samples), other), std::invalid_argument);
}

TEST(Model, PolynomialLossMatchesTrajectoryLoss) {
  const auto samples = synthetic_samples(data::SyntheticKind::arc, 3, 6, 55);
  TrajectoryModel m(ModelConfig{}, 8);
  Rng rng(3);
  std::vector<AnchorSchedule> sched;
  double want = 0.0;
  for (const auto& s : samples) {
    sched.push_back(random_schedule({35, 55}, 5, rng));
    want += trajectory_loss(std::get<PolyTrajectory>(m.predict(s)), s.future, sched.back());
  }
  want /= static_cast<double>(samples.size());
  const double got = m.loss(m.forward(pointers(samples)), pointers(samples), sched).value().item();
  EXPECT_NEAR(got, want, 1e-10 * std::abs(want));
}

TEST(Model, CoordinatePositionsInterpolateWithinHorizon) {
  CoordinateOutput out{fixed_schedule(2, 50), {{1.0, 10.0}, {3.0, 30.0}}, {{1, 1}, {1, 1}}};
  const auto pts = positions_at(out, std::vector<int>{0, 10, 25, 40, 50});
  EXPECT_EQ(pts[0], (Vec2{0, 0}));
  EXPECT_DOUBLE_EQ(pts[1].y, 4.0);
  EXPECT_DOUBLE_EQ(pts[2].y, 10.0);
  EXPECT_DOUBLE_EQ(pts[3].y, 22.0);
  EXPECT_DOUBLE_EQ(pts[4].x, 3.0);
  EXPECT_THROW(positions_at(out, std::vector<int>{51}), std::out_of_range);
}

TEST(Model, CoordinateOutputsScaleWithAnchorTime) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 1, 4, 50);
  ModelConfig c = small_config(HeadKind::coordinates);
  c.anchor_count = 2;
  TrajectoryModel m(c, 2);
  for (auto& p : m.parameters().items()) {
    if (p.name == "head.w") p.node.mutable_value().fill(0.0);
    if (p.name == "head.b") p.node.mutable_value().fill(1.0);
  }
  const auto out = std::get<CoordinateOutput>(m.predict(samples[0]));
  // Anchors at 25 and 50 of a 50-frame horizon.
  EXPECT_DOUBLE_EQ(out.positions[0].x, 0.5 * c.lateral_scale);
  EXPECT_DOUBLE_EQ(out.positions[0].y, 0.5 * c.longitudinal_scale);
  EXPECT_DOUBLE_EQ(out.positions[1].y, c.longitudinal_scale);
  EXPECT_DOUBLE_EQ(out.sigmas[0].y, std::exp(1.0) * 0.5 * c.longitudinal_scale);
}

TEST(ModelConfig, HeaderRoundTrip) {
  ModelConfig c;
  c.units = 7;
  c.head = HeadKind::coordinates;
  c.d_x = 2;
  c.lateral_scale = 3.25;
  const auto back = ModelConfig::from_header(c.to_header());
  EXPECT_EQ(back.units, 7);
  EXPECT_EQ(back.head, HeadKind::coordinates);
  EXPECT_EQ(back.d_x, 2);
  EXPECT_EQ(back.lateral_scale, 3.25);
  EXPECT_THROW(parse_head("pixels"), std::invalid_argument);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 6, 4, 55);
  TrajectoryModel m(small_config(), 3);
  const auto before = m.parameters().snapshot();
  TrainOptions o;
  o.lr = 0.0;
  o.steps = 3;
  o.batch = 4;
  for (const char* opt : {"adam", "sgd"}) {
    o.optimizer = opt;
    train(m, samples, ScheduleSource{AnchorMode::random, 5, 50, {35, 55}}, o);
    EXPECT_EQ(m.parameters().snapshot(), before) << opt;
  }
}

TEST(Train, WarmupRampsTheFirstSteps) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 8, 4, 55);
  const ScheduleSource src{AnchorMode::fixed, 5, 50, {}};
  TrainOptions o;
  o.steps = 1;
  o.batch = 4;
  o.optimizer = "sgd";
  TrajectoryModel init(small_config(), 4);
  const auto start = init.parameters().snapshot();
  auto first_step = [&](long warmup) {
    TrajectoryModel m(small_config(), 4);
    o.warmup_steps = warmup;
    train(m, samples, src, o);
    return m.parameters().snapshot();
  };
  // A one-step ramp is full strength from the start; a ten-step ramp takes a tenth of the step.
  EXPECT_EQ(first_step(0), first_step(1));
  const auto full = first_step(0), ramped = first_step(10);
  for (const auto& [name, v] : start) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(ramped.at(name)[i] - v[i], 0.1 * (full.at(name)[i] - v[i]), 1e-12) << name;
    }
  }
}

TEST(Train, DegenerateRandomAnchorsReproduceFixedTraining) {
  const auto samples = synthetic_samples(data::SyntheticKind::lane_change, 8, 4, 55);
  TrainOptions o;
  o.steps = 6;
  o.batch = 3;
  TrajectoryModel a(small_config(), 1), b(small_config(), 1);
  const auto ra = train(a, samples, ScheduleSource{AnchorMode::fixed, 5, 50, {}}, o);
  const auto rb = train(b, samples, ScheduleSource{AnchorMode::random, 5, 50, {50, 50}}, o);
  EXPECT_EQ(ra.loss_curve, rb.loss_curve);
  EXPECT_EQ(a.parameters().snapshot(), b.parameters().snapshot());
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto samples = synthetic_samples(data::SyntheticKind::arc, 8, 4, 55);
  TrainOptions o;
  o.steps = 5;
  o.batch = 4;
  TrajectoryModel a(small_config(), 2), b(small_config(), 2);
  const ScheduleSource src{AnchorMode::random, 5, 50, {35, 55}};
  EXPECT_EQ(train(a, samples, src, o).loss_curve, train(b, samples, src, o).loss_curve);
  EXPECT_EQ(a.parameters().snapshot(), b.parameters().snapshot());
}

TEST(Train, LossTrendsDownOnSanitySet) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 32, 5, 55);
  TrajectoryModel m(ModelConfig{}, 1);
  TrainOptions o;
  o.steps = 150;
  o.batch = 16;
  o.lr = 0.01;
  const auto r = train(m, samples, ScheduleSource{AnchorMode::random, 5, 50, {35, 55}}, o);
  auto avg = [&](std::size_t b, std::size_t e) {
    double s = 0;
    for (std::size_t i = b; i < e; ++i) s += r.loss_curve[i];
    return s / static_cast<double>(e - b);
  };
  EXPECT_LT(avg(130, 150), avg(0, 20));
}

TEST(Train, NonFiniteLossNamesSample) {
  auto samples = synthetic_samples(data::SyntheticKind::const_vel, 4, 4, 55);
  samples[2].id = "poisoned";
  samples[2].agents[0].states[1].dx = std::nan("");
  TrajectoryModel m(small_config(), 1);
  TrainOptions o;
  o.steps = 1;
  o.batch = 4;
  try {
    train(m, samples, ScheduleSource{AnchorMode::fixed, 5, 50, {}}, o);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("poisoned"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsShortFutures) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 2, 4, 40);
  TrajectoryModel m(small_config(), 1);
  EXPECT_THROW(train(m, samples, ScheduleSource{AnchorMode::random, 5, 50, {35, 55}}, TrainOptions{}),
               std::invalid_argument);
}

TEST(Train, CoordinateHeadNeedsMatchingFixedAnchors) {
  const auto samples = synthetic_samples(data::SyntheticKind::const_vel, 2, 4, 55);
  TrajectoryModel m(small_config(HeadKind::coordinates), 1);
  EXPECT_THROW(train(m, samples, ScheduleSource{AnchorMode::random, 5, 50, {35, 55}}, TrainOptions{}),
               std::invalid_argument);
}
