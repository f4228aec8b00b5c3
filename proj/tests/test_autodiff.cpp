#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "polytraj/autodiff.hpp"
#include "polytraj/checkpoint.hpp"
#include "polytraj/errors.hpp"
#include "polytraj/optim.hpp"
#include "support/gradcheck.hpp"

using namespace polytraj;
using ad::Array;
using ad::Node;
using ad::Shape;
using polytraj::testing::check_gradients;
using polytraj::testing::random_array;

namespace {

void expect_gradients_ok(const std::function<Node(const std::vector<Node>&)>& f, std::vector<Node> leaves) {
  const auto bad = check_gradients(f, std::move(leaves));
  for (const auto& m : bad) ADD_FAILURE() << m.where << ": analytic " << m.analytic << " numeric " << m.numeric;
}

}  // namespace

TEST(Array, RejectsMismatchedValueCount) {
  EXPECT_THROW(Array(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_EQ(Array(Shape{2, 3}).size(), 6u);
}

TEST(Ops, MatmulHandExample) {
  const Node c = ad::matmul(ad::constant(Array::matrix({{1, 2}})), ad::constant(Array::matrix({{3}, {4}})));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(c.value()[0], 11.0);
}

TEST(Ops, SigmoidAtZero) { EXPECT_DOUBLE_EQ(ad::sigmoid(ad::constant(Array::scalar(0))).value().item(), 0.5); }

TEST(Ops, SoftmaxOfEqualScores) {
  const Node s = ad::softmax(ad::constant(Array::vector({0, 0})));
  EXPECT_DOUBLE_EQ(s.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.value()[1], 0.5);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  try {
    ad::matmul(ad::constant(Array(Shape{2, 3})), ad::constant(Array(Shape{2, 3})));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3) and (2,3)"), std::string::npos) << msg;
  }
  EXPECT_THROW(ad::add(ad::constant(Array(Shape{2, 3})), ad::constant(Array(Shape{3, 2}))), ShapeError);
}

TEST(Ops, LogOfNonPositiveIsAnError) {
  EXPECT_THROW(ad::log(ad::constant(Array::vector({1.0, 0.0}))), NumericalError);
}

TEST(Ops, NonFiniteResultIsAnError) {
  EXPECT_THROW(ad::exp(ad::constant(Array::scalar(1e4))), NumericalError);
}

TEST(Backward, SumGivesOnes) {
  Node p = ad::variable(Array::vector({1, 2, 3}));
  ad::backward(ad::sum(p));
  EXPECT_EQ(p.grad(), Array::vector({1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  Node p = ad::variable(Array::vector({1, 2}));
  ad::backward(ad::sum(p * p));
  EXPECT_EQ(p.grad(), Array::vector({2, 4}));
}

TEST(Backward, NodeUsedTwiceAccumulates) {
  Node x = ad::variable(Array::scalar(3.0));
  ad::backward(x + x);
  EXPECT_DOUBLE_EQ(x.grad().item(), 2.0);
}

TEST(Backward, NonScalarLossIsAnError) {
  Node p = ad::variable(Array::vector({1, 2}));
  EXPECT_THROW(ad::backward(p * p), ShapeError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Node p = ad::variable(Array::vector({1, 2}));
  Node y;
  {
    ad::NoGradGuard guard;
    EXPECT_FALSE(ad::grad_enabled());
    y = ad::sum(p * p);
  }
  EXPECT_TRUE(ad::grad_enabled());
  EXPECT_FALSE(y.requires_grad());
}

// Every op against central differences on random inputs.
class OpGradient : public ::testing::Test {
 protected:
  Rng rng{42};
};

TEST_F(OpGradient, Elementwise) {
  expect_gradients_ok([](const auto& l) { return ad::sum(l[0] + l[1]); },
                      {ad::variable(random_array({3, 4}, rng)), ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::sub(l[0], l[1]) * l[0]); },
                      {ad::variable(random_array({3, 4}, rng)), ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::sigmoid(l[0]) * ad::tanh(l[0])); },
                      {ad::variable(random_array({4, 4}, rng, -3, 3))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::exp(l[0])); }, {ad::variable(random_array({8}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::log(l[0])); },
                      {ad::variable(random_array({8}, rng, 0.5, 2.0))});
  // Central differences carry an h^2 error on cubics, so keep gradients well above it.
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(l[0], 3.0)); },
                      {ad::variable(random_array({2, 5}, rng, 0.5, 1.5))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(l[0], 0.5)); },
                      {ad::variable(random_array({6}, rng, 0.5, 2.0))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::scale(l[0], -2.5) * l[0]); },
                      {ad::variable(random_array({6}, rng))});
}

TEST_F(OpGradient, Broadcasting) {
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::tanh(l[0] + l[1])); },
                      {ad::variable(random_array({4, 3}, rng)), ad::variable(random_array({1, 3}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::tanh(l[0] * l[1])); },
                      {ad::variable(random_array({4, 3}, rng)), ad::variable(random_array({4, 1}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::tanh(l[0] - l[1])); },
                      {ad::variable(random_array({4, 3}, rng)), ad::variable(random_array({}, rng))});
}

TEST_F(OpGradient, MatmulAndReductions) {
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::tanh(ad::matmul(l[0], l[1]))); },
                      {ad::variable(random_array({3, 5}, rng)), ad::variable(random_array({5, 2}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::mean(ad::power(ad::sum(l[0], 0), 2.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(ad::sum(l[0], 1), 2.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(ad::mean(l[0], 1), 2.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(ad::mean(l[0], 0), 3.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
}

TEST_F(OpGradient, StructuralOps) {
  expect_gradients_ok(
      [](const auto& l) {
        const Node parts[] = {l[0], l[1]};
        return ad::sum(ad::tanh(ad::concat(parts, 1)) * ad::concat(parts, 1));
      },
      {ad::variable(random_array({3, 2}, rng)), ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok(
      [](const auto& l) {
        const Node parts[] = {l[0], l[1]};
        return ad::sum(ad::exp(ad::concat(parts, 0)));
      },
      {ad::variable(random_array({1, 3}, rng)), ad::variable(random_array({2, 3}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(ad::slice(l[0], 1, 1, 3), 2.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok([](const auto& l) { return ad::sum(ad::power(ad::slice(l[0], 0, 1, 2), 3.0)); },
                      {ad::variable(random_array({3, 4}, rng))});
  expect_gradients_ok(
      [](const auto& l) { return ad::sum(ad::softmax(l[0]) * l[1]); },
      {ad::variable(random_array({3, 5}, rng, -2, 2)), ad::variable(random_array({3, 5}, rng))});
}

TEST_F(OpGradient, TwoLayerNetwork) {
  const Array x = random_array({6, 4}, rng);
  const Array y = random_array({6, 2}, rng);
  expect_gradients_ok(
      [&](const auto& l) {
        const Node h = ad::tanh(ad::matmul(ad::constant(x), l[0]) + l[1]);
        const Node out = ad::matmul(h, l[2]) + l[3];
        const Node r = out - ad::constant(y);
        return ad::mean(r * r);
      },
      {ad::variable(random_array({4, 8}, rng)), ad::variable(random_array({1, 8}, rng)),
       ad::variable(random_array({8, 2}, rng)), ad::variable(random_array({1, 2}, rng))});
}

TEST(Sgd, HandExamples) {
  ad::ParameterSet ps;
  Node p = ps.add("p", Array::scalar(1.0));
  p.mutable_grad() = Array::scalar(1.0);
  ad::sgd_step(ps.items(), 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p.value().item(), 0.9);
  EXPECT_DOUBLE_EQ(p.grad().item(), 0.0);

  p.mutable_grad() = Array::scalar(100.0);
  ad::sgd_step(ps.items(), 0.1, 1.0);
  EXPECT_DOUBLE_EQ(p.value().item(), 0.8);

  ad::sgd_step(ps.items(), 0.1, 1.0);
  EXPECT_DOUBLE_EQ(p.value().item(), 0.8);
}

TEST(Sgd, NonFiniteGradientNamesParameter) {
  ad::ParameterSet ps;
  Node p = ps.add("decoder.bias", Array::scalar(1.0));
  p.mutable_grad() = Array::scalar(std::nan(""));
  try {
    ad::sgd_step(ps.items(), 0.1, 1.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.bias"), std::string::npos);
  }
}

TEST(ParameterSet, DuplicateNamesRejected) {
  ad::ParameterSet ps;
  ps.add("w", Array::scalar(1.0));
  EXPECT_THROW(ps.add("w", Array::scalar(2.0)), std::invalid_argument);
}

TEST(Adam, DescendsAQuadratic) {
  ad::ParameterSet ps;
  Node p = ps.add("p", Array::vector({3.0, -2.0}));
  ad::Adam adam;
  for (int i = 0; i < 2000; ++i) {
    ad::backward(ad::sum(p * p));
    adam.step(ps.items(), 0.05);
  }
  EXPECT_NEAR(p.value()[0], 0.0, 1e-3);
  EXPECT_NEAR(p.value()[1], 0.0, 1e-3);
}

TEST(Determinism, SameSeededStepIsBitIdentical) {
  auto run = [] {
    Rng rng(9);
    ad::ParameterSet ps;
    Node w = ps.add("w", random_array({4, 3}, rng));
    const Array x = random_array({5, 4}, rng);
    ad::Adam adam;
    for (int i = 0; i < 3; ++i) {
      ad::backward(ad::mean(ad::tanh(ad::matmul(ad::constant(x), w))));
      adam.step(ps.items(), 0.01);
    }
    return w.value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(3);
  ad::ParameterSet ps;
  ps.add("a", random_array({3, 4}, rng, -1e6, 1e6));
  ps.add("b.c", Array::vector({1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308}));
  ps.add("s", Array::scalar(0.1));
  std::stringstream ss;
  ad::write_checkpoint(ss, ad::make_checkpoint(ps, {{"model.head", "polynomial"}}));
  const auto back = ad::read_checkpoint(ss);
  EXPECT_EQ(back.header.at("model.head"), "polynomial");

  ad::ParameterSet other;
  other.add("a", Array(Shape{3, 4}));
  other.add("b.c", Array(Shape{4}));
  other.add("s", Array::scalar(0));
  ad::restore_parameters(other, back);
  EXPECT_EQ(other.snapshot(), ps.snapshot());
}

TEST(Checkpoint, ShapeMismatchAndMissingRejected) {
  ad::ParameterSet ps;
  ps.add("a", Array(Shape{2, 2}));
  const auto ck = ad::make_checkpoint(ps);
  ad::ParameterSet wrong;
  wrong.add("a", Array(Shape{4}));
  EXPECT_THROW(ad::restore_parameters(wrong, ck), std::exception);
  ad::ParameterSet missing;
  missing.add("b", Array(Shape{2, 2}));
  EXPECT_THROW(ad::restore_parameters(missing, ck), std::exception);
}
