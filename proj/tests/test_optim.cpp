#include <gtest/gtest.h>

#include "alfr/optim.hpp"
#include "support.hpp"

using namespace alfr;
using alfr::test::random_matrix;

TEST(MseLoss, ZeroWhenEqual) {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(4, 3, rng);
  EXPECT_EQ(mse_loss(x, x).value, 0.0);
}

TEST(MseLoss, HandArithmetic) {
  Matrix p(1, 2), t(1, 2);
  p << 0, 0;
  t << 1, 1;
  const auto loss = mse_loss(p, t);
  EXPECT_DOUBLE_EQ(loss.value, 2.0);
  EXPECT_DOUBLE_EQ(loss.gradient(0, 0), -2.0);
}

TEST(MseLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = random_matrix(8, 8, rng, -3, 3);
    const Matrix t = random_matrix(8, 8, rng, -3, 3);
    double total = 0.0;
    for (int r = 0; r < 8; ++r) {
      double row = 0.0;
      for (int c = 0; c < 8; ++c) row += (p(r, c) - t(r, c)) * (p(r, c) - t(r, c));
      total += row;
    }
    const auto loss = mse_loss(p, t);
    EXPECT_NEAR(loss.value, total / 8.0, 1e-12);
    EXPECT_GE(loss.value, 0.0);
    EXPECT_TRUE(loss.gradient.isApprox(2.0 * (p - t) / 8.0));
  }
}

TEST(MseLoss, ShapeMismatchThrows) {
  EXPECT_THROW(mse_loss(Matrix::Zero(2, 3), Matrix::Zero(3, 2)), ShapeError);
}

TEST(CrossEntropy, PerfectPredictionIsTiny) {
  Matrix p(4, 1);
  p << 1, 0, 1, 0;
  const Labels s{1, 0, 1, 0};
  const auto loss = cross_entropy(p, s);
  EXPECT_LE(loss.value, 1e-9);
  EXPECT_GE(loss.value, 0.0);
}

TEST(CrossEntropy, UniformHalfIsLn2) {
  const Labels s{1, 0, 0, 1, 1};
  EXPECT_NEAR(cross_entropy(Matrix::Constant(5, 1, 0.5), s).value, std::log(2.0), 1e-15);
}

TEST(CrossEntropy, ClampKeepsLossFinite) {
  Matrix p(2, 1);
  p << 0, 1;
  const Labels s{1, 0};
  const auto loss = cross_entropy(p, s);
  EXPECT_TRUE(std::isfinite(loss.value));
  // 1 - 1e-12 is not exact in double, so the p = 1 side is off by ~1e-5.
  EXPECT_NEAR(loss.value, -std::log(kProbabilityClamp), 1e-4);
  EXPECT_TRUE(loss.gradient.allFinite());
}

TEST(CrossEntropy, RejectsNonBinaryLabelsAndShapes) {
  const Labels bad{0, 2};
  EXPECT_THROW(cross_entropy(Matrix::Constant(2, 1, 0.5), bad), std::invalid_argument);
  const Labels ok{0, 1};
  EXPECT_THROW(cross_entropy(Matrix::Constant(3, 1, 0.5), ok), ShapeError);
  EXPECT_THROW(cross_entropy(Matrix::Constant(2, 2, 0.5), ok), ShapeError);
}

namespace {

DenseNetwork small_net(std::uint64_t seed) {
  return init_network({{3, 4, Activation::tanh}, {4, 2, Activation::identity}}, seed);
}

GradientSet random_grads(const DenseNetwork& net, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto g = GradientSet::zeros_like(net);
  for (auto& w : g.weights) w = random_matrix(w.rows(), w.cols(), rng, lo, hi);
  for (auto& b : g.biases) b = random_matrix(b.size(), 1, rng, lo, hi);
  return g;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  auto net = small_net(1);
  auto state = AdamState::for_network(net);
  std::mt19937_64 rng(3);
  adam_step(net, random_grads(net, rng), state);
  const auto before = net;
  const Matrix m_before = state.first_moment.weights[0];
  const Matrix v_before = state.second_moment.weights[0];
  adam_step(net, GradientSet::zeros_like(net), state);
  EXPECT_TRUE(net.same_parameters(before));
  EXPECT_TRUE(state.first_moment.weights[0].isApprox(0.9 * m_before));
  EXPECT_TRUE(state.second_moment.weights[0].isApprox(0.999 * v_before));
  EXPECT_EQ(state.step_count, 2u);
}

TEST(Adam, FirstStepMovesBySignTimesLearningRate) {
  auto net = small_net(2);
  const auto before = net;
  auto state = AdamState::for_network(net, AdamHyper{0.01});
  std::mt19937_64 rng(4);
  const auto g = random_grads(net, rng, 0.5, 2.0);  // |g| >> epsilon
  adam_step(net, g, state);
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const Matrix delta = before.layer(i).weights - net.layer(i).weights;
    for (Eigen::Index k = 0; k < delta.size(); ++k) {
      const double gk = g.weights[i].data()[k];
      EXPECT_NEAR(delta.data()[k], 0.01 * gk / (std::abs(gk) + 1e-8), 1e-12);
    }
  }
  EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, MatchesScalarReferenceOverManySteps) {
  // One-parameter network; reference recursion written out by hand.
  DenseLayer layer{{1, 1, Activation::identity}, Matrix::Constant(1, 1, 0.3), Vector::Zero(1)};
  DenseNetwork net({layer});
  const AdamHyper h{0.05, 0.8, 0.95, 1e-6};
  auto state = AdamState::for_network(net, h);
  double w = 0.3, m = 0.0, v = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 1; t <= 50; ++t) {
    const double g = u(rng);
    auto grads = GradientSet::zeros_like(net);
    grads.weights[0](0, 0) = g;
    adam_step(net, grads, state);
    m = h.beta1 * m + (1 - h.beta1) * g;
    v = h.beta2 * v + (1 - h.beta2) * g * g;
    const double mhat = m / (1 - std::pow(h.beta1, t));
    const double vhat = v / (1 - std::pow(h.beta2, t));
    w -= h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
    ASSERT_NEAR(net.layer(0).weights(0, 0), w, 1e-13) << "step " << t;
  }
}

TEST(Adam, IdenticalCallsAreIdentical) {
  auto a = small_net(3), b = small_net(3);
  auto sa = AdamState::for_network(a), sb = AdamState::for_network(b);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const auto g = random_grads(a, rng);
    adam_step(a, g, sa);
    adam_step(b, g, sb);
  }
  EXPECT_TRUE(a.same_parameters(b));
}

TEST(Adam, FrozenNetworkThrows) {
  auto net = small_net(4);
  auto state = AdamState::for_network(net);
  net.freeze();
  EXPECT_THROW(adam_step(net, GradientSet::zeros_like(net), state), FreezeError);
}

TEST(Adam, IncongruentGradientsThrow) {
  auto net = small_net(4);
  auto state = AdamState::for_network(net);
  const auto other = init_network({{3, 5, Activation::tanh}, {5, 2, Activation::identity}}, 1);
  EXPECT_THROW(adam_step(net, GradientSet::zeros_like(other), state), ShapeError);
}

TEST(Adam, HyperValidation) {
  EXPECT_THROW(AdamHyper{0.0}.validate(), std::invalid_argument);
  EXPECT_THROW((AdamHyper{1e-3, 1.0}).validate(), std::invalid_argument);
  EXPECT_THROW((AdamHyper{1e-3, 0.9, -0.1}).validate(), std::invalid_argument);
  EXPECT_THROW((AdamHyper{1e-3, 0.9, 0.999, 0.0}).validate(), std::invalid_argument);
}

TEST(ScaledAdam, ZeroScaleNeverMovesParams) {
  auto net = small_net(5);
  const auto before = net;
  auto state = AdamState::for_network(net);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 25; ++i) scaled_adam_step(net, random_grads(net, rng), state, 0.0);
  EXPECT_TRUE(net.same_parameters(before));
  EXPECT_EQ(state.step_count, 25u);
}

TEST(ScaledAdam, UnitScaleEqualsAdamStep) {
  auto a = small_net(6), b = small_net(6);
  auto sa = AdamState::for_network(a), sb = AdamState::for_network(b);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const auto g = random_grads(a, rng);
    adam_step(a, g, sa);
    scaled_adam_step(b, g, sb, 1.0);
  }
  EXPECT_TRUE(a.same_parameters(b));
}

TEST(ScaledAdam, HalfScaleEqualsHalvedGradient) {
  auto a = small_net(7), b = small_net(7);
  auto sa = AdamState::for_network(a), sb = AdamState::for_network(b);
  std::mt19937_64 rng(9);
  auto g = random_grads(a, rng);
  scaled_adam_step(a, g, sa, 0.5);
  g *= 0.5;
  adam_step(b, g, sb);
  for (std::size_t i = 0; i < a.depth(); ++i)
    EXPECT_TRUE(a.layer(i).weights.isApprox(b.layer(i).weights, 1e-14));
}

TEST(ScaledAdam, ScaleOutsideUnitIntervalThrows) {
  auto net = small_net(8);
  auto state = AdamState::for_network(net);
  const auto g = GradientSet::zeros_like(net);
  EXPECT_THROW(scaled_adam_step(net, g, state, -0.1), std::invalid_argument);
  EXPECT_THROW(scaled_adam_step(net, g, state, 1.5), std::invalid_argument);
  EXPECT_THROW(scaled_adam_step(net, g, state, std::nan("")), std::invalid_argument);
  EXPECT_EQ(state.step_count, 0u);
}

TEST(ScaledAdam, LayoutInvariant) {
  // Same parameters split across layers differently give the same per-entry update.
  DenseNetwork one({DenseLayer{{2, 2, Activation::identity}, Matrix::Constant(2, 2, 0.1), Vector::Zero(2)}});
  auto state = AdamState::for_network(one);
  auto g = GradientSet::zeros_like(one);
  g.weights[0] << 1.0, -2.0, 0.5, 3.0;
  adam_step(one, g, state);
  for (Eigen::Index k = 0; k < 4; ++k) {
    DenseNetwork scalar({DenseLayer{{1, 1, Activation::identity}, Matrix::Constant(1, 1, 0.1), Vector::Zero(1)}});
    auto s = AdamState::for_network(scalar);
    auto gs = GradientSet::zeros_like(scalar);
    gs.weights[0](0, 0) = g.weights[0].data()[k];
    adam_step(scalar, gs, s);
    EXPECT_EQ(scalar.layer(0).weights(0, 0), one.layer(0).weights.data()[k]);
  }
}
