#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"
#include "chatgnn/gradcheck.hpp"
#include "chatgnn/rng.hpp"
#include "oracles.hpp"

using namespace chatgnn;

namespace {

class AutodiffTest : public ::testing::Test {
 protected:
  void SetUp() override { active_tape().clear(); }
  void TearDown() override { active_tape().clear(); }
};

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

}  // namespace

TEST_F(AutodiffTest, TensorShapeAndItem) {
  Tensor t(2, 3, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.shape_string(), "[2x3]");
  EXPECT_THROW(t.item(), DimensionError);
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor(2, 2, std::vector<Real>{1.0, 2.0}), DimensionError);
}

TEST_F(AutodiffTest, TensorHandlesShareStorageButCloneDoesNot) {
  Tensor a = Tensor::from_rows({{1, 2}});
  Tensor b = a;
  b(0, 0) = 9;
  EXPECT_EQ(a(0, 0), 9);
  Tensor c = a.clone();
  c(0, 0) = 0;
  EXPECT_EQ(a(0, 0), 9);
  EXPECT_FALSE(c.shares_storage(a));
}

TEST_F(AutodiffTest, MatmulIdentityAndHandArithmetic) {
  const Tensor id = Tensor::from_rows({{1, 0}, {0, 1}});
  const Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  EXPECT_TRUE(matmul(id, m).values_equal(m));
  EXPECT_DOUBLE_EQ(matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}})).item(), 11.0);
}

TEST_F(AutodiffTest, MatmulShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor(2, 3), Tensor(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2x3]"), std::string::npos) << what;
  }
}

TEST_F(AutodiffTest, MatmulGradientMatchesFiniteDifferences) {
  Rng rng(11);
  Tensor a = oracle::random_tensor(5, 7, rng), b = oracle::random_tensor(7, 3, rng);
  Tensor w = oracle::random_tensor(5, 3, rng);
  const auto r = grad_check([&] { return sum(hadamard(matmul(a, b), w)); }, {a, b}, 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST_F(AutodiffTest, ElementwiseExamples) {
  EXPECT_TRUE(hadamard(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{0, 0}}))
                  .values_equal(Tensor::from_rows({{0, 0}})));
  EXPECT_TRUE(add(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3, 4}}))
                  .values_equal(Tensor::from_rows({{4, 6}})));
  EXPECT_TRUE(add(Tensor::from_rows({{1, 2}, {3, 4}}), Tensor::from_rows({{10, 20}}))
                  .values_equal(Tensor::from_rows({{11, 22}, {13, 24}})));
  EXPECT_THROW(add(Tensor(2, 2), Tensor(2, 3)), DimensionError);
  EXPECT_THROW(hadamard(Tensor(2, 2), Tensor(1, 2)), DimensionError);
}

TEST_F(AutodiffTest, HadamardGradientOn4x4) {
  Rng rng(3);
  Tensor a = oracle::random_tensor(4, 4, rng), b = oracle::random_tensor(4, 4, rng);
  const auto r = grad_check([&] { return sum(hadamard(a, b)); }, {a, b}, 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST_F(AutodiffTest, ActivationExamples) {
  EXPECT_EQ(tanh(Tensor::from_rows({{0}})).item(), 0.0);
  EXPECT_TRUE(relu(Tensor::from_rows({{-3, 2}})).values_equal(Tensor::from_rows({{0, 2}})));
  EXPECT_TRUE(leaky_relu(Tensor::from_rows({{-10, 2}}), 0.2)
                  .values_equal(Tensor::from_rows({{-2, 2}})));
}

TEST_F(AutodiffTest, TanhGradientWithinOneMillionth) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Tensor x = oracle::random_tensor(3, 4, rng, -2, 2);
    const auto r = grad_check([](const Tensor& t) { return sum(tanh(t)); }, x, 1e-6);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
  }
}

TEST_F(AutodiffTest, LayerNormExamples) {
  const Tensor g = Tensor::from_rows({{1, 1, 1}}), b(1, 3);
  const Tensor flat = layer_norm(Tensor::from_rows({{1, 1, 1}}), g, b);
  for (double v : flat.data()) EXPECT_EQ(v, 0.0);
  const Tensor out =
      layer_norm(Tensor::from_rows({{-1, 1}}), Tensor::from_rows({{1, 1}}), Tensor(1, 2), 1e-300);
  EXPECT_NEAR(out(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(out(0, 1), 1.0, 1e-12);
}

TEST_F(AutodiffTest, LayerNormRowsAreCentredWithUnitVariance) {
  Rng rng(8);
  const Tensor x = oracle::random_tensor(6, 9, rng, -500, 500);
  const Tensor y = layer_norm(x, Tensor(1, 9, 1.0), Tensor(1, 9));
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (double v : y.row(i)) mean += v;
    mean /= 9.0;
    for (double v : y.row(i)) var += (v - mean) * (v - mean);
    var /= 9.0;
    EXPECT_LE(std::abs(mean), 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST_F(AutodiffTest, LayerNormGradientOn3x5) {
  Rng rng(13);
  Tensor x = oracle::random_tensor(3, 5, rng), g = oracle::random_tensor(1, 5, rng, 0.5, 1.5);
  Tensor b = oracle::random_tensor(1, 5, rng), w = oracle::random_tensor(3, 5, rng);
  const auto r = grad_check([&] { return sum(hadamard(layer_norm(x, g, b), w)); }, {x, g, b}, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  const auto plain = grad_check([&](const Tensor& t) { return sum(layer_norm(t, g, b)); }, x, 1e-4);
  EXPECT_TRUE(plain.passed) << plain.max_rel_error;
}

TEST_F(AutodiffTest, GatherRowsExamples) {
  const Tensor a = Tensor::from_rows({{1}, {2}, {3}});
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_TRUE(gather_rows(a, idx).values_equal(Tensor::from_rows({{3}, {1}})));
  const Tensor empty = gather_rows(Tensor(3, 4), std::vector<std::size_t>{});
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_EQ(empty.cols(), 4u);
  EXPECT_THROW(gather_rows(a, std::vector<std::size_t>{3}), IndexError);
}

TEST_F(AutodiffTest, GatherDuplicateIndicesAccumulateGradient) {
  Tensor a = Tensor::from_rows({{1, 1}, {2, 2}});
  a.set_requires_grad();
  const Tensor w = Tensor::from_rows({{1, 2}, {3, 4}});
  backward(sum(hadamard(gather_rows(a, std::vector<std::size_t>{1, 1}), w)));
  EXPECT_EQ(a.grad()[0], 0.0);
  EXPECT_EQ(a.grad()[2], 4.0);
  EXPECT_EQ(a.grad()[3], 6.0);
}

TEST_F(AutodiffTest, ScatterAddExamples) {
  const Tensor src = Tensor::from_rows({{1}, {2}});
  EXPECT_TRUE(scatter_add_rows(src, std::vector<std::size_t>{0, 0}, 2)
                  .values_equal(Tensor::from_rows({{3}, {0}})));
  EXPECT_THROW(scatter_add_rows(src, std::vector<std::size_t>{0, 2}, 2), IndexError);
  EXPECT_THROW(scatter_add_rows(src, std::vector<std::size_t>{0}, 2), DimensionError);
}

TEST_F(AutodiffTest, ScatterAddMatchesNaiveLoopAndIgnoresOrder) {
  Rng rng(21);
  const Tensor src = oracle::random_tensor(20, 3, rng);
  std::vector<std::size_t> idx(20);
  for (auto& i : idx) i = rng.below(5);
  const Tensor out = scatter_add_rows(src, idx, 5);
  std::vector<std::vector<double>> naive(5, std::vector<double>(3, 0.0));
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t d = 0; d < 3; ++d) naive[idx[i]][d] += src(i, d);
  EXPECT_LE(oracle::max_abs_diff(out, naive), 1e-12);

  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Tensor src_p(20, 3);
  std::vector<std::size_t> idx_p(20);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t d = 0; d < 3; ++d) src_p(i, d) = src(perm[i], d);
    idx_p[i] = idx[perm[i]];
  }
  EXPECT_LE(oracle::max_abs_diff(scatter_add_rows(src_p, idx_p, 5), oracle::to_matrix(out)), 1e-12);
}

TEST_F(AutodiffTest, GatherAndScatterAreAdjoint) {
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(10), e = rng.below(25), d = 1 + rng.below(4);
    std::vector<std::size_t> idx(e);
    for (auto& i : idx) i = rng.below(n);
    const Tensor a = oracle::random_tensor(n, d, rng), c = oracle::random_tensor(e, d, rng);
    EXPECT_NEAR(dot(gather_rows(a, idx), c), dot(a, scatter_add_rows(c, idx, n)), 1e-12);
  }
}

TEST_F(AutodiffTest, SegmentSoftmaxSumsToOnePerSegment) {
  Rng rng(2);
  const std::vector<std::size_t> seg{0, 0, 2, 2, 2, 0};
  const Tensor s = oracle::random_tensor(6, 1, rng, -4, 4);
  const Tensor p = segment_softmax(s, seg, 3);
  double s0 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < 6; ++i) (seg[i] == 0 ? s0 : s2) += p(i, 0);
  EXPECT_NEAR(s0, 1.0, 1e-12);
  EXPECT_NEAR(s2, 1.0, 1e-12);
}

TEST_F(AutodiffTest, CrossEntropyExamples) {
  const std::vector<std::size_t> labels{0, 1, 2};
  const std::vector<std::size_t> mask{0, 1, 2};
  EXPECT_NEAR(softmax_cross_entropy(Tensor(3, 4, 0.7), labels, mask).item(), std::log(4.0), 1e-12);
  EXPECT_NEAR(softmax_cross_entropy(Tensor(3, 4), labels, mask).item(), 1.3863, 1e-4);
  const Tensor saturated = Tensor::from_rows({{10, -10}});
  EXPECT_LT(softmax_cross_entropy(saturated, std::vector<std::size_t>{0},
                                  std::vector<std::size_t>{0})
                .item(),
            1e-4);
  EXPECT_THROW(softmax_cross_entropy(Tensor(3, 4), labels, std::vector<std::size_t>{}),
               std::invalid_argument);
  EXPECT_THROW(softmax_cross_entropy(Tensor(3, 2), labels, mask), IndexError);
}

TEST_F(AutodiffTest, CrossEntropyGradientIsZeroOffMask) {
  Rng rng(4);
  Tensor z = oracle::random_tensor(4, 3, rng);
  z.set_requires_grad();
  backward(softmax_cross_entropy(z, std::vector<std::size_t>{0, 1, 2, 0},
                                 std::vector<std::size_t>{1, 3}));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(z.grad()[0 * 3 + j], 0.0);
    EXPECT_EQ(z.grad()[2 * 3 + j], 0.0);
  }
  const auto r = grad_check(
      [](const Tensor& t) {
        return softmax_cross_entropy(t, std::vector<std::size_t>{0, 1, 2, 0},
                                     std::vector<std::size_t>{1, 3});
      },
      z, 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST_F(AutodiffTest, BackwardExamples) {
  Tensor w = Tensor::from_rows({{1, -2}, {3, 0.5}});
  w.set_requires_grad();
  backward(sum(w));
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
  w.zero_grad();
  active_tape().clear();
  backward(sum(hadamard(w, w)));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * w.data()[i]);
}

TEST_F(AutodiffTest, RepeatedBackwardAccumulatesIntoLeaves) {
  Tensor w = Tensor::from_rows({{1, 2}});
  w.set_requires_grad();
  const Tensor loss = sum(scale(w, 3.0));
  backward(loss);
  backward(loss);
  EXPECT_EQ(w.grad()[0], 6.0);
  EXPECT_EQ(w.grad()[1], 6.0);
}

TEST_F(AutodiffTest, BackwardRejectsNonScalarLoss) {
  Tensor w(2, 2, 1.0);
  w.set_requires_grad();
  EXPECT_THROW(backward(scale(w, 2.0)), std::invalid_argument);
}

TEST_F(AutodiffTest, NoGradGuardStopsRecording) {
  Tensor w(2, 2, 1.0);
  w.set_requires_grad();
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_recording_enabled());
    sum(w);
  }
  EXPECT_TRUE(grad_recording_enabled());
  EXPECT_EQ(active_tape().size(), 0u);
}

TEST_F(AutodiffTest, TapeReplaysInExactReverseOrder) {
  Tensor x = Tensor::from_rows({{0.3, -0.2}});
  x.set_requires_grad();
  const Tensor y = tanh(scale(x, 2.0));
  const Tensor loss = sum(hadamard(y, y));
  const auto& nodes = active_tape().nodes();
  ASSERT_EQ(nodes.size(), 4u);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (const Tensor& in : nodes[i].inputs)
      for (std::size_t j = i; j < nodes.size(); ++j)
        EXPECT_FALSE(in.shares_storage(nodes[j].output)) << "input produced by a later node";
  backward(loss);
  const double t0 = std::tanh(0.6);
  EXPECT_NEAR(x.grad()[0], 2.0 * t0 * (1 - t0 * t0) * 2.0, 1e-12);
}

TEST_F(AutodiffTest, ForwardOpsAreBitDeterministic) {
  Rng rng(77);
  const Tensor a = oracle::random_tensor(6, 5, rng), b = oracle::random_tensor(5, 4, rng);
  const Tensor g(1, 4, 1.0), bb(1, 4);
  EXPECT_TRUE(layer_norm(tanh(matmul(a, b)), g, bb).values_equal(layer_norm(tanh(matmul(a, b)), g, bb)));
}

TEST_F(AutodiffTest, GradCheckConstantFunctionPasses) {
  Tensor x(2, 2, 0.5);
  const auto r = grad_check([](const Tensor&) { return Tensor::scalar(3.0); }, x, 1e-12);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST_F(AutodiffTest, GradCheckDetectsWrongGradientAndNonFinite) {
  Tensor x(1, 3, 0.5);
  // Forward of 2x recorded with the backward rule of x: gradient off by a factor 2.
  const auto wrong = grad_check(
      [](const Tensor& t) {
        Tensor doubled;
        {
          NoGradGuard guard;
          doubled = scale(t, 2.0);
        }
        return sum(add(t, sub(doubled, t)));
      },
      x, 1e-4);
  EXPECT_FALSE(wrong.passed);
  const auto inf = grad_check(
      [](const Tensor& t) { return scale(sum(t), std::numeric_limits<double>::infinity()); }, x,
      1e-4);
  EXPECT_FALSE(inf.finite);
  EXPECT_FALSE(inf.passed);
}

TEST_F(AutodiffTest, SmoothnessProbeRecordsKinkDistanceAndVariance) {
  SmoothnessProbe probe;
  relu(Tensor::from_rows({{-0.5, 0.002, 3}}));
  layer_norm(Tensor::from_rows({{1, 1.1}}), Tensor(1, 2, 1.0), Tensor(1, 2));
  EXPECT_DOUBLE_EQ(probe.min_kink_distance(), 0.002);
  EXPECT_NEAR(probe.min_layer_norm_variance(), 0.0025, 1e-12);
}
