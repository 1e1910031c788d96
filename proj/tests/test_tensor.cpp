#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <unordered_map>

#include "motr/grad_check.hpp"
#include "motr/grad_suite.hpp"
#include "motr/ops.hpp"

using namespace motr;
using T = Tensor<double>;

namespace {

T random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1,
                bool rg = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& e : v) e = d(rng);
  return T::from(std::move(shape), std::move(v), rg);
}

}  // namespace

TEST(Tensor, ShapeMustMatchValues) {
  EXPECT_THROW(T::from({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(T::from({0, 3}, {}), DimensionError);
  auto t = T::from({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(Tensor, MatmulValues) {
  auto a = T::from({2, 2}, {1, 2, 3, 4});
  auto b = T::from({2, 1}, {1, 1});
  auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c[0], 3);
  EXPECT_DOUBLE_EQ(c[1], 7);
  auto eye = T::from({2, 2}, {1, 0, 0, 1});
  auto x = T::from({2, 2}, {0.3, -1.5, 2.25, 7});
  EXPECT_EQ(matmul(eye, x).values(), x.values());
  EXPECT_THROW(matmul(a, T::from({3, 1}, {1, 1, 1})), DimensionError);
}

TEST(Tensor, SoftmaxValues) {
  auto s = softmax(T::from({1, 2}, {0, 0}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  s = softmax(T::from({1, 2}, {std::log(2.0), 0}));
  EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0 / 3.0, 1e-15);
  std::mt19937_64 rng(3);
  auto x = random_tensor({4, 5}, rng, -5, 5, false);
  auto shifted = add_scalar(x, 3.7);
  auto a = softmax(x), b = softmax(shifted);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_NEAR(a.at(r, c), b.at(r, c), 1e-12);
      EXPECT_GE(a.at(r, c), 0.0);
      EXPECT_LE(a.at(r, c), 1.0);
      total += a.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Tensor, SoftmaxOverLeadingAxis) {
  auto s = softmax(T::from({2, 1}, {std::log(2.0), 0}), 0);
  EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-15);
}

TEST(Tensor, LayerNormValues) {
  auto gain = T::full({2}, 1.0), bias = T::zeros({2});
  auto y = layer_norm(T::from({1, 2}, {1, 3}), gain, bias, 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
  auto z = layer_norm(T::from({1, 3}, {4, 4, 4}), T::full({3}, 1.0), T::zeros({3}));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, ElementwiseValues) {
  EXPECT_DOUBLE_EQ(sigmoid(T::scalar(0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(relu(T::scalar(-2)).item(), 0.0);
  EXPECT_DOUBLE_EQ(relu(T::scalar(2)).item(), 2.0);
  EXPECT_NEAR(gelu(T::scalar(0)).item(), 0.0, 1e-15);
  EXPECT_NEAR(log(T::scalar(std::exp(1.5))).item(), 1.5, 1e-12);
  EXPECT_TRUE(std::isfinite(log(T::scalar(0)).item()));
  auto c = concat<double>({T::zeros({2, 3}), T::zeros({2, 5})}, 1);
  EXPECT_EQ(c.shape(), (Shape{2, 8}));
  auto s = slice(T::from({2, 3}, {0, 1, 2, 3, 4, 5}), 1, 1, 3);
  EXPECT_EQ(s.values(), (std::vector<double>{1, 2, 4, 5}));
  auto e = sum_last(T::from({2, 3}, {0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(e.values(), (std::vector<double>{3, 12}));
}

TEST(Tensor, LeadingAxisExpansionOnly) {
  auto m = T::from({2, 3}, {0, 1, 2, 3, 4, 5});
  auto r = add(m, T::from({3}, {10, 20, 30}));
  EXPECT_EQ(r.values(), (std::vector<double>{10, 21, 32, 13, 24, 35}));
  EXPECT_THROW(add(m, T::from({2}, {1, 2})), DimensionError);
  EXPECT_THROW(add(m, T::from({2, 1}, {1, 2})), DimensionError);
}

TEST(Autograd, SumGivesOnes) {
  auto x = T::from({3}, {1, 2, 3}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autograd, SquareSum) {
  auto x = T::from({2}, {1, 2}, true);
  backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4);
}

TEST(Autograd, SigmoidSlopeAtZero) {
  auto x = T::scalar(0, true);
  backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
  auto r = grad_check<double>([](const T& v) { return sigmoid(v); }, T::scalar(0, true));
  EXPECT_NEAR(r.worst_numeric, 0.25, 1e-9);
}

TEST(Autograd, ReuseAccumulates) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({3}, rng);
  auto y = T::from({3}, x.values(), true);
  auto z = T::from({3}, x.values(), true);
  backward(add(sum(mul(y, y)), sum(sigmoid(y))));
  backward(sum(mul(z, z)));
  auto first = std::vector<double>(z.grad().begin(), z.grad().end());
  z.zero_grad();
  backward(sum(sigmoid(z)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y.grad()[i], first[i] + z.grad()[i], 1e-15);
}

TEST(Autograd, SharedIntermediateCountedOnce) {
  auto x = T::from({2}, {0.5, -1.0}, true);
  auto h = sigmoid(x);
  auto loss = add(sum(h), sum(mul(h, h)));
  backward(loss);
  for (std::size_t i = 0; i < 2; ++i) {
    const double s = 1 / (1 + std::exp(-x[i]));
    EXPECT_NEAR(x.grad()[i], (1 + 2 * s) * s * (1 - s), 1e-15);
  }
}

TEST(Autograd, TopologicalOrder) {
  auto x = T::from({2}, {1, 2}, true);
  auto a = sigmoid(x);
  auto b = mul(a, x);
  auto loss = sum(add(b, a));
  Tape<double> tape(loss);
  std::unordered_map<const detail::Node<double>*, std::size_t> pos;
  for (std::size_t i = 0; i < tape.order().size(); ++i) pos[tape.order()[i]] = i;
  for (auto* n : tape.order())
    for (const auto& p : n->parents) {
      if (p->requires_grad) {
        EXPECT_LT(pos.at(p.get()), pos.at(n));
      }
    }
  EXPECT_EQ(tape.order().back(), &loss.node());
}

TEST(Autograd, Errors) {
  auto x = T::from({2}, {1, 2}, true);
  EXPECT_THROW(backward(x), AutogradError);
  EXPECT_THROW(backward(sum(T::from({2}, {1, 2}))), AutogradError);
  auto loss = sum(mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), AutogradError);
  EXPECT_THROW(sigmoid(x).mutable_data(), AutogradError);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  auto x = T::from({2}, {1, 2}, true);
  {
    NoGradGuard g;
    auto y = sum(mul(x, x));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(sum(x).requires_grad());
}

TEST(Autograd, LeafGradientsFullyPopulated) {
  auto x = T::from({3}, {1, 2, 3}, true);
  auto unused_path = T::from({3}, {1, 1, 1}, true);
  backward(sum(mul(slice(x, 0, 0, 1), slice(unused_path, 0, 0, 1))));
  EXPECT_EQ(x.grad().size(), 3u);
  EXPECT_EQ(unused_path.grad().size(), 3u);
  EXPECT_EQ(x.grad()[1], 0.0);
}

TEST(Autograd, Deterministic) {
  std::mt19937_64 r1(9), r2(9);
  auto a = random_tensor({4, 6}, r1), b = random_tensor({4, 6}, r2);
  auto fa = sum(softmax(matmul(a, transpose(a))));
  auto fb = sum(softmax(matmul(b, transpose(b))));
  EXPECT_EQ(fa.item(), fb.item());
  backward(fa);
  backward(fb);
  EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()),
            std::vector<double>(b.grad().begin(), b.grad().end()));
}

TEST(GradCheck, LinearIsExact) {
  auto x = T::from({3}, {0.1, 0.2, 0.3}, true);
  auto r = grad_check<double>([](const T& v) { return sum(scale(v, 3.0)); }, x);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradCheck, MatmulTight) {
  std::mt19937_64 rng(5);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  auto r = grad_check<double>([&] { return sum(matmul(a, b)); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, CorruptedRuleIsReported) {
  // Forward of sigmoid with the derivative of the identity.
  auto bad = [](const T& x) {
    return detail::unary(
        x, "bad_sigmoid", [](double v) { return 1 / (1 + std::exp(-v)); },
        [](double, double) { return 1.0; });
  };
  auto x = T::from({3}, {0.1, -0.4, 0.7}, true);
  auto r = grad_check<double>([&](const T& v) { return sum(bad(v)); }, x);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 0.5);
}

TEST(GradCheck, RejectsBadEps) {
  auto x = T::from({1}, {0.1}, true);
  EXPECT_THROW(grad_check<double>([](const T& v) { return sum(v); }, x, 1e-2),
               std::invalid_argument);
}

TEST(GradCheck, ChainedMatmulSoftmaxLog) {
  std::mt19937_64 rng(7);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
  auto r = grad_check<double>([&] { return sum(log(softmax(matmul(a, b)))); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, EveryOpMatchesFiniteDifferences) {
  for (auto& c : op_gradient_cases(static_cast<std::uint64_t>(GetParam()))) {
    auto r = c.run();
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " seed " << GetParam() << " analytic "
                                     << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

class CompositeGradients : public ::testing::TestWithParam<int> {};

TEST_P(CompositeGradients, PathsMatchFiniteDifferences) {
  for (auto& c : composite_gradient_cases(static_cast<std::uint64_t>(GetParam()))) {
    auto r = c.run();
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " seed " << GetParam() << " analytic "
                                     << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradients, ::testing::Range(0, 100));
INSTANTIATE_TEST_SUITE_P(RandomDraws, CompositeGradients, ::testing::Range(0, 10));
