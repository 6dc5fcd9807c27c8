#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "euvilt/autodiff.hpp"
#include "euvilt/errors.hpp"
#include "euvilt/field.hpp"

using namespace euvilt;

namespace {

ad::Tensor random_tensor(ad::Shape s, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Tensor t(s);
  for (double& v : t.data) v = u(rng);
  return t;
}

// Central differences of f around `x[i]`, restoring the value afterwards.
double numeric(const std::function<double()>& f, double& x, double h = 1e-4) {
  const double x0 = x;
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double dn = f();
  x = x0;
  return (up - dn) / (2 * h);
}

}  // namespace

TEST(Tape, ForwardValues) {
  ad::Tape t;
  EXPECT_DOUBLE_EQ(ad::sigmoid(t.scalar(0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(ad::mul(t.scalar(2.0), t.scalar(3.0)).item(), 6.0);
  const ad::Tensor f = random_tensor({1, 6, 6}, 1);
  const ad::Var out = ad::conv2d(t.constant(f), std::make_shared<Kernel2D>(Kernel2D::delta(3)));
  EXPECT_EQ(out.value().data, f.data);
}

TEST(Tape, SigmoidGradientAtZero) {
  ad::Tape t;
  const ad::Var x = t.scalar(0.0);
  t.backward(ad::sigmoid(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Tape, ClampPassesInteriorBlocksOutside) {
  ad::Tape t;
  const ad::Var x = t.leaf(ad::Tensor({1, 1, 3}, std::vector<double>{0.4, 1.5, -0.2}));
  t.backward(ad::sum(ad::clamp01(x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.0);
}

TEST(Tape, QuadraticGradient) {
  ad::Tape t;
  const ad::Var p = t.scalar(3.0);
  t.backward(ad::square(p));
  EXPECT_NEAR(p.grad()[0], 6.0, 1e-12);
}

TEST(Tape, IndependentParameterGetsZero) {
  ad::Tape t;
  const ad::Var a = t.scalar(1.5);
  const ad::Var b = t.scalar(-2.0);
  t.backward(ad::square(a));
  EXPECT_EQ(b.grad().size() == 0 ? 0.0 : b.grad()[0], 0.0);
}

TEST(Tape, BackwardRepeatsAndBlocksNewOps) {
  ad::Tape t;
  const ad::Var x = t.scalar(1.5);
  const ad::Var y = ad::square(x);
  t.backward(y);
  t.backward(y);  // adjoints are rebuilt, not accumulated
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  EXPECT_THROW(ad::square(y), ContractError);
  t.reset();
  EXPECT_EQ(t.size(), 0u);
}

TEST(Tape, ConvMseMatchesFiniteDifferences) {
  for (unsigned seed = 0; seed < 3; ++seed) {
    ad::Tensor f = random_tensor({1, 8, 8}, 10 + seed, 0.0, 1.0);
    const ad::Tensor target = random_tensor({1, 8, 8}, 20 + seed, 0.0, 1.0);
    auto kernel = std::make_shared<Kernel2D>(gaussian_kernel(1.1));
    auto loss = [&]() {
      ad::Tape t;
      const ad::Var out = ad::conv2d(t.constant(f), kernel);
      return ad::mean(ad::square(ad::sub(out, t.constant(target)))).item();
    };
    ad::Tape t;
    const ad::Var x = t.leaf(f);
    t.backward(ad::mean(ad::square(ad::sub(ad::conv2d(x, kernel), t.constant(target)))));
    const std::vector<double> g(x.grad().begin(), x.grad().end());
    for (std::size_t i = 0; i < f.data.size(); i += 5) {
      EXPECT_LT(ad::relative_error(g[i], numeric(loss, f.data[i])), 1e-4) << "pixel " << i;
    }
  }
}

TEST(Tape, BlurShiftAndGradientOpsMatchFiniteDifferences) {
  ad::Tensor f = random_tensor({1, 9, 9}, 31, 0.0, 1.0);
  double sigma = 1.4, dx = 0.37;
  auto build = [&](ad::Tape& t, ad::Var x, ad::Var s, ad::Var d) {
    const ad::Var b = ad::gaussian_blur(x, s, 0.6);
    const ad::Var sh = ad::fractional_shift(b, d);
    return ad::add(ad::gradient_l1(sh), ad::mean(ad::abs(ad::sub(sh, t.scalar(0.3, false)))));
  };
  auto loss = [&]() {
    ad::Tape t;
    return build(t, t.constant(f), t.scalar(sigma, false), t.scalar(dx, false)).item();
  };
  ad::Tape t;
  const ad::Var x = t.leaf(f);
  const ad::Var s = t.scalar(sigma);
  const ad::Var d = t.scalar(dx);
  t.backward(build(t, x, s, d));
  EXPECT_LT(ad::relative_error(s.grad()[0], numeric(loss, sigma)), 1e-4);
  EXPECT_LT(ad::relative_error(d.grad()[0], numeric(loss, dx)), 1e-4);
  for (std::size_t i = 0; i < f.data.size(); i += 7) {
    EXPECT_LT(ad::relative_error(x.grad()[i], numeric(loss, f.data[i])), 1e-4);
  }
}

TEST(Tape, BlurBelowThresholdPassesThrough) {
  ad::Tape t;
  const ad::Tensor f = random_tensor({1, 8, 8}, 3);
  const ad::Var s = t.scalar(0.55);
  const ad::Var out = ad::gaussian_blur(t.constant(f), s, 0.6);
  EXPECT_EQ(out.value().data, f.data);
  t.backward(ad::sum(out));
  EXPECT_EQ(s.grad()[0], 0.0);
}

TEST(Tape, ConvLayerMatchesFiniteDifferences) {
  ad::Tensor x = random_tensor({2, 6, 5}, 40);
  ad::Tensor w = random_tensor({1, 1, 3 * 2 * 3 * 3}, 41);
  ad::Tensor b = random_tensor({1, 1, 3}, 42);
  auto build = [&](ad::Var xv, ad::Var wv, ad::Var bv) {
    return ad::mean(ad::square(ad::relu(ad::conv_layer(xv, wv, bv, 3, 3, 3))));
  };
  auto loss = [&]() {
    ad::Tape t;
    return build(t.constant(x), t.constant(w), t.constant(b)).item();
  };
  ad::Tape t;
  const ad::Var xv = t.leaf(x), wv = t.leaf(w), bv = t.leaf(b);
  t.backward(build(xv, wv, bv));
  for (std::size_t i = 0; i < w.data.size(); i += 4) {
    EXPECT_LT(ad::relative_error(wv.grad()[i], numeric(loss, w.data[i])), 1e-4);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT(ad::relative_error(bv.grad()[i], numeric(loss, b.data[i])), 1e-4);
  }
  for (std::size_t i = 0; i < x.data.size(); i += 6) {
    EXPECT_LT(ad::relative_error(xv.grad()[i], numeric(loss, x.data[i])), 1e-4);
  }
}

TEST(Tape, ConvLayerRectangularKernelMatchesLoops) {
  // 1 -> 1 channel, 5 x 3 kernel, zero padding.
  const ad::Tensor x = random_tensor({1, 6, 7}, 50);
  const ad::Tensor w = random_tensor({1, 1, 15}, 51);
  ad::Tape t;
  const ad::Var out = ad::conv_layer(t.constant(x), t.constant(w), t.scalar(0.25, false), 1, 5, 3);
  for (int y = 0; y < 6; ++y) {
    for (int c = 0; c < 7; ++c) {
      double s = 0.25;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) {
          const int yy = y + i - 2, xx = c + j - 1;
          if (yy < 0 || yy >= 6 || xx < 0 || xx >= 7) continue;
          s += w.data[i * 3 + j] * x.data[yy * 7 + xx];
        }
      }
      EXPECT_NEAR(out.value().data[y * 7 + c], s, 1e-12);
    }
  }
}

TEST(Tape, BroadcastMulMatchesFiniteDifferences) {
  ad::Tensor a = random_tensor({3, 4, 4}, 60);
  ad::Tensor g = random_tensor({1, 4, 4}, 61);
  auto loss = [&]() {
    ad::Tape t;
    return ad::mean(ad::square(ad::mul(t.constant(a), ad::tanh(t.constant(g))))).item();
  };
  ad::Tape t;
  const ad::Var av = t.leaf(a), gv = t.leaf(g);
  t.backward(ad::mean(ad::square(ad::mul(av, ad::tanh(gv)))));
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    EXPECT_LT(ad::relative_error(gv.grad()[i], numeric(loss, g.data[i])), 1e-4);
  }
}

TEST(GradCheck, QuadraticAndIndependent) {
  double p = 3.0, q = 1.0;
  std::vector<ad::ParamProbe> probes = {{"p", &p, 6.0}, {"q", &q, 0.0}};
  const auto r = ad::check_gradients([&] { return p * p; }, probes);
  EXPECT_NEAR(r[0].numeric, 6.0, 1e-8);
  EXPECT_EQ(r[1].numeric, 0.0);
  EXPECT_EQ(r[1].rel_err, 0.0);
}
