#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "euvilt/errors.hpp"
#include "euvilt/objective.hpp"
#include "euvilt/patterns.hpp"

using namespace euvilt;

namespace {

Field2D random_field(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field2D f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

Field2D step_field() {
  Field2D t(12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 6; x < 12; ++x) t(y, x) = 1.0;
  }
  return t;
}

}  // namespace

TEST(Recon, Cases) {
  const Field2D t = random_field(9, 9, 1);
  EXPECT_EQ(recon_loss(t, t), 0.0);
  Field2D shifted = t;
  for (std::size_t i = 0; i < t.size(); ++i) shifted[i] += 0.1;
  EXPECT_NEAR(recon_loss(shifted, t), 0.01, 1e-15);

  const Field2D a = random_field(7, 5, 2), b = random_field(7, 5, 3);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(recon_loss(a, b), s / 35.0, 1e-12);
  EXPECT_THROW(recon_loss(a, Field2D(5, 7)), DimensionError);
}

TEST(Edge, Cases) {
  const Field2D t = step_field();
  EXPECT_EQ(edge_loss(t, t), 0.0);
  const Field2D flat(12, 12, kDefaultPixelSizeNm, 0.3);
  EXPECT_DOUBLE_EQ(edge_loss(flat, t), gradient_l1(t));

  const Field2D sharp = render(canonical_spec(PatternKind::kDramArrays));
  const Field2D soft = conv2d(sharp, gaussian_kernel(2.0));
  EXPECT_GT(edge_loss(soft, sharp), 0.0);
  EXPECT_DOUBLE_EQ(edge_loss(soft, sharp), std::abs(gradient_l1(soft) - gradient_l1(sharp)));
}

TEST(Edge, GradDiffSeesMisplacedEdges) {
  // Same gradient mass, different place: mag_diff is blind, grad_diff is not.
  const Field2D t = step_field();
  Field2D moved(12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 4; x < 12; ++x) moved(y, x) = 1.0;
  }
  EXPECT_EQ(edge_loss(moved, t, EdgeLossMode::kMagDiff), 0.0);
  EXPECT_GT(edge_loss(moved, t, EdgeLossMode::kGradDiff), 0.0);
}

TEST(Reg, Cases) {
  EXPECT_EQ(physics_reg({}), 0.0);
  EXPECT_NEAR(physics_reg({1.0, -1.0, 2.0, 0.0, 0.5}), 0.045, 1e-15);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 10; ++k) {
    const PhysicsParams p{u(rng), u(rng), u(rng), u(rng), u(rng)};
    double s = 0.0;
    for (double v : p.raw()) s += std::abs(v);
    EXPECT_NEAR(physics_reg(p), 0.01 * s, 1e-15);
  }
}

TEST(Total, ArithmeticExample) {
  EXPECT_NEAR(combine_losses({}, 0.04, 0.2, 0.045), 0.08025, 1e-15);
}

TEST(Total, PerfectFitIsZero) {
  const Field2D t = step_field();
  const LossBreakdown l = total_loss(t, t, {});
  EXPECT_EQ(l.total, 0.0);
  EXPECT_EQ(l.recon, 0.0);
  EXPECT_EQ(l.edge, 0.0);
  EXPECT_EQ(l.physics_reg, 0.0);
}

TEST(Total, TapedMatchesPlain) {
  const Field2D img = random_field(12, 12, 5), t10 = step_field().transposed();
  const PhysicsParams p{0.3, -0.7, 1.2, 0.0, -0.4};
  for (auto mode : {EdgeLossMode::kMagDiff, EdgeLossMode::kGradDiff}) {
    ad::Tape tape;
    const LossVars lv = total_loss(tape.constant(ad::Tensor::from_field(img)),
                                   tape.constant(ad::Tensor::from_field(t10)),
                                   PhysicsVars::record(tape, p), {}, mode);
    const LossBreakdown want = total_loss(img, t10, p, {}, mode);
    EXPECT_DOUBLE_EQ(lv.total.item(), want.total);
    EXPECT_DOUBLE_EQ(lv.recon.item(), want.recon);
    EXPECT_DOUBLE_EQ(lv.edge.item(), want.edge);
    EXPECT_DOUBLE_EQ(lv.physics_reg.item(), want.physics_reg);
  }
}

TEST(Total, ThetaGradientsMatchFiniteDifferences) {
  const Field2D mask = render(canonical_spec(PatternKind::kEuvContacts, {24, 24, kDefaultPixelSizeNm}));
  const Field2D target = mask;
  PhysicsParams p{0.4, -0.3, 0.9, 0.25, 0.2};
  const ForwardModel model;
  auto loss = [&]() {
    return total_loss(model.forward(mask, p, StageFlags::all()), target, p).total;
  };
  ad::Tape tape;
  const PhysicsVars pv = PhysicsVars::record(tape, p);
  const ad::Var img = model.forward(tape, tape.constant(ad::Tensor::from_field(mask)), pv,
                                    StageFlags::all());
  const LossVars lv = total_loss(img, tape.constant(ad::Tensor::from_field(target)), pv);
  tape.backward(lv.total);
  auto refs = p.refs();
  for (std::size_t i = 0; i < 5; ++i) {
    const double x0 = *refs[i];
    *refs[i] = x0 + 1e-4;
    const double up = loss();
    *refs[i] = x0 - 1e-4;
    const double dn = loss();
    *refs[i] = x0;
    const double num = (up - dn) / 2e-4;
    EXPECT_LT(ad::relative_error(pv.theta[i].grad()[0], num), 1e-4) << PhysicsParams::kNames[i];
  }
}

TEST(EdgeMode, ParseAndName) {
  EXPECT_EQ(parse_edge_loss_mode("grad_diff"), EdgeLossMode::kGradDiff);
  EXPECT_STREQ(edge_loss_mode_name(EdgeLossMode::kMagDiff), "mag_diff");
  EXPECT_THROW(parse_edge_loss_mode("nope"), ConfigError);
}
