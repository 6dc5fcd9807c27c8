#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "euvilt/errors.hpp"
#include "euvilt/optimizer.hpp"

using namespace euvilt;

namespace {

// Small, fast training setup on a 32 x 32 grid.
TrainConfig tiny(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.dataset_size = 3;
  c.grid = {32, 32, kDefaultPixelSizeNm};
  return c;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p = {0.3, -1.2};
  AdamState s(2);
  for (int i = 0; i < 5; ++i) adam_step(s, p, std::vector<double>{0.0, 0.0}, 0.01);
  EXPECT_EQ(p[0], 0.3);
  EXPECT_EQ(p[1], -1.2);
}

TEST(Adam, FirstStepByHand) {
  const double g = 0.37, lr = 0.01;
  std::vector<double> p = {1.0};
  AdamState s(1);
  adam_step(s, p, std::vector<double>{g}, lr);
  const double m = 0.1 * g, v = 0.001 * g * g;
  const double m_hat = m / (1 - 0.9), v_hat = v / (1 - 0.999);
  EXPECT_NEAR(p[0], 1.0 - lr * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
  EXPECT_NEAR(p[0], 1.0 - lr, 1e-9);
}

TEST(Adam, ConstantGradientStepTendsToLr) {
  const double lr = 1e-3;
  std::vector<double> p = {0.0};
  AdamState s(1);
  double before = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    before = p[0];
    adam_step(s, p, std::vector<double>{-2.5}, lr);
  }
  EXPECT_NEAR(p[0] - before, lr, 1e-9);
}

TEST(Adam, NonFiniteGradientRejectedBeforeUpdate) {
  std::vector<double> p = {1.0, 2.0};
  AdamState s(2);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()}, 0.1),
               NumericalError);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(s.t, 0);
}

TEST(Adam, SizeMismatch) {
  std::vector<double> p = {1.0};
  AdamState s(2);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{0.1}, 0.1), DimensionError);
}

TEST(Adam, RandomUpdatesKeepActivatedParamsInRange) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 10.0);
  PhysicsParams p;
  AdamState s(5);
  for (int i = 0; i < 2000; ++i) {
    auto raw = p.raw();
    const std::vector<double> grads = {g(rng), g(rng), g(rng), g(rng), g(rng)};
    adam_step(s, raw, grads, 1e-2);
    p = PhysicsParams::from_raw(raw);
    ASSERT_TRUE(activate(p).strictly_in_bounds()) << "step " << i;
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr_physics = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(TrainConfig{}.mask_sharing, MaskSharing::kPerSample);
  EXPECT_EQ(parse_mask_sharing("shared"), MaskSharing::kShared);
  EXPECT_THROW(parse_mask_sharing("some"), ConfigError);
}

TEST(Train, OneEpochOneRecord) {
  const TrainResult r = train(PatternKind::kDramArrays, tiny(1));
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].epoch, 0);
  EXPECT_EQ(r.dataset_size, 3);
  EXPECT_FALSE(r.aborted);
}

TEST(Train, Deterministic) {
  const TrainResult a = train(PatternKind::kEuvContacts, tiny(4));
  const TrainResult b = train(PatternKind::kEuvContacts, tiny(4));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].loss.total, b.history[i].loss.total);
    EXPECT_EQ(a.history[i].epe_nm, b.history[i].epe_nm);
  }
  EXPECT_EQ(a.final.mask, b.final.mask);
}

TEST(Train, IdentityPhysicsReachesZero) {
  TrainConfig c = tiny(20);
  c.stages = StageFlags::none();
  const TrainResult r = train(PatternKind::kEuvContacts, c);
  // Crossings land on the pixel midpoints up to rounding of the trained
  // logits, far below anything measurable at this pixel size.
  EXPECT_LT(r.final_epe_nm(), 1e-3);
  EXPECT_LT(r.history.front().epe_nm, 1e-3);
}

TEST(Train, LossDecreasesWithPhysics) {
  TrainConfig c = tiny(15);
  const TrainResult r = train(PatternKind::kDramArrays, c);
  EXPECT_LT(r.history.back().loss.total, r.history.front().loss.total);
  for (const auto& e : r.history) EXPECT_TRUE(e.effective.strictly_in_bounds());
}

TEST(Train, BestIsNoWorseThanFinal) {
  const TrainResult r = train(PatternKind::kDramArrays, tiny(6));
  EXPECT_LE(r.best_epe_nm(), r.final_epe_nm());
  EXPECT_GE(r.best.epoch, 0);
}

TEST(Ablate, RowsAndErrors) {
  const auto one = ablate(PatternKind::kEuvContacts, tiny(2), {0});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].label, "no_physics");
  EXPECT_EQ(one[0].stages, StageFlags::none());
  EXPECT_THROW(ablate(PatternKind::kEuvContacts, tiny(2), {}), ConfigError);
  EXPECT_THROW(ablate(PatternKind::kEuvContacts, tiny(2), {7}), ConfigError);

  const auto two = ablate(PatternKind::kEuvContacts, tiny(2), {0, 3});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1].label, "+blur");
  EXPECT_EQ(two[1].stages, StageFlags::cumulative(3));
}

TEST(Summary, Improvement) {
  EXPECT_DOUBLE_EQ(improvement_vs_baseline_pct(4.5), 0.0);
  EXPECT_DOUBLE_EQ(improvement_vs_baseline_pct(2.25), 50.0);
  EXPECT_EQ(threshold_mode_for(StageFlags::all()), ThresholdMode::kFixedHalf);
  EXPECT_EQ(threshold_mode_for(StageFlags::cumulative(4)), ThresholdMode::kHalfMax);
}

TEST(GradientCheck, SmallPipeline) {
  const auto reports = pipeline_gradient_check(12, 5, 16);
  ASSERT_EQ(reports.size(), 21u);
  for (const auto& r : reports) EXPECT_LT(r.rel_err, 1e-3) << r.param;
}
