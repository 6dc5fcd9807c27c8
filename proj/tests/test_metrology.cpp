#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "euvilt/errors.hpp"
#include "euvilt/field.hpp"
#include "euvilt/metrology.hpp"
#include "euvilt/patterns.hpp"

using namespace euvilt;

namespace {

constexpr double kPx = kDefaultPixelSizeNm;

// Vertical band of ones over columns [x0, x1), rows [y0, y1).
Field2D band(int w, int h, int x0, int x1, int y0 = 0, int y1 = -1) {
  if (y1 < 0) y1 = h;
  Field2D f(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) f(y, x) = 1.0;
  }
  return f;
}

EpeConfig rows_only() {
  EpeConfig c;
  c.scan_axes = ScanAxes::kColumns;
  return c;
}

// Pred whose every 0.5 crossing sits exactly `delta` px right of (or
// below) the matching target edge. Works for layouts whose background
// gaps are one pixel wide: each gap pixel is then bracketed by one falling
// and one rising edge on the same scanline, and interpolation between
// neighbours is linear by construction, so the values can be solved one
// pixel at a time in raster order.
Field2D displaced_fixture(const Field2D& t, double delta) {
  const double f = 0.5 + delta;  // crossing fraction from the left pixel
  // Falling A -> B at fraction f:  B = A - (A - 0.5) / f.
  // Rising  B -> E at fraction f:  E = B + (0.5 - B) / f.
  auto after_fall = [f](double a) { return a - (a - 0.5) / f; };
  auto after_rise = [f](double b) { return b + (0.5 - b) / f; };
  Field2D p = t;
  const int w = t.width(), h = t.height();
  auto fg = [&](int y, int x) { return t(y, x) > 0.5; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) {
        const bool left = x > 0 && fg(y, x - 1);
        const bool up = y > 0 && fg(y - 1, x);
        EXPECT_FALSE(left && up) << "gap pixel bracketed on two axes at " << y << "," << x;
        if (left) p(y, x) = after_fall(p(y, x - 1));
        if (up) p(y, x) = after_fall(p(y - 1, x));
        continue;
      }
      const bool row_entry = x > 1 && !fg(y, x - 1) && fg(y, x - 2);
      const bool col_entry = y > 1 && !fg(y - 1, x) && fg(y - 2, x);
      if (row_entry) p(y, x) = after_rise(p(y, x - 1));
      if (col_entry) {
        const double v = after_rise(p(y - 1, x));
        if (row_entry) {
          EXPECT_NEAR(p(y, x), v, 1e-12);
        }
        p(y, x) = v;
      }
    }
  }
  return p;
}

}  // namespace

TEST(DetectEdges, UnitStepAtMidpoint) {
  const Field2D f = band(20, 3, 10, 20);
  const auto edges = detect_edges(f, ScanAxes::kColumns, 0.5);
  ASSERT_EQ(edges.size(), 3u);
  for (const auto& e : edges) {
    EXPECT_TRUE(e.vertical_edge);
    EXPECT_DOUBLE_EQ(e.position, 9.5);
    EXPECT_EQ(e.direction, +1);
  }
}

TEST(DetectEdges, RampCrossing) {
  // Linear ramp through 0.5 at x = 12.25, slope 0.1 per pixel.
  Field2D f(30, 1);
  for (int x = 0; x < 30; ++x) f(0, x) = 0.5 + 0.1 * (x - 12.25);
  const auto edges = detect_edges(f, ScanAxes::kColumns, 0.5);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_NEAR(edges[0].position, 12.25, 1e-9);
}

TEST(DetectEdges, FallingUsesClosedUpperBound) {
  // a >= t > b is falling; a value landing exactly on t starts no new edge.
  Field2D f(4, 1);
  f(0, 0) = 1.0;
  f(0, 1) = 0.5;
  f(0, 2) = 0.0;
  const auto edges = detect_edges(f, ScanAxes::kColumns, 0.5);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_DOUBLE_EQ(edges[0].position, 1.0);
  EXPECT_EQ(edges[0].direction, -1);
}

TEST(DetectEdges, ConstantAndNonFinite) {
  EXPECT_TRUE(detect_edges(Field2D(8, 8, kPx, 0.7), ScanAxes::kBoth, 0.5).empty());
  Field2D bad(4, 4);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(detect_edges(bad, ScanAxes::kBoth, 0.5), MetricError);
}

TEST(DetectEdges, RowScanFindsHorizontalEdges) {
  const Field2D f = band(6, 20, 0, 6, 7, 20);
  const auto edges = detect_edges(f, ScanAxes::kRows, 0.5);
  ASSERT_EQ(edges.size(), 6u);
  for (const auto& e : edges) {
    EXPECT_FALSE(e.vertical_edge);
    EXPECT_DOUBLE_EQ(e.position, 6.5);
  }
}

TEST(Threshold, Modes) {
  Field2D f(4, 1);
  f(0, 0) = 0.2;
  f(0, 1) = 0.5;
  f(0, 2) = 0.9;
  f(0, 3) = 1.4;
  EXPECT_EQ(edge_threshold(f, ThresholdMode::kFixedHalf), 0.5);
  EXPECT_DOUBLE_EQ(edge_threshold(f, ThresholdMode::kHalfMax), 0.8);
}

TEST(Epe, IdenticalIsZero) {
  const Field2D t = band(40, 10, 10, 25);
  const EpeReport r = epe(t, t, rows_only());
  EXPECT_EQ(r.epe_nm, 0.0);
  EXPECT_EQ(r.matched_fraction, 1.0);
  EXPECT_EQ(r.n_edges, 20);
}

TEST(Epe, OnePixelShift) {
  const EpeReport r = epe(band(40, 10, 11, 26), band(40, 10, 10, 25), rows_only());
  EXPECT_NEAR(r.epe_nm, kPx, 1e-9);
}

TEST(Epe, HalfPixelRamp) {
  // Target edges at 19.5 and 40.5; pred crossings at 20.0 and 41.0.
  const Field2D t = band(64, 8, 20, 41);
  Field2D p(64, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double d = std::min(x - 20.0, 41.0 - x);
      p(y, x) = std::clamp(0.5 + 0.25 * d, 0.0, 1.0);
    }
  }
  EXPECT_NEAR(epe(p, t, rows_only()).epe_nm, 0.5 * kPx, 1e-9);
}

TEST(Epe, UnmatchedEdgesTakePenalty) {
  const Field2D t = band(40, 4, 10, 25);
  const EpeReport r = epe(Field2D(40, 4), t, rows_only());
  EXPECT_EQ(r.n_matched, 0);
  EXPECT_NEAR(r.epe_nm, 4.0 * kPx, 1e-12);
  // Too far away to match either.
  const EpeReport far = epe(band(40, 4, 16, 31), t, rows_only());
  EXPECT_NEAR(far.epe_nm, 4.0 * kPx, 1e-12);
}

TEST(Epe, DirectionMustAgree) {
  // A falling pred edge next to a rising target edge does not match it.
  Field2D t(20, 1), p(20, 1);
  for (int x = 10; x < 20; ++x) t(0, x) = 1.0;
  for (int x = 0; x < 11; ++x) p(0, x) = 1.0;
  const EpeReport r = epe(p, t, rows_only());
  EXPECT_EQ(r.n_matched, 0);
}

TEST(Epe, Errors) {
  EXPECT_THROW(epe(Field2D(8, 8), Field2D(8, 9), {}), DimensionError);
  EXPECT_THROW(epe(Field2D(8, 8), Field2D(8, 8), {}), MetricError);
}

TEST(Epe, DramFixtureWithKnownDisplacement) {
  const Field2D t = render(canonical_spec(PatternKind::kDramArrays));
  const Field2D p = displaced_fixture(t, 0.3);
  const EpeReport r = epe_for_kind(p, t, PatternKind::kDramArrays);
  EXPECT_EQ(r.n_matched, r.n_edges);
  for (double res : r.residuals_px) EXPECT_NEAR(res, 0.3, 1e-9);
  EXPECT_NEAR(r.epe_nm, 1.898, 0.05);
}

TEST(EpeForKind, Dispatch) {
  const Field2D lines = render(canonical_spec(PatternKind::kEuvLineSpace));
  const Field2D moved = fractional_shift(lines, 0.4);
  EXPECT_EQ(epe_config_for(PatternKind::kEuvLineSpace).scan_axes, ScanAxes::kColumns);
  EXPECT_EQ(epe_for_kind(moved, lines, PatternKind::kEuvLineSpace).epe_nm,
            epe(moved, lines, epe_config_for(PatternKind::kEuvLineSpace)).epe_nm);

  const Field2D dots = render(canonical_spec(PatternKind::kEuvContacts));
  const Field2D blurred = conv2d(dots, gaussian_kernel(1.2));
  EXPECT_EQ(epe_config_for(PatternKind::kEuvContacts).scan_axes, ScanAxes::kBoth);
  EXPECT_EQ(epe_for_kind(blurred, dots, PatternKind::kEuvContacts).epe_nm,
            epe(blurred, dots, epe_config_for(PatternKind::kEuvContacts)).epe_nm);
}

TEST(EpeForKind, SelfIsZeroForEveryTemplate) {
  for (PatternKind k : all_pattern_kinds()) {
    const Field2D t = render(canonical_spec(k));
    EXPECT_EQ(epe_for_kind(t, t, k).epe_nm, 0.0) << pattern_name(k);
  }
}

TEST(Report, Json) {
  const Field2D t = band(20, 2, 5, 15);
  const std::string j = to_json(epe(t, t, rows_only()));
  EXPECT_NE(j.find("\"epe_nm\""), std::string::npos);
  EXPECT_NE(j.find("\"n_edges\":4"), std::string::npos);
}
