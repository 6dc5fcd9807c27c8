#include "euvilt/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "euvilt/errors.hpp"

namespace euvilt {

namespace {

// Crossings of `level` along one scanline.
template <typename At>
void scan_line(int length, At at, double level, bool vertical, int line,
               std::vector<EdgePoint>& out) {
  for (int i = 0; i + 1 < length; ++i) {
    const double a = at(i), b = at(i + 1);
    int dir = 0;
    if (a < level && b >= level) {
      dir = 1;
    } else if (a >= level && b < level) {
      dir = -1;
    }
    if (dir == 0) continue;
    const double t = (level - a) / (b - a);
    out.push_back({vertical, line, i + t, dir});
  }
}

bool has_rows(ScanAxes axes) { return axes != ScanAxes::kRows; }
bool has_cols(ScanAxes axes) { return axes != ScanAxes::kColumns; }

}  // namespace

double edge_threshold(const Field2D& field, ThresholdMode mode) {
  if (mode == ThresholdMode::kFixedHalf) return 0.5;
  return 0.5 * (field.min() + field.max());
}

std::vector<EdgePoint> detect_edges(const Field2D& field, ScanAxes axes,
                                    double threshold) {
  if (!field.all_finite()) throw MetricError("edge detection on non-finite field");
  std::vector<EdgePoint> out;
  if (field.min() == field.max()) return out;
  if (has_rows(axes)) {
    for (int r = 0; r < field.height(); ++r) {
      scan_line(field.width(), [&](int c) { return field(r, c); }, threshold,
                true, r, out);
    }
  }
  if (has_cols(axes)) {
    for (int c = 0; c < field.width(); ++c) {
      scan_line(field.height(), [&](int r) { return field(r, c); }, threshold,
                false, c, out);
    }
  }
  return out;
}

std::vector<EdgePoint> detect_edges(const Field2D& field, const EpeConfig& config) {
  return detect_edges(field, config.scan_axes,
                      edge_threshold(field, config.threshold_mode));
}

EpeReport epe(const Field2D& pred, const Field2D& target, const EpeConfig& config) {
  if (!pred.same_shape(target)) throw DimensionError("epe: shapes differ");
  if (!(config.max_match_distance_px > 0.0)) {
    throw ConfigError("max_match_distance_px must be positive");
  }
  const auto target_edges = detect_edges(target, config.scan_axes, 0.5);
  if (target_edges.empty()) throw MetricError("target has no edges to place");
  const auto pred_edges = detect_edges(pred, config);

  // Bucket predicted edges by (orientation, scanline).
  const int lines = std::max(pred.width(), pred.height());
  std::vector<std::vector<const EdgePoint*>> buckets(2 * static_cast<std::size_t>(lines));
  for (const auto& e : pred_edges) {
    buckets[(e.vertical_edge ? 0 : lines) + e.scanline].push_back(&e);
  }

  EpeReport rep;
  rep.n_edges = static_cast<int>(target_edges.size());
  rep.residuals_px.reserve(target_edges.size());
  double sum = 0.0;
  for (const auto& t : target_edges) {
    double best = std::numeric_limits<double>::infinity();
    for (const EdgePoint* p : buckets[(t.vertical_edge ? 0 : lines) + t.scanline]) {
      if (p->direction != t.direction) continue;
      best = std::min(best, std::abs(p->position - t.position));
    }
    double r = config.max_match_distance_px;
    if (best <= config.max_match_distance_px) {
      r = best;
      ++rep.n_matched;
    }
    rep.residuals_px.push_back(r);
    sum += r;
  }
  rep.matched_fraction = static_cast<double>(rep.n_matched) / rep.n_edges;
  rep.epe_nm = sum / rep.n_edges * pred.pixel_size_nm();
  return rep;
}

EpeConfig epe_config_for(PatternKind kind) {
  EpeConfig c;
  c.family = std::string(pattern_name(kind));
  switch (kind) {
    // Long vertical lines: only the line edges carry placement information.
    case PatternKind::kEuvLineSpace:
    case PatternKind::kFinfet3nm:
    case PatternKind::kHighNaLines:
    case PatternKind::kHighNaSub8:
    case PatternKind::kEuvMetal:
    case PatternKind::kStrainEngineering:
      c.scan_axes = ScanAxes::kColumns;
      break;
    // Horizontal rails and sheets.
    case PatternKind::kBacksidePower:
    case PatternKind::kCfet:
      c.scan_axes = ScanAxes::kRows;
      break;
    default:
      c.scan_axes = ScanAxes::kBoth;
      break;
  }
  return c;
}

EpeReport epe_for_kind(const Field2D& pred, const Field2D& target,
                       PatternKind kind) {
  return epe(pred, target, epe_config_for(kind));
}

EpeReport epe_for_kind(const Field2D& pred, const Field2D& target,
                       PatternKind kind, ThresholdMode mode) {
  EpeConfig c = epe_config_for(kind);
  c.threshold_mode = mode;
  return epe(pred, target, c);
}

std::string_view threshold_mode_name(ThresholdMode mode) {
  return mode == ThresholdMode::kFixedHalf ? "fixed_half" : "half_max";
}

std::string_view scan_axes_name(ScanAxes axes) {
  switch (axes) {
    case ScanAxes::kRows: return "rows";
    case ScanAxes::kColumns: return "columns";
    case ScanAxes::kBoth: return "both";
  }
  return "?";
}

std::string to_json(const EpeReport& report) {
  nlohmann::json j;
  j["epe_nm"] = report.epe_nm;
  j["n_edges"] = report.n_edges;
  j["n_matched"] = report.n_matched;
  j["matched_fraction"] = report.matched_fraction;
  j["residuals_px"] = report.residuals_px;
  return j.dump();
}

}  // namespace euvilt
