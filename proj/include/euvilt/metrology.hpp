#pragma once

#include <string>
#include <vector>

#include "euvilt/field.hpp"
#include "euvilt/patterns.hpp"

namespace euvilt {

enum class ThresholdMode {
  kFixedHalf,  // 0.5
  kHalfMax,    // midpoint of the image range, for unclamped intensities
};

/// Which edge coordinate is measured. kColumns scans every row and reports
/// column crossings (vertical edges); kRows scans every column and reports
/// row crossings (horizontal edges).
enum class ScanAxes { kRows, kColumns, kBoth };

struct EpeConfig {
  std::string family = "generic";
  ThresholdMode threshold_mode = ThresholdMode::kFixedHalf;
  ScanAxes scan_axes = ScanAxes::kBoth;
  double max_match_distance_px = 4.0;
};

struct EdgePoint {
  bool vertical_edge;  // true: position is a column coordinate
  int scanline;        // row for vertical edges, column for horizontal ones
  double position;     // sub-pixel coordinate along the scanline
  int direction;       // +1 rising, -1 falling

  friend bool operator==(const EdgePoint&, const EdgePoint&) = default;
};

struct EpeReport {
  double epe_nm = 0.0;
  int n_edges = 0;    // target edges
  int n_matched = 0;
  double matched_fraction = 0.0;
  /// One entry per target edge: |offset| when matched, else the penalty.
  std::vector<double> residuals_px;
};

/// Level used for edge detection in `field` under `mode`.
double edge_threshold(const Field2D& field, ThresholdMode mode);

/// Threshold crossings located by linear interpolation between the
/// bracketing pixels. Rows first, then columns, scanlines ascending.
/// A constant field yields no edges.
std::vector<EdgePoint> detect_edges(const Field2D& field, const EpeConfig& config);
std::vector<EdgePoint> detect_edges(const Field2D& field, ScanAxes axes,
                                    double threshold);

/// Mean absolute placement error of pred edges against target edges, in nm.
/// The target is always thresholded at 0.5. Throws MetricError when the
/// target has no edges and DimensionError on shape mismatch.
EpeReport epe(const Field2D& pred, const Field2D& target, const EpeConfig& config);

/// Registered configuration for a pattern kind.
EpeConfig epe_config_for(PatternKind kind);
EpeReport epe_for_kind(const Field2D& pred, const Field2D& target,
                       PatternKind kind);
/// As above, overriding the threshold mode.
EpeReport epe_for_kind(const Field2D& pred, const Field2D& target,
                       PatternKind kind, ThresholdMode mode);

std::string_view threshold_mode_name(ThresholdMode mode);
std::string_view scan_axes_name(ScanAxes axes);

/// {"epe_nm":..., "n_edges":..., ...}
std::string to_json(const EpeReport& report);

}  // namespace euvilt
