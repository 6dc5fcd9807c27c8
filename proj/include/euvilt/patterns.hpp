#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "euvilt/field.hpp"

namespace euvilt {

enum class PatternKind {
  kLogicGates,
  kEuvLineSpace,
  kEuvContacts,
  kEuvMetal,
  kStiPattern,
  kFinfet3nm,
  kDramArrays,
  kSramCells,
  kContactCuts,
  kHighNaLines,
  kHighNaContacts,
  kCurvilinear,
  kGaafetNanosheets,
  kMbcfet,
  kBacksidePower,
  kCfet,
  kHighNaSub8,
  kStrainEngineering,
};

inline constexpr int kPatternKindCount = 18;

const std::array<PatternKind, kPatternKindCount>& all_pattern_kinds();
/// The twelve standard-suite kinds (Easy, Moderate, Hard).
std::vector<PatternKind> standard_pattern_kinds();
/// The six advanced/extreme kinds.
std::vector<PatternKind> advanced_pattern_kinds();

std::string_view pattern_name(PatternKind kind);
/// Throws ConfigError for unknown names.
PatternKind parse_pattern_kind(std::string_view name);

enum class Difficulty { kEasy, kModerate, kHard, kAdvanced, kExtreme };
std::string_view difficulty_name(Difficulty d);

struct CatalogEntry {
  PatternKind kind;
  Difficulty category;
  double expected_fill;            // fraction
  double expected_min_feature_nm;
  std::string_view success_band;   // e.g. "70-90%"
  bool euv_ready;
  bool standard;
  std::string_view description;
};

/// The 18-row dataset table.
const std::vector<CatalogEntry>& catalog();
const CatalogEntry& catalog_entry(PatternKind kind);

struct GridSpec {
  int width = kDefaultGridSize;
  int height = kDefaultGridSize;
  double pixel_size_nm = kDefaultPixelSizeNm;
};

struct PatternSpec {
  PatternKind kind = PatternKind::kEuvLineSpace;
  double pitch_nm = 32.0;
  double width_nm = 16.0;
  double density = 1.0;    // site occupancy for randomized kinds
  std::uint64_t seed = 0;
  int offset_x_px = 0;     // translation jitter
  int offset_y_px = 0;
  GridSpec grid;

  double aspect_ratio() const { return pitch_nm / width_nm; }
};

/// The unjittered template of a kind.
PatternSpec canonical_spec(PatternKind kind, GridSpec grid = {});

/// Line-space preset with 101.25 nm lines at 516.75 nm pitch. Not part of
/// the catalog; rendered with the euv_line_space geometry.
PatternSpec legacy_line_space_spec(GridSpec grid = {});

/// Binary raster of the spec. Deterministic in (kind, geometry, seed).
/// Throws GeometryError when width >= pitch.
Field2D render(const PatternSpec& spec);

struct PatternStats {
  double fill_ratio = 0.0;
  double min_feature_nm = 0.0;
  /// Set when some feature is narrower than one pixel in nm terms.
  bool subpixel_warning = false;
};

/// Fill ratio and shortest run of ones along rows/columns. Throws
/// ContractError for non-binary input.
PatternStats stats(const Field2D& field);
/// As above, plus the quantization warning from the spec geometry.
PatternStats stats(const PatternSpec& spec, const Field2D& field);

struct Sample {
  PatternSpec spec;
  Field2D field;
};

inline constexpr double kJitterPitchMinNm = 20.0;
inline constexpr double kJitterPitchMaxNm = 100.0;
inline constexpr double kJitterWidthMinNm = 8.0;
inline constexpr double kJitterWidthMaxNm = 50.0;

/// Sample 0 is the canonical template; the rest draw pitch and width from
/// the jitter ranges and a translation of up to one pitch.
std::vector<Sample> sample_dataset(PatternKind kind, int n,
                                   std::uint64_t base_seed, GridSpec grid = {});
/// n drawn uniformly from {48, ..., 52}.
int default_dataset_size(std::uint64_t base_seed);

}  // namespace euvilt
