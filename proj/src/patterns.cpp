#include "euvilt/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "euvilt/errors.hpp"

namespace euvilt {

namespace {

constexpr std::array<PatternKind, kPatternKindCount> kAllKinds = {
    PatternKind::kLogicGates,       PatternKind::kEuvLineSpace,
    PatternKind::kEuvContacts,      PatternKind::kEuvMetal,
    PatternKind::kStiPattern,       PatternKind::kFinfet3nm,
    PatternKind::kDramArrays,       PatternKind::kSramCells,
    PatternKind::kContactCuts,      PatternKind::kHighNaLines,
    PatternKind::kHighNaContacts,   PatternKind::kCurvilinear,
    PatternKind::kGaafetNanosheets, PatternKind::kMbcfet,
    PatternKind::kBacksidePower,    PatternKind::kCfet,
    PatternKind::kHighNaSub8,       PatternKind::kStrainEngineering,
};

constexpr std::array<std::string_view, kPatternKindCount> kNames = {
    "logic_gates",       "euv_line_space", "euv_contacts",
    "euv_metal",         "sti_pattern",    "finfet_3nm",
    "dram_arrays",       "sram_cells",     "contact_cuts",
    "high_na_lines",     "high_na_contacts", "curvilinear",
    "gaafet_nanosheets", "mbcfet",         "backside_power",
    "cfet",              "high_na_sub8",   "strain_engineering",
};

constexpr double kCfetIsolationNm = 5.0;

int index_of(PatternKind kind) {
  const int i = static_cast<int>(kind);
  if (i < 0 || i >= kPatternKindCount) throw ConfigError("unknown pattern kind");
  return i;
}

// Binary canvas. Features are drawn only when they fit entirely inside the
// field, so clipped slivers never appear at the borders.
class Canvas {
 public:
  explicit Canvas(const PatternSpec& spec)
      : field_(spec.grid.width, spec.grid.height, spec.grid.pixel_size_nm),
        ps_(spec.grid.pixel_size_nm),
        ox_(spec.offset_x_px),
        oy_(spec.offset_y_px) {}

  int width() const { return field_.width(); }
  int height() const { return field_.height(); }
  double px(double nm) const { return nm / ps_; }
  // Edge position in pixels, rounded to the nearest pixel boundary.
  int edge(double nm) const { return static_cast<int>(std::lround(nm / ps_)); }
  // Feature size in pixels, never below one.
  int extent(double nm) const { return std::max(1, edge(nm)); }

  double height_nm() const { return height() * ps_; }
  double width_nm() const { return width() * ps_; }

  bool fits_px(int x0, int y0, int w, int h) const {
    x0 += ox_;
    y0 += oy_;
    return w > 0 && h > 0 && x0 >= 0 && y0 >= 0 && x0 + w <= width() &&
           y0 + h <= height();
  }

  // Rectangle in pixel units relative to the translated origin.
  bool rect_px(int x0, int y0, int w, int h) {
    if (!fits_px(x0, y0, w, h)) return false;
    x0 += ox_;
    y0 += oy_;
    for (int r = y0; r < y0 + h; ++r) {
      for (int c = x0; c < x0 + w; ++c) field_(r, c) = 1.0;
    }
    return true;
  }

  // Rectangle whose corner sits at (x_nm, y_nm) in continuous coordinates.
  bool rect_nm(double x_nm, double y_nm, double w_nm, double h_nm) {
    return rect_px(edge(x_nm), edge(y_nm), extent(w_nm), extent(h_nm));
  }

  void set(int row, int col) {
    row += oy_;
    col += ox_;
    if (row >= 0 && row < height() && col >= 0 && col < width()) {
      field_(row, col) = 1.0;
    }
  }

  Field2D take() { return std::move(field_); }

 private:
  Field2D field_;
  double ps_;
  int ox_;
  int oy_;
};

// Number of periods needed to cover `span_px` from a zero origin.
int periods(double span_px, double pitch_px) {
  return static_cast<int>(std::ceil(span_px / pitch_px)) + 1;
}

void render_lines(Canvas& cv, double pitch, double width, double y0_nm,
                  double len_nm) {
  const int n = periods(cv.width(), cv.px(pitch));
  for (int k = 0; k < n; ++k) cv.rect_nm(k * pitch, y0_nm, width, len_nm);
}

void render_logic_gates(Canvas& cv, const PatternSpec& s) {
  // H cells: two legs `pitch` apart joined by a centred crossbar.
  const double p = s.pitch_nm, w = s.width_nm;
  const double leg = 3.0 * p;
  const double cell = 5.25 * p;
  const int nx = periods(cv.width(), cv.px(cell));
  const int ny = periods(cv.height(), cv.px(cell));
  const double margin = 0.5 * (cell - p - w);
  const double ymargin = 0.5 * (cell - leg);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = margin + i * cell, y = ymargin + j * cell;
      const int x0 = cv.edge(x), y0 = cv.edge(y);
      const int ww = cv.extent(w), lh = cv.extent(leg);
      const int x1 = cv.edge(x + p);
      // Draw only complete H shapes.
      if (!cv.fits_px(x0, y0, ww, lh) || !cv.fits_px(x1, y0, ww, lh)) continue;
      cv.rect_px(x0, y0, ww, lh);
      cv.rect_px(x1, y0, ww, lh);
      cv.rect_px(x0, cv.edge(y + 0.5 * (leg - w)), x1 + ww - x0, ww);
    }
  }
}

void render_contacts(Canvas& cv, double pitch_x, double pitch_y, double w,
                     double h) {
  const int nx = periods(cv.width(), cv.px(pitch_x));
  const int ny = periods(cv.height(), cv.px(pitch_y));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) cv.rect_nm(i * pitch_x, j * pitch_y, w, h);
  }
}

void render_euv_metal(Canvas& cv, const PatternSpec& s) {
  const double p = s.pitch_nm, w = s.width_nm;
  render_lines(cv, p, w, 0.0, cv.height_nm());
  // Connectors bridging neighbouring lines, staggered between gaps.
  const double conn_h = 0.8 * w;
  const double period = 2.0 * p;
  const int nx = periods(cv.width(), cv.px(p));
  const int ny = periods(cv.height(), cv.px(period));
  for (int k = 0; k + 1 < nx; ++k) {
    const int x0 = cv.edge(k * p);
    const int x1 = cv.edge((k + 1) * p) + cv.extent(w);
    if (x1 > cv.width()) break;
    for (int j = 0; j < ny; ++j) {
      const double y = (k % 2 == 0 ? 0.25 : 0.75) * period + j * period;
      cv.rect_px(x0, cv.edge(y), x1 - x0, cv.extent(conn_h));
    }
  }
}

void render_sti(Canvas& cv, const PatternSpec& s) {
  // Active islands separated by isolation trenches; the y trenches are wider.
  const double p = s.pitch_nm, w = s.width_nm;
  const double len = 1.42 * w;
  const double pitch_y = len + 2.38 * (p - w);
  render_contacts(cv, p, pitch_y, w, len);
}

void render_sram(Canvas& cv, const PatternSpec& s) {
  // Six-transistor style cell of side `pitch`: two active strips, two gate
  // stubs, a shared contact pad. `width` is the gate width.
  const double p = s.pitch_nm, w = s.width_nm;
  const int nx = periods(cv.width(), cv.px(p));
  const int ny = periods(cv.height(), cv.px(p));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * p, y = j * p;
      cv.rect_nm(x + 0.10 * p, y, 1.5 * w, p);           // active A
      cv.rect_nm(x + 0.60 * p, y, 1.5 * w, p);           // active B
      cv.rect_nm(x, y + 0.20 * p, 0.55 * p, w);          // gate A
      cv.rect_nm(x + 0.45 * p, y + 0.65 * p, 0.55 * p, w);  // gate B
      cv.rect_nm(x + 0.30 * p, y + 0.40 * p, 2.0 * w, 2.0 * w);  // pad
    }
  }
}

void render_contact_cuts(Canvas& cv, const PatternSpec& s) {
  std::mt19937_64 rng(s.seed);
  const double p = s.pitch_nm, w = s.width_nm;
  const int nx = periods(cv.width(), cv.px(p));
  const int ny = periods(cv.height(), cv.px(p));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      // One draw per site in raster order, kept or not.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u < s.density) cv.rect_nm(i * p, j * p, w, w);
    }
  }
}

void render_curvilinear(Canvas& cv, const PatternSpec& s) {
  // Sinusoidal arcs y = y0 + A sin(2 pi x / L + phi) stroked with a
  // normal-direction half thickness.
  const double p = cv.px(s.pitch_nm);
  const double half = 0.5 * cv.px(s.width_nm);
  const double amp = 0.9 * p;
  const double period = 6.0 * p;
  const int n = periods(cv.height(), p);
  for (int k = 0; k < n; ++k) {
    const double y0 = (k + 0.5) * p;
    const double phi = 0.7 * k;
    for (int c = 0; c < cv.width(); ++c) {
      const double t = 2.0 * std::numbers::pi * c / period + phi;
      const double y = y0 + amp * std::sin(t);
      const double slope = amp * 2.0 * std::numbers::pi / period * std::cos(t);
      const double reach = half * std::sqrt(1.0 + slope * slope);
      for (int r = static_cast<int>(std::floor(y - reach - 1));
           r <= static_cast<int>(std::ceil(y + reach + 1)); ++r) {
        if (std::abs(r - y) <= reach && r >= 0 && r < cv.height()) cv.set(r, c);
      }
    }
  }
}

void render_gaafet(Canvas& cv, const PatternSpec& s) {
  // Stacks of three horizontal sheets (`width` thick, `pitch` apart) joined
  // by a vertical gate across the stack.
  const double p = s.pitch_nm, w = s.width_nm;
  const double stack_h = 2.0 * p + w;
  const double stack_pitch_y = stack_h + 1.5 * p;
  const double sheet_len = 7.0 * p;
  const double stack_pitch_x = sheet_len + 1.0 * p;
  const int nx = periods(cv.width(), cv.px(stack_pitch_x));
  const int ny = periods(cv.height(), cv.px(stack_pitch_y));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * stack_pitch_x, y = j * stack_pitch_y;
      for (int k = 0; k < 3; ++k) cv.rect_nm(x, y + k * p, sheet_len, w);
      cv.rect_nm(x + 0.5 * (sheet_len - w), y, w, stack_h);
    }
  }
}

void render_mbcfet(Canvas& cv, const PatternSpec& s) {
  // Sheets of varying thickness (width, 1.6 width, 2.4 width) with bridges.
  const double p = s.pitch_nm, w = s.width_nm;
  const std::array<double, 3> thick = {w, 1.6 * w, 2.4 * w};
  const double sheet_len = 6.0 * p;
  const double pitch_x = sheet_len + p;
  const double row_pitch = 0.2 * p + 2.4 * w;
  const int nx = periods(cv.width(), cv.px(pitch_x));
  const int ny = periods(cv.height(), cv.px(row_pitch));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * pitch_x, y = j * row_pitch;
      cv.rect_nm(x, y, sheet_len, thick[j % 3]);
      if (j + 1 < ny) {
        cv.rect_nm(x + (j % 2 == 0 ? 0.2 : 0.7) * sheet_len, y, w, row_pitch + w);
      }
    }
  }
}

void render_backside_power(Canvas& cv, const PatternSpec& s) {
  // Horizontal buried rails of `width` at `pitch`, with square vias between.
  const double p = s.pitch_nm, w = s.width_nm;
  const double via = 0.75 * w;
  const int ny = periods(cv.height(), cv.px(p));
  for (int j = 0; j < ny; ++j) cv.rect_nm(0.0, j * p, cv.width_nm(), w);
  const double via_pitch = 3.5 * p;
  const int nx = periods(cv.width(), cv.px(via_pitch));
  for (int j = 0; j + 1 < ny; ++j) {
    const int y0 = cv.edge(j * p) + cv.extent(w);
    const int y1 = cv.edge((j + 1) * p);
    for (int i = 0; i < nx; ++i) {
      const double x = (j % 2 == 0 ? 0.3 : 0.8) * via_pitch + i * via_pitch;
      cv.rect_px(cv.edge(x), y0, cv.extent(via), y1 - y0);
    }
  }
}

void render_cfet(Canvas& cv, const PatternSpec& s) {
  // n/p channel pairs separated by a thin isolation layer.
  const double p = s.pitch_nm, w = s.width_nm;
  const double len = 6.3 * p;
  const double pitch_x = len + 0.8 * p;
  const int nx = periods(cv.width(), cv.px(pitch_x));
  const int ny = periods(cv.height(), cv.px(p));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * pitch_x, y = j * p;
      cv.rect_nm(x, y, len, w);
      cv.rect_nm(x, y + w + kCfetIsolationNm, len, w);
    }
  }
}

void render_high_na_sub8(Canvas& cv, const PatternSpec& s) {
  // Dense vertical lines plus short horizontal links stretched 2x in y.
  const double p = s.pitch_nm, w = s.width_nm;
  render_lines(cv, p, w, 0.0, cv.height_nm());
  const double link_h = 2.0 * w;
  const double link_pitch = 14.0 * p;
  const int nx = periods(cv.width(), cv.px(p));
  const int ny = periods(cv.height(), cv.px(link_pitch));
  for (int k = 0; k + 1 < nx; ++k) {
    const int x0 = cv.edge(k * p);
    const int x1 = cv.edge((k + 1) * p) + cv.extent(w);
    if (x1 > cv.width()) break;
    for (int j = 0; j < ny; ++j) {
      const double y = ((k * 5) % 14) / 14.0 * link_pitch + j * link_pitch;
      cv.rect_px(x0, cv.edge(y), x1 - x0, cv.extent(link_h));
    }
  }
}

void render_strain(Canvas& cv, const PatternSpec& s) {
  // SiGe stressor bars of `width` at `pitch`, broken into long segments.
  const double p = s.pitch_nm, w = s.width_nm;
  const double seg = 8.0 * p;
  const double seg_pitch = seg + 1.0 * p;
  const int nx = periods(cv.width(), cv.px(p));
  const int ny = periods(cv.height(), cv.px(seg_pitch));
  for (int i = 0; i < nx; ++i) {
    const double shift = (i % 2 == 0 ? 0.0 : 0.5) * seg_pitch;
    for (int j = -1; j < ny; ++j) {
      const double y = shift + j * seg_pitch;
      const int y0 = std::max(0, cv.edge(y));
      const int y1 = std::min(cv.height(), cv.edge(y + seg));
      cv.rect_px(cv.edge(i * p), y0, cv.extent(w), y1 - y0);
    }
  }
}

}  // namespace

const std::array<PatternKind, kPatternKindCount>& all_pattern_kinds() {
  return kAllKinds;
}

std::vector<PatternKind> standard_pattern_kinds() {
  std::vector<PatternKind> out;
  for (const auto& e : catalog()) {
    if (e.standard) out.push_back(e.kind);
  }
  return out;
}

std::vector<PatternKind> advanced_pattern_kinds() {
  std::vector<PatternKind> out;
  for (const auto& e : catalog()) {
    if (!e.standard) out.push_back(e.kind);
  }
  return out;
}

std::string_view pattern_name(PatternKind kind) { return kNames[index_of(kind)]; }

PatternKind parse_pattern_kind(std::string_view name) {
  for (int i = 0; i < kPatternKindCount; ++i) {
    if (kNames[i] == name) return kAllKinds[i];
  }
  throw ConfigError("unknown pattern kind: " + std::string(name));
}

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "Easy";
    case Difficulty::kModerate: return "Moderate";
    case Difficulty::kHard: return "Hard";
    case Difficulty::kAdvanced: return "Advanced";
    case Difficulty::kExtreme: return "Extreme";
  }
  return "?";
}

const std::vector<CatalogEntry>& catalog() {
  using D = Difficulty;
  using K = PatternKind;
  static const std::vector<CatalogEntry> entries = {
      {K::kLogicGates, D::kEasy, 0.099, 31.6, "70-90%", true, true,
       "H-shaped interconnect structures"},
      {K::kEuvLineSpace, D::kModerate, 0.586, 19.0, "40-70%", true, true,
       "16nm lines, 32nm pitch"},
      {K::kEuvContacts, D::kEasy, 0.562, 38.0, "70-90%", true, true,
       "40nm contacts, 50nm pitch"},
      {K::kEuvMetal, D::kModerate, 0.681, 19.0, "40-70%", true, true,
       "24nm lines, 42nm pitch"},
      {K::kStiPattern, D::kEasy, 0.742, 120.2, "70-90%", true, true,
       "Shallow trench isolation"},
      {K::kFinfet3nm, D::kModerate, 0.523, 12.7, "40-70%", true, true,
       "12nm fins, 24nm pitch"},
      {K::kDramArrays, D::kEasy, 0.718, 31.6, "70-90%", true, true,
       "30x50nm memory cells"},
      {K::kSramCells, D::kModerate, 0.524, 12.7, "40-70%", true, true,
       "SRAM with internal structure"},
      {K::kContactCuts, D::kEasy, 0.273, 50.6, "70-90%", true, true,
       "Random contact patterns, 70% density"},
      {K::kHighNaLines, D::kModerate, 0.500, 12.7, "40-70%", true, true,
       "12nm features, 24nm pitch"},
      {K::kHighNaContacts, D::kEasy, 0.431, 25.3, "70-90%", true, true,
       "28nm contacts for High-NA EUV"},
      {K::kCurvilinear, D::kHard, 0.087, 6.3, "10-40%", false, true,
       "Curved features (limitation study)"},
      {K::kGaafetNanosheets, D::kAdvanced, 0.355, 12.0, "40-70%", true, false,
       "Stacked nanosheet transistors for 3nm nodes"},
      {K::kMbcfet, D::kAdvanced, 0.421, 8.0, "40-70%", true, false,
       "Multi-bridge channel FET with variable pitch"},
      {K::kBacksidePower, D::kAdvanced, 0.653, 15.0, "40-70%", true, false,
       "Backside power routing"},
      {K::kCfet, D::kExtreme, 0.287, 8.0, "10-40%", false, false,
       "Complementary FET with vertical n/p stacking"},
      {K::kHighNaSub8, D::kExtreme, 0.452, 6.0, "10-40%", true, false,
       "Ultra-fine pitch with anamorphic effects"},
      {K::kStrainEngineering, D::kAdvanced, 0.558, 25.0, "40-70%", true, false,
       "SiGe compressive and tensile stress regions"},
  };
  return entries;
}

const CatalogEntry& catalog_entry(PatternKind kind) {
  const int i = index_of(kind);
  for (const auto& e : catalog()) {
    if (e.kind == kind) return e;
  }
  throw ConfigError("no catalog entry for kind " + std::to_string(i));
}

PatternSpec canonical_spec(PatternKind kind, GridSpec grid) {
  PatternSpec s;
  s.kind = kind;
  s.grid = grid;
  const double ps = grid.pixel_size_nm;
  switch (kind) {
    case PatternKind::kLogicGates: s.pitch_nm = 12 * ps; s.width_nm = 32.0; break;
    case PatternKind::kEuvLineSpace: s.pitch_nm = 32.0; s.width_nm = 16.0; break;
    case PatternKind::kEuvContacts: s.pitch_nm = 50.0; s.width_nm = 40.0; break;
    case PatternKind::kEuvMetal: s.pitch_nm = 42.0; s.width_nm = 24.0; break;
    case PatternKind::kStiPattern: s.pitch_nm = 21.8 * ps; s.width_nm = 120.2; break;
    case PatternKind::kFinfet3nm: s.pitch_nm = 24.0; s.width_nm = 12.0; break;
    case PatternKind::kDramArrays: s.pitch_nm = 6 * ps; s.width_nm = 30.0; break;
    case PatternKind::kSramCells: s.pitch_nm = 16 * ps; s.width_nm = 12.0; break;
    case PatternKind::kContactCuts:
      s.pitch_nm = 81.0; s.width_nm = 50.0; s.density = 0.7; s.seed = 42; break;
    case PatternKind::kHighNaLines: s.pitch_nm = 24.0; s.width_nm = 12.0; break;
    case PatternKind::kHighNaContacts: s.pitch_nm = 38.5; s.width_nm = 28.0; break;
    case PatternKind::kCurvilinear: s.pitch_nm = 21 * ps; s.width_nm = 10.0; break;
    case PatternKind::kGaafetNanosheets: s.pitch_nm = 4 * ps; s.width_nm = 12.0; break;
    case PatternKind::kMbcfet: s.pitch_nm = 4 * ps; s.width_nm = 8.0; break;
    case PatternKind::kBacksidePower: s.pitch_nm = 5 * ps; s.width_nm = 20.0; break;
    case PatternKind::kCfet: s.pitch_nm = 6 * ps; s.width_nm = 8.0; break;
    case PatternKind::kHighNaSub8: s.pitch_nm = 16.0; s.width_nm = 8.0; break;
    case PatternKind::kStrainEngineering: s.pitch_nm = 40.0; s.width_nm = 25.0; break;
  }
  return s;
}

PatternSpec legacy_line_space_spec(GridSpec grid) {
  PatternSpec s;
  s.kind = PatternKind::kEuvLineSpace;
  s.pitch_nm = 516.75;
  s.width_nm = 101.25;
  s.grid = grid;
  return s;
}

Field2D render(const PatternSpec& spec) {
  index_of(spec.kind);
  if (!(spec.pitch_nm > 0.0) || !(spec.width_nm > 0.0)) {
    throw GeometryError("pitch and width must be positive");
  }
  if (spec.width_nm >= spec.pitch_nm) {
    throw GeometryError("feature width must be smaller than the pitch");
  }
  if (!(spec.density > 0.0) || spec.density > 1.0) {
    throw GeometryError("density must lie in (0, 1]");
  }
  if (spec.grid.width <= 0 || spec.grid.height <= 0 ||
      !(spec.grid.pixel_size_nm > 0.0)) {
    throw GeometryError("invalid grid");
  }
  Canvas cv(spec);
  const double p = spec.pitch_nm, w = spec.width_nm;
  const double full_h = spec.grid.height * spec.grid.pixel_size_nm;
  switch (spec.kind) {
    case PatternKind::kLogicGates: render_logic_gates(cv, spec); break;
    case PatternKind::kEuvLineSpace:
    case PatternKind::kFinfet3nm: render_lines(cv, p, w, 0.0, full_h); break;
    case PatternKind::kHighNaLines:
      render_lines(cv, p, w, 4 * spec.grid.pixel_size_nm,
                   full_h - 8 * spec.grid.pixel_size_nm);
      break;
    case PatternKind::kEuvContacts:
    case PatternKind::kHighNaContacts: render_contacts(cv, p, p, w, w); break;
    case PatternKind::kDramArrays:
      render_contacts(cv, p, 1.5 * p, w, w * 5.0 / 3.0);
      break;
    case PatternKind::kEuvMetal: render_euv_metal(cv, spec); break;
    case PatternKind::kStiPattern: render_sti(cv, spec); break;
    case PatternKind::kSramCells: render_sram(cv, spec); break;
    case PatternKind::kContactCuts: render_contact_cuts(cv, spec); break;
    case PatternKind::kCurvilinear: render_curvilinear(cv, spec); break;
    case PatternKind::kGaafetNanosheets: render_gaafet(cv, spec); break;
    case PatternKind::kMbcfet: render_mbcfet(cv, spec); break;
    case PatternKind::kBacksidePower: render_backside_power(cv, spec); break;
    case PatternKind::kCfet: render_cfet(cv, spec); break;
    case PatternKind::kHighNaSub8: render_high_na_sub8(cv, spec); break;
    case PatternKind::kStrainEngineering: render_strain(cv, spec); break;
  }
  return cv.take();
}

PatternStats stats(const Field2D& field) {
  std::size_t ones = 0;
  for (double v : field.values()) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      throw ContractError("pattern stats require a binary field");
    }
  }
  PatternStats st;
  st.fill_ratio = static_cast<double>(ones) / static_cast<double>(field.size());
  int min_run = std::max(field.width(), field.height());
  bool any = false;
  auto scan = [&](int lines, int length, auto at) {
    for (int l = 0; l < lines; ++l) {
      int run = 0;
      for (int i = 0; i <= length; ++i) {
        if (i < length && at(l, i) == 1.0) {
          ++run;
        } else if (run > 0) {
          min_run = std::min(min_run, run);
          any = true;
          run = 0;
        }
      }
    }
  };
  scan(field.height(), field.width(), [&](int r, int c) { return field(r, c); });
  scan(field.width(), field.height(), [&](int c, int r) { return field(r, c); });
  st.min_feature_nm = any ? min_run * field.pixel_size_nm() : 0.0;
  return st;
}

PatternStats stats(const PatternSpec& spec, const Field2D& field) {
  PatternStats st = stats(field);
  st.subpixel_warning = spec.width_nm < spec.grid.pixel_size_nm;
  return st;
}

int default_dataset_size(std::uint64_t base_seed) {
  std::mt19937_64 rng(base_seed ^ 0x9e3779b97f4a7c15ULL);
  return 48 + static_cast<int>(rng() % 5);
}

std::vector<Sample> sample_dataset(PatternKind kind, int n,
                                   std::uint64_t base_seed, GridSpec grid) {
  if (n < 1 || n > 1000) throw ConfigError("dataset size must be in [1, 1000]");
  const PatternSpec base = canonical_spec(kind, grid);
  const double ps = grid.pixel_size_nm;
  // Width may not exceed pitch and must stay at least one pixel wide.
  const double w_lo = std::max(kJitterWidthMinNm, ps);
  const double w_hi = kJitterWidthMaxNm;
  if (w_lo > w_hi || w_lo >= kJitterPitchMaxNm) {
    throw GeometryError("empty jitter validity range");
  }

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  out.push_back({base, render(base)});

  std::mt19937_64 rng(base_seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  std::set<std::tuple<double, double, int, int>> seen;
  int attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++attempts > 100 * n) throw GeometryError("jitter sampling did not converge");
    PatternSpec s = base;
    s.pitch_nm = uniform(kJitterPitchMinNm, kJitterPitchMaxNm);
    // The upper width bound keeps at least one pixel of space per period.
    const double hi = std::min(w_hi, s.pitch_nm - ps);
    if (hi <= w_lo) continue;
    s.width_nm = uniform(w_lo, hi);
    const int pitch_px = std::max(1, static_cast<int>(std::lround(s.pitch_nm / ps)));
    s.offset_x_px = static_cast<int>(rng() % static_cast<std::uint64_t>(pitch_px + 1));
    s.offset_y_px = static_cast<int>(rng() % static_cast<std::uint64_t>(pitch_px + 1));
    s.seed = base.seed + out.size();
    if (!seen.emplace(s.pitch_nm, s.width_nm, s.offset_x_px, s.offset_y_px).second) {
      continue;
    }
    Field2D f = render(s);
    if (f.max() == 0.0) continue;  // nothing fits at this geometry
    out.push_back({s, std::move(f)});
  }
  return out;
}

}  // namespace euvilt
