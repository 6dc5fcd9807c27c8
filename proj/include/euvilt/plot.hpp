#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "euvilt/field.hpp"

namespace euvilt::plot {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kWhite = {255, 255, 255};
inline constexpr Rgb kBlack = {0, 0, 0};
inline constexpr Rgb kGray = {160, 160, 160};
inline constexpr Rgb kBlue = {31, 119, 180};
inline constexpr Rgb kOrange = {255, 127, 14};
inline constexpr Rgb kGreen = {44, 160, 44};
inline constexpr Rgb kRed = {214, 39, 40};
inline constexpr Rgb kPurple = {148, 103, 189};

/// RGB raster with a few drawing primitives, written out as PNG.
class Image {
 public:
  Image(int width, int height, Rgb background = kWhite);

  int width() const { return width_; }
  int height() const { return height_; }

  void set(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  void line(int x0, int y0, int x1, int y1, Rgb c);
  /// Dashed horizontal line.
  void hline_dashed(int x0, int x1, int y, Rgb c);
  /// Field mapped through a grayscale (lo -> black, hi -> white) into the
  /// box at (x0, y0), nearest-neighbour scaled to w x h.
  void blit_field(const Field2D& f, int x0, int y0, int w, int h, double lo,
                  double hi);
  void paste(const Image& other, int x0, int y0);

  /// Throws IoError on failure.
  void write_png(const std::filesystem::path& path) const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Bars with optional dashed reference levels, axis from 0 to y_max.
Image bar_chart(const std::vector<double>& values, const std::vector<Rgb>& colors,
                const std::vector<double>& reference_lines, double y_max,
                int width = 480, int height = 320);

/// Polylines over a shared x range, y axis from y_min to y_max.
Image line_chart(const std::vector<std::vector<double>>& series,
                 const std::vector<Rgb>& colors, double y_min, double y_max,
                 int width = 480, int height = 320);

}  // namespace euvilt::plot
