#include "euvilt/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "euvilt/errors.hpp"

namespace euvilt::plot {

Image::Image(int width, int height, Rgb background)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw DimensionError("image size must be positive");
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = background[0];
    pixels_[i + 1] = background[1];
    pixels_[i + 2] = background[2];
  }
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  pixels_[i] = c[0];
  pixels_[i + 1] = c[1];
  pixels_[i + 2] = c[2];
}

Rgb Image::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = std::max(0, y0); y < std::min(height_, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(width_, x1); ++x) set(x, y, c);
  }
}

void Image::line(int x0, int y0, int x1, int y1, Rgb c) {
  // Bresenham.
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Image::hline_dashed(int x0, int x1, int y, Rgb c) {
  for (int x = x0; x < x1; ++x) {
    if ((x - x0) % 8 < 5) set(x, y, c);
  }
}

void Image::blit_field(const Field2D& f, int x0, int y0, int w, int h, double lo,
                       double hi) {
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < h; ++y) {
    const int r = std::min(f.height() - 1, y * f.height() / h);
    for (int x = 0; x < w; ++x) {
      const int c = std::min(f.width() - 1, x * f.width() / w);
      const double t = std::clamp((f(r, c) - lo) / span, 0.0, 1.0);
      const auto v = static_cast<std::uint8_t>(std::lround(t * 255.0));
      set(x0 + x, y0 + y, {v, v, v});
    }
  }
}

void Image::paste(const Image& other, int x0, int y0) {
  for (int y = 0; y < other.height(); ++y) {
    for (int x = 0; x < other.width(); ++x) set(x0 + x, y0 + y, other.get(x, y));
  }
}

void Image::write_png(const std::filesystem::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw IoError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height_; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels_.data() + static_cast<std::size_t>(y) * width_ * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

constexpr int kMargin = 24;

int to_y(double v, double y_min, double y_max, int height) {
  const double t = (v - y_min) / (y_max - y_min);
  return height - kMargin - static_cast<int>(std::lround(t * (height - 2 * kMargin)));
}

void axes(Image& img) {
  img.line(kMargin, kMargin, kMargin, img.height() - kMargin, kBlack);
  img.line(kMargin, img.height() - kMargin, img.width() - kMargin,
           img.height() - kMargin, kBlack);
}

}  // namespace

Image bar_chart(const std::vector<double>& values, const std::vector<Rgb>& colors,
                const std::vector<double>& reference_lines, double y_max, int width,
                int height) {
  Image img(width, height);
  if (!(y_max > 0.0)) y_max = 1.0;
  const int n = std::max<int>(1, static_cast<int>(values.size()));
  const double slot = static_cast<double>(width - 2 * kMargin) / n;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    const double v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0, y_max) : 0.0;
    const int x0 = kMargin + static_cast<int>(i * slot + 0.15 * slot);
    const int x1 = kMargin + static_cast<int>((i + 1) * slot - 0.15 * slot);
    const Rgb c = colors.empty() ? kBlue : colors[static_cast<std::size_t>(i) % colors.size()];
    img.fill_rect(x0, to_y(v, 0.0, y_max, height), x1, height - kMargin, c);
  }
  for (double r : reference_lines) {
    if (r >= 0.0 && r <= y_max) {
      img.hline_dashed(kMargin, width - kMargin, to_y(r, 0.0, y_max, height), kRed);
    }
  }
  axes(img);
  return img;
}

Image line_chart(const std::vector<std::vector<double>>& series,
                 const std::vector<Rgb>& colors, double y_min, double y_max,
                 int width, int height) {
  Image img(width, height);
  if (!(y_max > y_min)) y_max = y_min + 1.0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ys = series[s];
    if (ys.size() < 2) continue;
    const Rgb c = colors.empty() ? kBlue : colors[s % colors.size()];
    const double dx = static_cast<double>(width - 2 * kMargin) / (ys.size() - 1);
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
      img.line(kMargin + static_cast<int>(std::lround(i * dx)),
               to_y(std::clamp(ys[i], y_min, y_max), y_min, y_max, height),
               kMargin + static_cast<int>(std::lround((i + 1) * dx)),
               to_y(std::clamp(ys[i + 1], y_min, y_max), y_min, y_max, height), c);
    }
  }
  axes(img);
  return img;
}

}  // namespace euvilt::plot
