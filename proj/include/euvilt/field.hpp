#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace euvilt {

inline constexpr int kDefaultGridSize = 128;
inline constexpr double kDefaultPixelSizeNm = 6.328;  // 810 nm / 128 px
inline constexpr double kEuvWavelengthNm = 13.5;

/// Real-valued raster with a physical pixel pitch. Row-major storage.
class Field2D {
 public:
  Field2D(int width, int height, double pixel_size_nm = kDefaultPixelSizeNm,
          double fill = 0.0);
  Field2D(int width, int height, double pixel_size_nm,
          std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  double pixel_size_nm() const { return pixel_size_nm_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int row, int col) {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  double operator()(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const Field2D& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const;
  double min() const;
  double max() const;
  double mean() const;

  /// Same values with rows and columns swapped.
  Field2D transposed() const;

  friend bool operator==(const Field2D&, const Field2D&) = default;

 private:
  int width_;
  int height_;
  double pixel_size_nm_;
  std::vector<double> values_;
};

/// Square, odd-sided convolution kernel.
class Kernel2D {
 public:
  Kernel2D(int size, std::vector<double> weights);

  int size() const { return size_; }
  int radius() const { return size_ / 2; }
  double operator()(int row, int col) const {
    return weights_[static_cast<std::size_t>(row) * size_ + col];
  }
  std::span<const double> weights() const { return weights_; }
  double sum() const;

  static Kernel2D delta(int size);

 private:
  int size_;
  std::vector<double> weights_;
};

/// Same-shape convolution, reflect (mirror-101) boundary.
/// out(y, x) = sum_{i,j} K(i, j) * in(y - (i - r), x - (j - r)).
Field2D conv2d(const Field2D& input, const Kernel2D& kernel);

/// 7x7 normalized Gaussian over integer offsets in [-3, 3].
Kernel2D gaussian_kernel(double sigma_px);

/// d(weights)/d(sigma) of gaussian_kernel(sigma_px), same layout.
std::vector<double> gaussian_kernel_dsigma(double sigma_px);

/// Normalized sinc(r) * exp(-r^2 / 4) with r measured in wavelengths.
Kernel2D diffraction_kernel(int size = 7,
                            double pixel_size_nm = kDefaultPixelSizeNm,
                            double lambda_nm = kEuvWavelengthNm);

/// Normalized sinc: sin(pi x) / (pi x), sinc(0) = 1.
double sinc(double x);

/// Mean of |dx f| + |dy f| with forward differences; last row/column
/// replicate, so their outward difference is zero.
double gradient_l1(const Field2D& field);

/// Linear-interpolated shift along x by dx_px; edge columns replicate.
Field2D fractional_shift(const Field2D& field, double dx_px);

// Span-level kernels shared by the plain functions and the autodiff tape.
namespace raster {

int reflect_index(int i, int n);

void convolve(std::span<const double> in, int width, int height,
              const Kernel2D& kernel, std::span<double> out);
/// Accumulates the adjoint of convolve into grad_in.
void convolve_adjoint(std::span<const double> grad_out, int width, int height,
                      const Kernel2D& kernel, std::span<double> grad_in);
/// Convolution with raw weights (size x size) instead of a Kernel2D.
void convolve_weights(std::span<const double> in, int width, int height,
                      std::span<const double> weights, int size,
                      std::span<double> out);

double gradient_l1(std::span<const double> in, int width, int height);
/// Accumulates scale * d(gradient_l1)/d(in) into grad_in.
void gradient_l1_adjoint(std::span<const double> in, int width, int height,
                         double scale, std::span<double> grad_in);

void shift_x(std::span<const double> in, int width, int height, double dx_px,
             std::span<double> out);
void shift_x_adjoint(std::span<const double> grad_out, int width, int height,
                     double dx_px, std::span<double> grad_in);
/// d(sum grad_out * shift_x(in, dx)) / d(dx), right derivative at integers.
double shift_x_ddx(std::span<const double> in,
                   std::span<const double> grad_out, int width, int height,
                   double dx_px);

}  // namespace raster

// Serialization. PGM values map [lo, hi] onto 0..65535 with clamping.
enum class PgmFormat { kAscii, kBinary };

void write_pgm(const Field2D& field, const std::filesystem::path& path,
               PgmFormat format = PgmFormat::kBinary, double lo = 0.0,
               double hi = 1.0);
Field2D read_pgm(const std::filesystem::path& path,
                 double pixel_size_nm = kDefaultPixelSizeNm);

void write_csv(const Field2D& field, const std::filesystem::path& path);
Field2D read_csv(const std::filesystem::path& path,
                 double pixel_size_nm = kDefaultPixelSizeNm);

}  // namespace euvilt
