#include "euvilt/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "euvilt/errors.hpp"

namespace euvilt {

namespace {

constexpr int kGaussianSize = 7;

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw DimensionError("field dimensions must be positive, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

Field2D::Field2D(int width, int height, double pixel_size_nm, double fill)
    : width_(width), height_(height), pixel_size_nm_(pixel_size_nm) {
  check_dims(width, height);
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

Field2D::Field2D(int width, int height, double pixel_size_nm,
                 std::vector<double> values)
    : width_(width),
      height_(height),
      pixel_size_nm_(pixel_size_nm),
      values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionError("field value count does not match " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
}

bool Field2D::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Field2D::min() const {
  return *std::min_element(values_.begin(), values_.end());
}

double Field2D::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

double Field2D::mean() const {
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

Field2D Field2D::transposed() const {
  Field2D out(height_, width_, pixel_size_nm_);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) out(c, r) = (*this)(r, c);
  }
  return out;
}

Kernel2D::Kernel2D(int size, std::vector<double> weights)
    : size_(size), weights_(std::move(weights)) {
  if (size <= 0 || size % 2 == 0) {
    throw DimensionError("kernel size must be odd and positive, got " +
                         std::to_string(size));
  }
  if (weights_.size() != static_cast<std::size_t>(size) * size) {
    throw DimensionError("kernel weight count does not match size");
  }
}

double Kernel2D::sum() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

Kernel2D Kernel2D::delta(int size) {
  std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
  w[w.size() / 2] = 1.0;
  return Kernel2D(size, std::move(w));
}

namespace raster {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

void convolve_weights(std::span<const double> in, int width, int height,
                      std::span<const double> weights, int size,
                      std::span<double> out) {
  const int r = size / 2;
  std::fill(out.begin(), out.end(), 0.0);
  for (int y = 0; y < height; ++y) {
    double* orow = out.data() + static_cast<std::size_t>(y) * width;
    for (int i = 0; i < size; ++i) {
      const int sy = reflect_index(y - (i - r), height);
      const double* irow = in.data() + static_cast<std::size_t>(sy) * width;
      for (int j = 0; j < size; ++j) {
        const double k = weights[static_cast<std::size_t>(i) * size + j];
        const int ox = j - r;  // out(x) += k * in(x - ox)
        const int lo = std::clamp(ox, 0, width);
        const int hi = std::clamp(width + ox, 0, width);
        for (int x = 0; x < lo; ++x) {
          orow[x] += k * irow[reflect_index(x - ox, width)];
        }
        for (int x = lo; x < hi; ++x) orow[x] += k * irow[x - ox];
        for (int x = std::max(hi, lo); x < width; ++x) {
          orow[x] += k * irow[reflect_index(x - ox, width)];
        }
      }
    }
  }
}

void convolve(std::span<const double> in, int width, int height,
              const Kernel2D& kernel, std::span<double> out) {
  convolve_weights(in, width, height, kernel.weights(), kernel.size(), out);
}

void convolve_adjoint(std::span<const double> grad_out, int width, int height,
                      const Kernel2D& kernel, std::span<double> grad_in) {
  const int size = kernel.size();
  const int r = kernel.radius();
  for (int y = 0; y < height; ++y) {
    const double* grow = grad_out.data() + static_cast<std::size_t>(y) * width;
    for (int i = 0; i < size; ++i) {
      const int sy = reflect_index(y - (i - r), height);
      double* irow = grad_in.data() + static_cast<std::size_t>(sy) * width;
      for (int j = 0; j < size; ++j) {
        const double k = kernel(i, j);
        const int ox = j - r;
        const int lo = std::clamp(ox, 0, width);
        const int hi = std::clamp(width + ox, 0, width);
        for (int x = 0; x < lo; ++x) {
          irow[reflect_index(x - ox, width)] += k * grow[x];
        }
        for (int x = lo; x < hi; ++x) irow[x - ox] += k * grow[x];
        for (int x = std::max(hi, lo); x < width; ++x) {
          irow[reflect_index(x - ox, width)] += k * grow[x];
        }
      }
    }
  }
}

double gradient_l1(std::span<const double> in, int width, int height) {
  double sum = 0.0;
  for (int y = 0; y < height; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * width;
    const double* next = y + 1 < height ? row + width : row;
    for (int x = 0; x < width; ++x) {
      const double dx = x + 1 < width ? row[x + 1] - row[x] : 0.0;
      const double dy = next[x] - row[x];
      sum += std::abs(dx) + std::abs(dy);
    }
  }
  return sum / (static_cast<double>(width) * height);
}

void gradient_l1_adjoint(std::span<const double> in, int width, int height,
                         double scale, std::span<double> grad_in) {
  const double s = scale / (static_cast<double>(width) * height);
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (int y = 0; y < height; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      const std::size_t p = base + x;
      if (x + 1 < width) {
        const double g = s * sign(in[p + 1] - in[p]);
        grad_in[p + 1] += g;
        grad_in[p] -= g;
      }
      if (y + 1 < height) {
        const double g = s * sign(in[p + width] - in[p]);
        grad_in[p + width] += g;
        grad_in[p] -= g;
      }
    }
  }
}

namespace {

struct ShiftSplit {
  int whole;
  double frac;
};

ShiftSplit split_shift(double dx_px) {
  const double whole = std::floor(dx_px);
  return {static_cast<int>(whole), dx_px - whole};
}

}  // namespace

void shift_x(std::span<const double> in, int width, int height, double dx_px,
             std::span<double> out) {
  const auto [k, f] = split_shift(dx_px);
  for (int y = 0; y < height; ++y) {
    const double* irow = in.data() + static_cast<std::size_t>(y) * width;
    double* orow = out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      const double a = irow[std::clamp(x - k, 0, width - 1)];
      const double b = irow[std::clamp(x - k - 1, 0, width - 1)];
      orow[x] = (1.0 - f) * a + f * b;
    }
  }
}

void shift_x_adjoint(std::span<const double> grad_out, int width, int height,
                     double dx_px, std::span<double> grad_in) {
  const auto [k, f] = split_shift(dx_px);
  for (int y = 0; y < height; ++y) {
    const double* grow = grad_out.data() + static_cast<std::size_t>(y) * width;
    double* irow = grad_in.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      irow[std::clamp(x - k, 0, width - 1)] += (1.0 - f) * grow[x];
      irow[std::clamp(x - k - 1, 0, width - 1)] += f * grow[x];
    }
  }
}

double shift_x_ddx(std::span<const double> in,
                   std::span<const double> grad_out, int width, int height,
                   double dx_px) {
  const int k = split_shift(dx_px).whole;
  double total = 0.0;
  for (int y = 0; y < height; ++y) {
    const double* irow = in.data() + static_cast<std::size_t>(y) * width;
    const double* grow = grad_out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      const double a = irow[std::clamp(x - k, 0, width - 1)];
      const double b = irow[std::clamp(x - k - 1, 0, width - 1)];
      total += grow[x] * (b - a);
    }
  }
  return total;
}

}  // namespace raster

Field2D conv2d(const Field2D& input, const Kernel2D& kernel) {
  if (kernel.size() > std::min(input.width(), input.height())) {
    throw DimensionError("kernel of size " + std::to_string(kernel.size()) +
                         " exceeds field " + std::to_string(input.width()) +
                         "x" + std::to_string(input.height()));
  }
  Field2D out(input.width(), input.height(), input.pixel_size_nm());
  raster::convolve(input.values(), input.width(), input.height(), kernel,
                   out.values());
  return out;
}

Kernel2D gaussian_kernel(double sigma_px) {
  if (!(sigma_px > 0.0) || !std::isfinite(sigma_px)) {
    throw ParameterError("gaussian sigma must be positive and finite");
  }
  const int r = kGaussianSize / 2;
  std::vector<double> w;
  w.reserve(kGaussianSize * kGaussianSize);
  double z = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double e = std::exp(-(x * x + y * y) / (2.0 * sigma_px * sigma_px));
      w.push_back(e);
      z += e;
    }
  }
  for (double& v : w) v /= z;
  return Kernel2D(kGaussianSize, std::move(w));
}

std::vector<double> gaussian_kernel_dsigma(double sigma_px) {
  const Kernel2D k = gaussian_kernel(sigma_px);
  const int r = kGaussianSize / 2;
  const double s3 = sigma_px * sigma_px * sigma_px;
  std::vector<double> r2;
  r2.reserve(kGaussianSize * kGaussianSize);
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) r2.push_back(static_cast<double>(x * x + y * y));
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < r2.size(); ++i) weighted += k.weights()[i] * r2[i];
  std::vector<double> d(r2.size());
  for (std::size_t i = 0; i < r2.size(); ++i) {
    d[i] = k.weights()[i] * (r2[i] - weighted) / s3;
  }
  return d;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

Kernel2D diffraction_kernel(int size, double pixel_size_nm, double lambda_nm) {
  if (size <= 0 || size % 2 == 0) {
    throw ParameterError("diffraction kernel size must be odd and positive");
  }
  if (!(pixel_size_nm > 0.0) || !(lambda_nm > 0.0)) {
    throw ParameterError("pixel size and wavelength must be positive");
  }
  const int r = size / 2;
  const double scale = pixel_size_nm / lambda_nm;
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(size) * size);
  double z = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double rr = std::sqrt(static_cast<double>(x * x + y * y)) * scale;
      const double v = sinc(rr) * std::exp(-rr * rr / 4.0);
      w.push_back(v);
      z += v;
    }
  }
  for (double& v : w) v /= z;
  return Kernel2D(size, std::move(w));
}

double gradient_l1(const Field2D& field) {
  return raster::gradient_l1(field.values(), field.width(), field.height());
}

Field2D fractional_shift(const Field2D& field, double dx_px) {
  if (!std::isfinite(dx_px) || std::abs(dx_px) >= field.width()) {
    throw ParameterError("shift must satisfy |dx| < width");
  }
  Field2D out(field.width(), field.height(), field.pixel_size_nm());
  raster::shift_x(field.values(), field.width(), field.height(), dx_px,
                  out.values());
  return out;
}

void write_pgm(const Field2D& field, const std::filesystem::path& path,
               PgmFormat format, double lo, double hi) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const bool binary = format == PgmFormat::kBinary;
  os << (binary ? "P5" : "P2") << "\n"
     << field.width() << " " << field.height() << "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      const double t = std::clamp((field(r, c) - lo) / span, 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(t * 65535.0));
      if (binary) {
        os.put(static_cast<char>((q >> 8) & 0xff));
        os.put(static_cast<char>(q & 0xff));
      } else {
        os << q << (c + 1 < field.width() ? ' ' : '\n');
      }
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Field2D read_pgm(const std::filesystem::path& path, double pixel_size_nm) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string magic = pgm_token(is);
  if (magic != "P2" && magic != "P5") {
    throw IoError(path.string() + " is not a P2/P5 PGM");
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pgm_token(is));
    height = std::stoi(pgm_token(is));
    maxval = std::stoi(pgm_token(is));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header in " + path.string());
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError("bad PGM header values in " + path.string());
  }
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  if (magic == "P5") {
    const bool wide = maxval > 255;
    for (double& v : values) {
      unsigned q = 0;
      const int hi = is.get();
      if (hi == EOF) throw IoError("truncated PGM " + path.string());
      q = static_cast<unsigned>(hi);
      if (wide) {
        const int lo = is.get();
        if (lo == EOF) throw IoError("truncated PGM " + path.string());
        q = (q << 8) | static_cast<unsigned>(lo);
      }
      v = static_cast<double>(q) / maxval;
    }
  } else {
    for (double& v : values) {
      unsigned q = 0;
      if (!(is >> q)) throw IoError("truncated PGM " + path.string());
      v = static_cast<double>(q) / maxval;
    }
  }
  return Field2D(width, height, pixel_size_nm, std::move(values));
}

void write_csv(const Field2D& field, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", field(r, c));
      os << buf << (c + 1 < field.width() ? "," : "\n");
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

Field2D read_csv(const std::filesystem::path& path, double pixel_size_nm) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  int width = -1, height = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("non-numeric CSV cell in " + path.string());
      }
      ++count;
    }
    if (width < 0) width = count;
    if (count != width) throw IoError("ragged CSV rows in " + path.string());
    ++height;
  }
  if (height == 0) throw IoError("empty CSV " + path.string());
  return Field2D(width, height, pixel_size_nm, std::move(values));
}

}  // namespace euvilt
