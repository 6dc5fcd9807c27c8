#include "euvilt/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "euvilt/errors.hpp"

namespace euvilt {

bool EffectiveParams::strictly_in_bounds() const {
  return d > 0.0 && d < ParamBounds::kDiffractionMax && a > 0.0 &&
         a < ParamBounds::kAbsorptionMax && sigma_b_px > ParamBounds::kBlurMinPx &&
         sigma_b_px < ParamBounds::kBlurMaxPx &&
         phase_rad > -ParamBounds::kPhaseMaxRad &&
         phase_rad < ParamBounds::kPhaseMaxRad && c > 0.0 &&
         c < ParamBounds::kContrastMax;
}

EffectiveParams activate(const PhysicsParams& params, double pixel_size_nm) {
  for (double v : params.raw()) {
    if (!std::isfinite(v)) throw ParameterError("non-finite physics parameter");
  }
  EffectiveParams e;
  e.d = ad::sigmoid(params.theta_d) * 0.5;
  e.a = ad::sigmoid(params.theta_a) * 0.3;
  e.sigma_b_px = ad::sigmoid(params.theta_b) * 3.0 + 0.5;
  e.phase_rad = std::tanh(params.theta_p) * 0.5;
  e.c = ad::sigmoid(params.theta_c) * 2.0;
  e.blur_nm = e.sigma_b_px * pixel_size_nm;
  return e;
}

StageFlags StageFlags::cumulative(int count) {
  if (count < 0 || count > 5) {
    throw ParameterError("cumulative stage count must be in [0, 5]");
  }
  return {count > 0, count > 1, count > 2, count > 3, count > 4};
}

std::string StageFlags::describe() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += name;
  };
  add(diffraction, "diffraction");
  add(absorption, "absorption");
  add(blur, "blur");
  add(phase, "phase");
  add(contrast, "contrast");
  return s.empty() ? "none" : s;
}

Field2D apply_diffraction(const Field2D& mask, double d, const Kernel2D& kernel) {
  const Field2D spread = conv2d(mask, kernel);
  Field2D out(mask.width(), mask.height(), mask.pixel_size_nm());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] + d * spread[i];
  return out;
}

Field2D apply_absorption(const Field2D& i1, const Field2D& mask, double a) {
  if (!i1.same_shape(mask)) {
    throw DimensionError("absorption: intensity and mask shapes differ");
  }
  Field2D out(i1.width(), i1.height(), i1.pixel_size_nm());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = i1[i] * (1.0 - mask[i] * a);
  }
  return out;
}

Field2D apply_blur(const Field2D& i2, double sigma_b_px) {
  if (sigma_b_px <= kBlurPassthroughPx) return i2;
  return conv2d(i2, gaussian_kernel(sigma_b_px));
}

double phase_displacement_px(double phase_rad, double lambda_nm,
                             double pixel_size_nm) {
  // Grouped like the taped path so both evaluate bit-identically.
  return phase_rad * (lambda_nm / (2.0 * std::numbers::pi * pixel_size_nm) * 10.0);
}

Field2D apply_phase(const Field2D& i3, double phase_rad, double lambda_nm,
                    double pixel_size_nm) {
  const Field2D shifted =
      fractional_shift(i3, phase_displacement_px(phase_rad, lambda_nm, pixel_size_nm));
  Field2D out(i3.width(), i3.height(), i3.pixel_size_nm());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.8 * i3[i] + 0.2 * shifted[i];
  }
  return out;
}

Field2D apply_contrast(const Field2D& i4, double c) {
  Field2D out(i4.width(), i4.height(), i4.pixel_size_nm());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(i4[i] * c, 0.0, 1.0);
  }
  return out;
}

PhysicsVars PhysicsVars::record(ad::Tape& tape, const PhysicsParams& params,
                                bool requires_grad) {
  PhysicsVars v;
  const auto raw = params.raw();
  for (std::size_t k = 0; k < raw.size(); ++k) {
    v.theta[k] = tape.scalar(raw[k], requires_grad);
  }
  return v;
}

ForwardModel::ForwardModel(double pixel_size_nm, double lambda_nm,
                           int diffraction_size)
    : pixel_size_nm_(pixel_size_nm),
      lambda_nm_(lambda_nm),
      kernel_(std::make_shared<const Kernel2D>(
          diffraction_kernel(diffraction_size, pixel_size_nm, lambda_nm))) {}

Field2D ForwardModel::forward(const Field2D& mask, const PhysicsParams& params,
                              const StageFlags& flags) const {
  const EffectiveParams e = activate(params, pixel_size_nm_);
  Field2D i = mask;
  if (flags.diffraction) i = apply_diffraction(mask, e.d, *kernel_);
  if (flags.absorption) i = apply_absorption(i, mask, e.a);
  if (flags.blur) i = apply_blur(i, e.sigma_b_px);
  if (flags.phase) i = apply_phase(i, e.phase_rad, lambda_nm_, pixel_size_nm_);
  if (flags.contrast) i = apply_contrast(i, e.c);
  return i;
}

ad::Var ForwardModel::forward(ad::Tape& tape, ad::Var mask,
                              const PhysicsVars& params,
                              const StageFlags& flags) const {
  (void)tape;
  ad::Var i = mask;
  if (flags.diffraction) {
    const ad::Var d = ad::scale(ad::sigmoid(params.theta[0]), 0.5);
    i = ad::add(mask, ad::mul(ad::conv2d(mask, kernel_), d));
  }
  if (flags.absorption) {
    const ad::Var a = ad::scale(ad::sigmoid(params.theta[1]), 0.3);
    i = ad::mul(i, ad::affine(ad::mul(mask, a), -1.0, 1.0));
  }
  if (flags.blur) {
    const ad::Var sigma = ad::affine(ad::sigmoid(params.theta[2]), 3.0, 0.5);
    i = ad::gaussian_blur(i, sigma, kBlurPassthroughPx);
  }
  if (flags.phase) {
    const ad::Var phase = ad::scale(ad::tanh(params.theta[3]), 0.5);
    const ad::Var dx =
        ad::scale(phase, lambda_nm_ / (2.0 * std::numbers::pi * pixel_size_nm_) * 10.0);
    i = ad::add(ad::scale(i, 0.8), ad::scale(ad::fractional_shift(i, dx), 0.2));
  }
  if (flags.contrast) {
    const ad::Var c = ad::scale(ad::sigmoid(params.theta[4]), 2.0);
    i = ad::clamp01(ad::mul(i, c));
  }
  return i;
}

Field2D forward(const Field2D& mask, const PhysicsParams& params,
                const StageFlags& flags) {
  return ForwardModel(mask.pixel_size_nm()).forward(mask, params, flags);
}

}  // namespace euvilt
