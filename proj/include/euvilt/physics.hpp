#pragma once

#include <array>
#include <memory>
#include <string>

#include "euvilt/autodiff.hpp"
#include "euvilt/field.hpp"

namespace euvilt {

/// Gaussian blur is skipped at or below this sigma (pixels).
inline constexpr double kBlurPassthroughPx = 0.6;

/// Range bounds of the activated parameters.
struct ParamBounds {
  static constexpr double kDiffractionMax = 0.5;
  static constexpr double kAbsorptionMax = 0.3;
  static constexpr double kBlurMinPx = 0.5;
  static constexpr double kBlurMaxPx = 3.5;
  static constexpr double kPhaseMaxRad = 0.5;
  static constexpr double kContrastMax = 2.0;
};

/// The five unconstrained learnables.
struct PhysicsParams {
  double theta_d = 0.0;
  double theta_a = 0.0;
  double theta_b = 0.0;
  double theta_p = 0.0;
  double theta_c = 0.0;

  static constexpr std::array<const char*, 5> kNames = {
      "theta_d", "theta_a", "theta_b", "theta_p", "theta_c"};

  std::array<double*, 5> refs() {
    return {&theta_d, &theta_a, &theta_b, &theta_p, &theta_c};
  }
  std::array<double, 5> raw() const {
    return {theta_d, theta_a, theta_b, theta_p, theta_c};
  }
  static PhysicsParams from_raw(const std::array<double, 5>& raw) {
    return {raw[0], raw[1], raw[2], raw[3], raw[4]};
  }
};

/// Physically bounded values derived from PhysicsParams.
struct EffectiveParams {
  double d = 0.0;           // diffraction strength, (0, 0.5)
  double a = 0.0;           // absorption, (0, 0.3)
  double sigma_b_px = 0.0;  // blur sigma, (0.5, 3.5) px
  double phase_rad = 0.0;   // (-0.5, 0.5)
  double c = 0.0;           // contrast, (0, 2)
  double blur_nm = 0.0;     // sigma_b_px * pixel size, reporting only

  /// True when every value lies strictly inside its range.
  bool strictly_in_bounds() const;
};

EffectiveParams activate(const PhysicsParams& params,
                         double pixel_size_nm = kDefaultPixelSizeNm);

struct StageFlags {
  bool diffraction = true;
  bool absorption = true;
  bool blur = true;
  bool phase = true;
  bool contrast = true;

  static StageFlags all() { return {}; }
  static StageFlags none() { return {false, false, false, false, false}; }
  /// First `count` stages in pipeline order enabled (0..5).
  static StageFlags cumulative(int count);

  bool any() const { return diffraction || absorption || blur || phase || contrast; }
  std::string describe() const;
  friend bool operator==(const StageFlags&, const StageFlags&) = default;
};

// Individual stages on plain fields.
Field2D apply_diffraction(const Field2D& mask, double d, const Kernel2D& kernel);
Field2D apply_absorption(const Field2D& i1, const Field2D& mask, double a);
Field2D apply_blur(const Field2D& i2, double sigma_b_px);
/// Displacement in pixels produced by a phase of `phase_rad`.
double phase_displacement_px(double phase_rad,
                             double lambda_nm = kEuvWavelengthNm,
                             double pixel_size_nm = kDefaultPixelSizeNm);
Field2D apply_phase(const Field2D& i3, double phase_rad,
                    double lambda_nm = kEuvWavelengthNm,
                    double pixel_size_nm = kDefaultPixelSizeNm);
Field2D apply_contrast(const Field2D& i4, double c);

/// Raw parameters recorded as tape leaves.
struct PhysicsVars {
  std::array<ad::Var, 5> theta;

  static PhysicsVars record(ad::Tape& tape, const PhysicsParams& params,
                            bool requires_grad = true);
};

/// Five-stage forward model with its diffraction kernel precomputed.
class ForwardModel {
 public:
  explicit ForwardModel(double pixel_size_nm = kDefaultPixelSizeNm,
                        double lambda_nm = kEuvWavelengthNm,
                        int diffraction_size = 7);

  double pixel_size_nm() const { return pixel_size_nm_; }
  double lambda_nm() const { return lambda_nm_; }
  const Kernel2D& diffraction() const { return *kernel_; }

  /// Enabled stages in order diffraction, absorption, blur, phase, contrast.
  Field2D forward(const Field2D& mask, const PhysicsParams& params,
                  const StageFlags& flags) const;

  /// Same computation recorded on a tape; values match forward() exactly.
  ad::Var forward(ad::Tape& tape, ad::Var mask, const PhysicsVars& params,
                  const StageFlags& flags) const;

 private:
  double pixel_size_nm_;
  double lambda_nm_;
  std::shared_ptr<const Kernel2D> kernel_;
};

/// Convenience wrapper that builds a ForwardModel for the mask's pixel size.
Field2D forward(const Field2D& mask, const PhysicsParams& params,
                const StageFlags& flags);

}  // namespace euvilt
