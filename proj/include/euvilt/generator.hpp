#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "euvilt/autodiff.hpp"
#include "euvilt/field.hpp"

namespace euvilt {

enum class GeneratorMode { kPixelDirect, kMiniCnn };

std::string_view generator_mode_name(GeneratorMode mode);
/// "pixel_direct" or "mini_cnn"; throws ConfigError otherwise.
GeneratorMode parse_generator_mode(std::string_view name);

/// Logit clamp used for the inverse-sigmoid warm start.
inline constexpr double kWarmStartLo = 0.01;
inline constexpr double kWarmStartHi = 0.99;

double logit(double p);

/// Per-pixel logits; the mask is their sigmoid.
struct PixelMaskParams {
  int width = 0;
  int height = 0;
  std::vector<double> logits;

  static PixelMaskParams zeros(int width, int height);
  /// logit(clamp(T, 0.01, 0.99)) per pixel.
  static PixelMaskParams from_target(const Field2D& target);
  bool initialized() const {
    return width > 0 && height > 0 &&
           logits.size() == static_cast<std::size_t>(width) * height;
  }
};

Field2D pixel_mask(const PixelMaskParams& params,
                   double pixel_size_nm = kDefaultPixelSizeNm);

/// Weights (out, in, kh, kw) row-major plus one bias per output channel.
struct ConvWeights {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ConvWeights zeros(int in, int out, int kh, int kw);
};

/// Encoder 1-16-32-64 (9x7, 5x5, 3x3), dual attention, decoder 64-32-16-1.
struct MiniGeneratorParams {
  ConvWeights enc1, enc2, enc3;
  ConvWeights att_channel;  // 1x1, 64 -> 64
  ConvWeights att_spatial;  // 3x3, 64 -> 1
  ConvWeights dec1, dec2, dec3;

  static MiniGeneratorParams zeros();
  /// Every weight and bias uniform in [-scale, scale].
  static MiniGeneratorParams random(std::uint64_t seed, double scale = 0.05);

  std::vector<ConvWeights*> layers();
  std::vector<const ConvWeights*> layers() const;
};

/// X * sigmoid(conv1x1(X)) * sigmoid(conv3x3(X)), the spatial gate broadcast
/// over channels.
ad::Var dual_attention(ad::Var x, ad::Var w_channel, ad::Var b_channel,
                       ad::Var w_spatial, ad::Var b_spatial, int channels);
ad::Tensor dual_attention(const ad::Tensor& x, const ConvWeights& channel,
                          const ConvWeights& spatial);

/// Mask parameterization with its learnables stored as flat blocks, in the
/// order they are recorded on the tape.
class Generator {
 public:
  static Generator pixel_direct(const Field2D& target);
  static Generator pixel_direct(PixelMaskParams params);
  static Generator mini_cnn(MiniGeneratorParams params);

  GeneratorMode mode() const { return mode_; }

  struct Recorded {
    ad::Var mask;
    std::vector<ad::Var> params;  // one leaf per block
  };
  Recorded record(ad::Tape& tape, const Field2D& target,
                  bool requires_grad = true) const;

  /// Mask for `target`; pixel_direct ignores the target.
  Field2D generate(const Field2D& target) const;

  std::vector<std::vector<double>>& blocks() { return blocks_; }
  const std::vector<std::vector<double>>& blocks() const { return blocks_; }
  std::size_t parameter_count() const;

  PixelMaskParams pixel_params() const;
  MiniGeneratorParams cnn_params() const;

 private:
  Generator() = default;

  GeneratorMode mode_ = GeneratorMode::kPixelDirect;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<double>> blocks_;
  // Geometry of each conv layer for mini_cnn (weights block, bias block).
  std::vector<ConvWeights> layout_;
};

}  // namespace euvilt
