#include "euvilt/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "euvilt/errors.hpp"

namespace euvilt {

std::string_view generator_mode_name(GeneratorMode mode) {
  return mode == GeneratorMode::kPixelDirect ? "pixel_direct" : "mini_cnn";
}

GeneratorMode parse_generator_mode(std::string_view name) {
  if (name == "pixel_direct") return GeneratorMode::kPixelDirect;
  if (name == "mini_cnn") return GeneratorMode::kMiniCnn;
  throw ConfigError("unknown generator mode: " + std::string(name));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

PixelMaskParams PixelMaskParams::zeros(int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("mask size must be positive");
  return {width, height,
          std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
}

PixelMaskParams PixelMaskParams::from_target(const Field2D& target) {
  PixelMaskParams p = zeros(target.width(), target.height());
  for (std::size_t i = 0; i < target.size(); ++i) {
    p.logits[i] = logit(std::clamp(target[i], kWarmStartLo, kWarmStartHi));
  }
  return p;
}

Field2D pixel_mask(const PixelMaskParams& params, double pixel_size_nm) {
  if (!params.initialized()) throw ContractError("pixel mask params not initialized");
  Field2D m(params.width, params.height, pixel_size_nm);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = ad::sigmoid(params.logits[i]);
  return m;
}

ConvWeights ConvWeights::zeros(int in, int out, int kh, int kw) {
  ConvWeights c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel_h = kh;
  c.kernel_w = kw;
  c.weights.assign(static_cast<std::size_t>(out) * in * kh * kw, 0.0);
  c.bias.assign(static_cast<std::size_t>(out), 0.0);
  return c;
}

MiniGeneratorParams MiniGeneratorParams::zeros() {
  MiniGeneratorParams p;
  p.enc1 = ConvWeights::zeros(1, 16, 9, 7);
  p.enc2 = ConvWeights::zeros(16, 32, 5, 5);
  p.enc3 = ConvWeights::zeros(32, 64, 3, 3);
  p.att_channel = ConvWeights::zeros(64, 64, 1, 1);
  p.att_spatial = ConvWeights::zeros(64, 1, 3, 3);
  p.dec1 = ConvWeights::zeros(64, 32, 3, 3);
  p.dec2 = ConvWeights::zeros(32, 16, 3, 3);
  p.dec3 = ConvWeights::zeros(16, 1, 3, 3);
  return p;
}

MiniGeneratorParams MiniGeneratorParams::random(std::uint64_t seed, double scale) {
  MiniGeneratorParams p = zeros();
  std::mt19937_64 rng(seed);
  auto draw = [&] {
    return scale * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
  };
  for (ConvWeights* c : p.layers()) {
    for (double& w : c->weights) w = draw();
    for (double& b : c->bias) b = draw();
  }
  return p;
}

std::vector<ConvWeights*> MiniGeneratorParams::layers() {
  return {&enc1, &enc2, &enc3, &att_channel, &att_spatial, &dec1, &dec2, &dec3};
}

std::vector<const ConvWeights*> MiniGeneratorParams::layers() const {
  return {&enc1, &enc2, &enc3, &att_channel, &att_spatial, &dec1, &dec2, &dec3};
}

ad::Var dual_attention(ad::Var x, ad::Var w_channel, ad::Var b_channel,
                       ad::Var w_spatial, ad::Var b_spatial, int channels) {
  const ad::Var gate_c = ad::sigmoid(ad::conv_layer(x, w_channel, b_channel, channels, 1, 1));
  const ad::Var gate_s = ad::sigmoid(ad::conv_layer(x, w_spatial, b_spatial, 1, 3, 3));
  return ad::mul(ad::mul(x, gate_c), gate_s);
}

ad::Tensor dual_attention(const ad::Tensor& x, const ConvWeights& channel,
                          const ConvWeights& spatial) {
  const int c = x.shape.channels;
  if (c < 1) throw DimensionError("dual attention needs at least one channel");
  if (channel.in_channels != c || channel.out_channels != c ||
      channel.kernel_h != 1 || channel.kernel_w != 1 || spatial.in_channels != c ||
      spatial.out_channels != 1 || spatial.kernel_h != 3 || spatial.kernel_w != 3) {
    throw DimensionError("dual attention weights do not match the input");
  }
  ad::Tape tape;
  auto leaf = [&](ad::Shape s, const std::vector<double>& v) {
    return tape.constant(ad::Tensor(s, v));
  };
  const ad::Var xv = tape.constant(x);
  const ad::Var y = dual_attention(
      xv, leaf({1, 1, static_cast<int>(channel.weights.size())}, channel.weights),
      leaf({1, 1, c}, channel.bias),
      leaf({1, 1, static_cast<int>(spatial.weights.size())}, spatial.weights),
      leaf({1, 1, 1}, spatial.bias), c);
  return y.value();
}

Generator Generator::pixel_direct(const Field2D& target) {
  return pixel_direct(PixelMaskParams::from_target(target));
}

Generator Generator::pixel_direct(PixelMaskParams params) {
  if (!params.initialized()) throw ContractError("pixel mask params not initialized");
  Generator g;
  g.mode_ = GeneratorMode::kPixelDirect;
  g.width_ = params.width;
  g.height_ = params.height;
  g.blocks_.push_back(std::move(params.logits));
  return g;
}

Generator Generator::mini_cnn(MiniGeneratorParams params) {
  Generator g;
  g.mode_ = GeneratorMode::kMiniCnn;
  for (ConvWeights* c : params.layers()) {
    const std::size_t expect = static_cast<std::size_t>(c->out_channels) *
                               c->in_channels * c->kernel_h * c->kernel_w;
    if (c->weights.size() != expect ||
        c->bias.size() != static_cast<std::size_t>(c->out_channels)) {
      throw ContractError("mini_cnn params not initialized");
    }
    ConvWeights shape = *c;
    shape.weights.clear();
    shape.bias.clear();
    g.layout_.push_back(std::move(shape));
    g.blocks_.push_back(std::move(c->weights));
    g.blocks_.push_back(std::move(c->bias));
  }
  return g;
}

std::size_t Generator::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.size();
  return n;
}

Generator::Recorded Generator::record(ad::Tape& tape, const Field2D& target,
                                      bool requires_grad) const {
  Recorded rec;
  if (mode_ == GeneratorMode::kPixelDirect) {
    if (target.width() != width_ || target.height() != height_) {
      throw DimensionError("target size differs from the pixel mask");
    }
    const ad::Var logits =
        tape.leaf(ad::Tensor(ad::Shape{1, height_, width_}, blocks_[0]), requires_grad);
    rec.params.push_back(logits);
    rec.mask = ad::sigmoid(logits);
    return rec;
  }

  for (const auto& b : blocks_) {
    rec.params.push_back(tape.leaf(
        ad::Tensor(ad::Shape{1, 1, static_cast<int>(b.size())}, b), requires_grad));
  }
  auto conv = [&](ad::Var x, int layer) {
    const ConvWeights& l = layout_[static_cast<std::size_t>(layer)];
    return ad::conv_layer(x, rec.params[2 * layer], rec.params[2 * layer + 1],
                          l.out_channels, l.kernel_h, l.kernel_w);
  };
  ad::Var x = tape.constant(ad::Tensor::from_field(target));
  x = ad::relu(conv(x, 0));
  x = ad::relu(conv(x, 1));
  x = ad::relu(conv(x, 2));
  x = dual_attention(x, rec.params[6], rec.params[7], rec.params[8], rec.params[9],
                     layout_[3].out_channels);
  x = ad::relu(conv(x, 5));
  x = ad::relu(conv(x, 6));
  rec.mask = ad::sigmoid(conv(x, 7));
  return rec;
}

Field2D Generator::generate(const Field2D& target) const {
  if (mode_ == GeneratorMode::kPixelDirect) {
    return pixel_mask(pixel_params(), target.pixel_size_nm());
  }
  ad::Tape tape;
  return record(tape, target, false).mask.value().to_field(target.pixel_size_nm());
}

PixelMaskParams Generator::pixel_params() const {
  if (mode_ != GeneratorMode::kPixelDirect) {
    throw ContractError("generator is not pixel_direct");
  }
  return {width_, height_, blocks_[0]};
}

MiniGeneratorParams Generator::cnn_params() const {
  if (mode_ != GeneratorMode::kMiniCnn) throw ContractError("generator is not mini_cnn");
  MiniGeneratorParams p;
  auto layers = p.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    *layers[k] = layout_[k];
    layers[k]->weights = blocks_[2 * k];
    layers[k]->bias = blocks_[2 * k + 1];
  }
  return p;
}

}  // namespace euvilt
