#include "euvilt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "euvilt/errors.hpp"

namespace euvilt::ad {

namespace {

enum class Broadcast { kSame, kScalar, kChannel };

Broadcast classify(const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.channels == 1 && b.height == a.height && b.width == a.width) {
    return Broadcast::kChannel;
  }
  throw DimensionError("incompatible operand shapes");
}

// Index into b for element i of a under the given broadcast.
inline std::size_t bindex(Broadcast mode, std::size_t i, std::size_t plane) {
  switch (mode) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kChannel: return i % plane;
  }
  return i;
}

std::size_t plane_size(const Shape& s) {
  return static_cast<std::size_t>(s.height) * s.width;
}

void require_single_channel(const Tensor& t, const char* what) {
  if (t.shape.channels != 1) {
    throw DimensionError(std::string(what) + " expects a single-channel field");
  }
}

void require_scalar(const Tensor& t, const char* what) {
  if (t.size() != 1) {
    throw DimensionError(std::string(what) + " expects a scalar operand");
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAffine: return "affine";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kClamp01: return "clamp01";
    case OpKind::kAbs: return "abs";
    case OpKind::kSquare: return "square";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kGaussianBlur: return "gaussian_blur";
    case OpKind::kFractionalShift: return "fractional_shift";
    case OpKind::kGradientL1: return "gradient_l1";
    case OpKind::kConvLayer: return "conv_layer";
  }
  return "unknown";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor::Tensor(Shape s, std::vector<double> values)
    : shape(s), data(std::move(values)) {
  if (data.size() != shape.size()) {
    throw DimensionError("tensor value count does not match shape");
  }
}

Tensor Tensor::from_field(const Field2D& f) {
  return Tensor(Shape{1, f.height(), f.width()},
                std::vector<double>(f.values().begin(), f.values().end()));
}

Field2D Tensor::to_field(double pixel_size_nm) const {
  if (shape.channels != 1) {
    throw DimensionError("only single-channel tensors convert to fields");
  }
  return Field2D(shape.width, shape.height, pixel_size_nm, data);
}

double Tensor::item() const {
  if (data.size() != 1) throw ContractError("item() on a non-scalar tensor");
  return data[0];
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an empty Var");
  return tape_->value(index_);
}

std::span<const double> Var::grad() const {
  if (!tape_) throw ContractError("grad() on an empty Var");
  return tape_->grad(index_);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (consumed_) {
    throw ContractError("tape was consumed by backward(); call reset() first");
  }
  Node node;
  node.kind = OpKind::kLeaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
  if (consumed_) {
    throw ContractError("tape was consumed by backward(); call reset() first");
  }
  if (kind == OpKind::kLeaf) {
    throw ContractError("leaves are created with Tape::leaf");
  }
  std::vector<std::size_t> idx;
  idx.reserve(inputs.size());
  bool needs_grad = false;
  for (const Var& v : inputs) {
    if (v.tape() != this || v.index() >= nodes_.size()) {
      throw ContractError("operand is not recorded on this tape");
    }
    idx.push_back(v.index());
    needs_grad = needs_grad || nodes_[v.index()].requires_grad;
  }
  Node node;
  node.kind = kind;
  node.value = evaluate(kind, idx, attrs);
  node.inputs = std::move(idx);
  node.attrs = std::move(attrs);
  node.requires_grad = needs_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::evaluate(OpKind kind, std::span<const std::size_t> in,
                      const OpAttrs& attrs) const {
  auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      throw ContractError(std::string(op_name(kind)) + " expects " +
                          std::to_string(n) + " operand(s)");
    }
  };
  auto val = [&](std::size_t k) -> const Tensor& { return nodes_[in[k]].value; };

  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      arity(2);
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const Broadcast mode = classify(a.shape, b.shape);
      const std::size_t plane = plane_size(a.shape);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double bv = b.data[bindex(mode, i, plane)];
        if (kind == OpKind::kAdd) out.data[i] = a.data[i] + bv;
        else if (kind == OpKind::kSub) out.data[i] = a.data[i] - bv;
        else out.data[i] = a.data[i] * bv;
      }
      return out;
    }
    case OpKind::kScale:
    case OpKind::kAffine:
    case OpKind::kSigmoid:
    case OpKind::kTanh:
    case OpKind::kRelu:
    case OpKind::kClamp01:
    case OpKind::kAbs:
    case OpKind::kSquare: {
      arity(1);
      const Tensor& x = val(0);
      Tensor out(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        double r = 0.0;
        switch (kind) {
          case OpKind::kScale: r = attrs.a * v; break;
          case OpKind::kAffine: r = attrs.a * v + attrs.b; break;
          case OpKind::kSigmoid: r = sigmoid(v); break;
          case OpKind::kTanh: r = std::tanh(v); break;
          case OpKind::kRelu: r = v > 0.0 ? v : 0.0; break;
          case OpKind::kClamp01: r = std::clamp(v, 0.0, 1.0); break;
          case OpKind::kAbs: r = std::abs(v); break;
          case OpKind::kSquare: r = v * v; break;
          default: break;
        }
        out.data[i] = r;
      }
      return out;
    }
    case OpKind::kMean:
    case OpKind::kSum: {
      arity(1);
      const Tensor& x = val(0);
      double s = 0.0;
      for (double v : x.data) s += v;
      if (kind == OpKind::kMean) s /= static_cast<double>(x.size());
      return Tensor::scalar(s);
    }
    case OpKind::kConv2d: {
      arity(1);
      const Tensor& x = val(0);
      require_single_channel(x, "conv2d");
      if (!attrs.kernel) throw ContractError("conv2d needs a kernel");
      if (attrs.kernel->size() > std::min(x.shape.height, x.shape.width)) {
        throw DimensionError("conv2d kernel larger than field");
      }
      Tensor out(x.shape);
      raster::convolve(x.data, x.shape.width, x.shape.height, *attrs.kernel,
                       out.data);
      return out;
    }
    case OpKind::kGaussianBlur: {
      arity(2);
      const Tensor& x = val(0);
      require_single_channel(x, "gaussian_blur");
      require_scalar(val(1), "gaussian_blur sigma");
      const double sigma = val(1).data[0];
      if (sigma <= attrs.a) return x;
      const Kernel2D k = gaussian_kernel(sigma);
      Tensor out(x.shape);
      raster::convolve(x.data, x.shape.width, x.shape.height, k, out.data);
      return out;
    }
    case OpKind::kFractionalShift: {
      arity(2);
      const Tensor& x = val(0);
      require_single_channel(x, "fractional_shift");
      require_scalar(val(1), "fractional_shift dx");
      const double dx = val(1).data[0];
      if (!std::isfinite(dx) || std::abs(dx) >= x.shape.width) {
        throw ParameterError("shift must satisfy |dx| < width");
      }
      Tensor out(x.shape);
      raster::shift_x(x.data, x.shape.width, x.shape.height, dx, out.data);
      return out;
    }
    case OpKind::kGradientL1: {
      arity(1);
      const Tensor& x = val(0);
      require_single_channel(x, "gradient_l1");
      return Tensor::scalar(
          raster::gradient_l1(x.data, x.shape.width, x.shape.height));
    }
    case OpKind::kConvLayer: {
      arity(3);
      const Tensor& x = val(0);
      const Tensor& w = val(1);
      const Tensor& b = val(2);
      const int cin = x.shape.channels;
      const int cout = attrs.out_channels;
      const int kh = attrs.kernel_h;
      const int kw = attrs.kernel_w;
      if (cout <= 0 || kh <= 0 || kw <= 0 || kh % 2 == 0 || kw % 2 == 0) {
        throw DimensionError("conv_layer needs odd kernel dims and channels");
      }
      if (w.size() != static_cast<std::size_t>(cout) * cin * kh * kw ||
          b.size() != static_cast<std::size_t>(cout)) {
        throw DimensionError("conv_layer weight/bias size mismatch");
      }
      const int h = x.shape.height;
      const int wd = x.shape.width;
      const std::size_t plane = plane_size(x.shape);
      Tensor out(Shape{cout, h, wd});
      const int rh = kh / 2;
      const int rw = kw / 2;
      for (int o = 0; o < cout; ++o) {
        double* op = out.data.data() + o * plane;
        std::fill(op, op + plane, b.data[o]);
        for (int c = 0; c < cin; ++c) {
          const double* ip = x.data.data() + c * plane;
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              const double wv =
                  w.data[((static_cast<std::size_t>(o) * cin + c) * kh + i) * kw + j];
              if (wv == 0.0) continue;
              const int dy = i - rh;
              const int dx = j - rw;
              const int x0 = std::max(0, -dx);
              const int x1 = std::min(wd, wd - dx);
              for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                double* orow = op + static_cast<std::size_t>(y) * wd;
                const double* irow = ip + static_cast<std::size_t>(y + dy) * wd;
                for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx + dx];
              }
            }
          }
        }
      }
      return out;
    }
    case OpKind::kLeaf:
      break;
  }
  throw std::logic_error("internal error: unknown op kind");
}

std::vector<double>& Tape::grad_buffer(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::propagate(const Node& node) {
  const std::vector<double>& g = node.grad;
  auto needs = [&](std::size_t k) {
    return nodes_[node.inputs[k]].requires_grad;
  };
  auto in_val = [&](std::size_t k) -> const Tensor& {
    return nodes_[node.inputs[k]].value;
  };

  switch (node.kind) {
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      const Broadcast mode = classify(a.shape, b.shape);
      const std::size_t plane = plane_size(a.shape);
      if (needs(0)) {
        auto& ga = grad_buffer(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += node.kind == OpKind::kMul
                       ? g[i] * b.data[bindex(mode, i, plane)]
                       : g[i];
        }
      }
      if (needs(1)) {
        auto& gb = grad_buffer(node.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t j = bindex(mode, i, plane);
          if (node.kind == OpKind::kAdd) gb[j] += g[i];
          else if (node.kind == OpKind::kSub) gb[j] -= g[i];
          else gb[j] += g[i] * a.data[i];
        }
      }
      return;
    }
    case OpKind::kScale:
    case OpKind::kAffine:
    case OpKind::kSigmoid:
    case OpKind::kTanh:
    case OpKind::kRelu:
    case OpKind::kClamp01:
    case OpKind::kAbs:
    case OpKind::kSquare: {
      if (!needs(0)) return;
      const Tensor& x = in_val(0);
      const Tensor& y = node.value;
      auto& gx = grad_buffer(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0.0;
        switch (node.kind) {
          case OpKind::kScale:
          case OpKind::kAffine: d = node.attrs.a; break;
          case OpKind::kSigmoid: d = y.data[i] * (1.0 - y.data[i]); break;
          case OpKind::kTanh: d = 1.0 - y.data[i] * y.data[i]; break;
          case OpKind::kRelu: d = x.data[i] > 0.0 ? 1.0 : 0.0; break;
          case OpKind::kClamp01:
            d = (x.data[i] > 0.0 && x.data[i] < 1.0) ? 1.0 : 0.0;
            break;
          case OpKind::kAbs: d = sign(x.data[i]); break;
          case OpKind::kSquare: d = 2.0 * x.data[i]; break;
          default: break;
        }
        gx[i] += g[i] * d;
      }
      return;
    }
    case OpKind::kMean:
    case OpKind::kSum: {
      if (!needs(0)) return;
      auto& gx = grad_buffer(node.inputs[0]);
      const double s =
          node.kind == OpKind::kMean ? g[0] / static_cast<double>(gx.size()) : g[0];
      for (double& v : gx) v += s;
      return;
    }
    case OpKind::kConv2d: {
      if (!needs(0)) return;
      const Shape& s = in_val(0).shape;
      raster::convolve_adjoint(g, s.width, s.height, *node.attrs.kernel,
                               grad_buffer(node.inputs[0]));
      return;
    }
    case OpKind::kGaussianBlur: {
      const Tensor& x = in_val(0);
      const double sigma = in_val(1).data[0];
      const int w = x.shape.width;
      const int h = x.shape.height;
      if (sigma <= node.attrs.a) {
        if (needs(0)) {
          auto& gx = grad_buffer(node.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        return;  // inactive branch: no gradient to sigma
      }
      if (needs(0)) {
        raster::convolve_adjoint(g, w, h, gaussian_kernel(sigma),
                                 grad_buffer(node.inputs[0]));
      }
      if (needs(1)) {
        const std::vector<double> dk = gaussian_kernel_dsigma(sigma);
        std::vector<double> response(x.size());
        raster::convolve_weights(x.data, w, h, dk, 7, response);
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * response[i];
        grad_buffer(node.inputs[1])[0] += acc;
      }
      return;
    }
    case OpKind::kFractionalShift: {
      const Tensor& x = in_val(0);
      const double dx = in_val(1).data[0];
      if (needs(0)) {
        raster::shift_x_adjoint(g, x.shape.width, x.shape.height, dx,
                                grad_buffer(node.inputs[0]));
      }
      if (needs(1)) {
        grad_buffer(node.inputs[1])[0] +=
            raster::shift_x_ddx(x.data, g, x.shape.width, x.shape.height, dx);
      }
      return;
    }
    case OpKind::kGradientL1: {
      if (!needs(0)) return;
      const Tensor& x = in_val(0);
      raster::gradient_l1_adjoint(x.data, x.shape.width, x.shape.height, g[0],
                                  grad_buffer(node.inputs[0]));
      return;
    }
    case OpKind::kConvLayer: {
      const Tensor& x = in_val(0);
      const Tensor& w = in_val(1);
      const int cin = x.shape.channels;
      const int cout = node.attrs.out_channels;
      const int kh = node.attrs.kernel_h;
      const int kw = node.attrs.kernel_w;
      const int h = x.shape.height;
      const int wd = x.shape.width;
      const std::size_t plane = plane_size(x.shape);
      const int rh = kh / 2;
      const int rw = kw / 2;
      std::vector<double>* gx = needs(0) ? &grad_buffer(node.inputs[0]) : nullptr;
      std::vector<double>* gw = needs(1) ? &grad_buffer(node.inputs[1]) : nullptr;
      if (needs(2)) {
        auto& gb = grad_buffer(node.inputs[2]);
        for (int o = 0; o < cout; ++o) {
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += g[o * plane + p];
          gb[o] += s;
        }
      }
      if (!gx && !gw) return;
      for (int o = 0; o < cout; ++o) {
        const double* gp = g.data() + o * plane;
        for (int c = 0; c < cin; ++c) {
          const double* ip = x.data.data() + c * plane;
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              const std::size_t widx =
                  ((static_cast<std::size_t>(o) * cin + c) * kh + i) * kw + j;
              const double wv = w.data[widx];
              const int dy = i - rh;
              const int dx = j - rw;
              const int x0 = std::max(0, -dx);
              const int x1 = std::min(wd, wd - dx);
              double acc = 0.0;
              for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                const double* grow = gp + static_cast<std::size_t>(y) * wd;
                const std::size_t in_row = c * plane + static_cast<std::size_t>(y + dy) * wd;
                for (int xx = x0; xx < x1; ++xx) {
                  if (gw) acc += grow[xx] * ip[in_row - c * plane + xx + dx];
                  if (gx) (*gx)[in_row + xx + dx] += wv * grow[xx];
                }
              }
              if (gw) (*gw)[widx] += acc;
            }
          }
        }
      }
      return;
    }
    case OpKind::kLeaf:
      return;
  }
  throw std::logic_error("internal error: unknown op kind in backward");
}

void Tape::backward(Var loss) {
  if (loss.tape() != this || loss.index() >= nodes_.size()) {
    throw ContractError("loss is not recorded on this tape");
  }
  if (nodes_[loss.index()].value.size() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.index())[0] = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.kind == OpKind::kLeaf || !n.requires_grad || n.grad.empty()) continue;
    propagate(n);
  }
  // Parameters the loss never reached still get a zero gradient.
  for (Node& n : nodes_) {
    if (n.requires_grad && n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  }
  consumed_ = true;
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

namespace {

Var record_on(Var first, OpKind kind, std::initializer_list<Var> inputs,
              OpAttrs attrs = {}) {
  if (!first.valid()) throw ContractError("operand Var is empty");
  return first.tape()->record(kind, inputs, std::move(attrs));
}

}  // namespace

Var add(Var a, Var b) {
  if (a.value().size() < b.value().size()) std::swap(a, b);
  return record_on(a, OpKind::kAdd, {a, b});
}
Var sub(Var a, Var b) { return record_on(a, OpKind::kSub, {a, b}); }
Var mul(Var a, Var b) {
  if (a.value().size() < b.value().size()) std::swap(a, b);
  return record_on(a, OpKind::kMul, {a, b});
}
Var scale(Var x, double factor) {
  OpAttrs at;
  at.a = factor;
  return record_on(x, OpKind::kScale, {x}, at);
}
Var affine(Var x, double factor, double offset) {
  OpAttrs at;
  at.a = factor;
  at.b = offset;
  return record_on(x, OpKind::kAffine, {x}, at);
}
Var sigmoid(Var x) { return record_on(x, OpKind::kSigmoid, {x}); }
Var tanh(Var x) { return record_on(x, OpKind::kTanh, {x}); }
Var relu(Var x) { return record_on(x, OpKind::kRelu, {x}); }
Var clamp01(Var x) { return record_on(x, OpKind::kClamp01, {x}); }
Var abs(Var x) { return record_on(x, OpKind::kAbs, {x}); }
Var square(Var x) { return record_on(x, OpKind::kSquare, {x}); }
Var mean(Var x) { return record_on(x, OpKind::kMean, {x}); }
Var sum(Var x) { return record_on(x, OpKind::kSum, {x}); }
Var conv2d(Var field, std::shared_ptr<const Kernel2D> kernel) {
  OpAttrs at;
  at.kernel = std::move(kernel);
  return record_on(field, OpKind::kConv2d, {field}, at);
}
Var gaussian_blur(Var field, Var sigma_px, double passthrough_threshold) {
  OpAttrs at;
  at.a = passthrough_threshold;
  return record_on(field, OpKind::kGaussianBlur, {field, sigma_px}, at);
}
Var fractional_shift(Var field, Var dx_px) {
  return record_on(field, OpKind::kFractionalShift, {field, dx_px});
}
Var gradient_l1(Var field) {
  return record_on(field, OpKind::kGradientL1, {field});
}
Var conv_layer(Var x, Var weights, Var bias, int out_channels, int kernel_h,
               int kernel_w) {
  OpAttrs at;
  at.out_channels = out_channels;
  at.kernel_h = kernel_h;
  at.kernel_w = kernel_w;
  return record_on(x, OpKind::kConvLayer, {x, weights, bias}, at);
}

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({1e-8, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradReport> check_gradients(const std::function<double()>& loss_fn,
                                        std::span<const ParamProbe> probes,
                                        double h) {
  std::vector<GradReport> reports;
  reports.reserve(probes.size());
  for (const ParamProbe& p : probes) {
    const double saved = *p.value;
    *p.value = saved + h;
    const double up = loss_fn();
    *p.value = saved - h;
    const double down = loss_fn();
    *p.value = saved;
    const double numeric = (up - down) / (2.0 * h);
    reports.push_back(
        {p.name, p.analytic, numeric, relative_error(p.analytic, numeric)});
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const GradReport& a, const GradReport& b) {
                     return a.rel_err > b.rel_err;
                   });
  return reports;
}

void write_grad_reports_csv(std::span<const GradReport> reports,
                            const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "param,analytic,numeric,rel_err\n";
  char buf[160];
  for (const GradReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", r.analytic, r.numeric,
                  r.rel_err);
    os << r.param << "," << buf << "\n";
  }
}

}  // namespace euvilt::ad
