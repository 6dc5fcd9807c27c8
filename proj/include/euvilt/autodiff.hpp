#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "euvilt/field.hpp"

// Reverse-mode differentiation over the fixed primitive set used by the
// forward model, the losses, and the small CNN generator. Forward values are
// computed eagerly when a node is recorded; backward() walks the tape in
// reverse recording order.
namespace euvilt::ad {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }
  static Tensor from_field(const Field2D& f);
  Field2D to_field(double pixel_size_nm = kDefaultPixelSizeNm) const;

  std::size_t size() const { return data.size(); }
  double item() const;
};

enum class OpKind {
  kLeaf,
  kAdd,        // a + b, b may broadcast (scalar or single channel)
  kSub,        // a - b, same broadcasting
  kMul,        // a * b, same broadcasting
  kScale,      // attrs.a * x
  kAffine,     // attrs.a * x + attrs.b
  kSigmoid,
  kTanh,
  kRelu,
  kClamp01,    // clamp(x, 0, 1); subgradient 0 on and outside the bounds
  kAbs,
  kSquare,
  kMean,
  kSum,
  kConv2d,         // single-channel, fixed kernel, reflect boundary
  kGaussianBlur,   // inputs (field, sigma); identity when sigma <= attrs.a
  kFractionalShift,  // inputs (field, dx)
  kGradientL1,
  kConvLayer,  // inputs (x, weights, bias); zero-padded multi-channel conv
};

const char* op_name(OpKind kind);

struct OpAttrs {
  double a = 0.0;
  double b = 0.0;
  std::shared_ptr<const Kernel2D> kernel;
  // kConvLayer geometry.
  int out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
};

class Tape;

/// Handle to a recorded node.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Adjoint after backward(); empty when the node needs no gradient.
  std::span<const double> grad() const;
  double item() const { return value().item(); }
  std::size_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var scalar(double v, bool requires_grad = true) {
    return leaf(Tensor::scalar(v), requires_grad);
  }

  Var record(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});
  Var record(OpKind kind, std::initializer_list<Var> inputs,
             OpAttrs attrs = {}) {
    return record(kind, std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(attrs));
  }

  /// Populates adjoints of every node reachable from `loss`, which must be a
  /// scalar. May be repeated; recording afterwards requires reset().
  void backward(Var loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  const Tensor& value(std::size_t index) const { return nodes_[index].value; }
  std::span<const double> grad(std::size_t index) const {
    return nodes_[index].grad;
  }

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  Tensor evaluate(OpKind kind, std::span<const std::size_t> inputs,
                  const OpAttrs& attrs) const;
  void propagate(const Node& node);
  std::vector<double>& grad_buffer(std::size_t index);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Typed builders over Tape::record.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var affine(Var x, double factor, double offset);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var clamp01(Var x);
Var abs(Var x);
Var square(Var x);
Var mean(Var x);
Var sum(Var x);
Var conv2d(Var field, std::shared_ptr<const Kernel2D> kernel);
Var gaussian_blur(Var field, Var sigma_px, double passthrough_threshold);
Var fractional_shift(Var field, Var dx_px);
Var gradient_l1(Var field);
Var conv_layer(Var x, Var weights, Var bias, int out_channels, int kernel_h,
               int kernel_w);

double sigmoid(double x);

// Finite-difference checking.

struct GradReport {
  std::string param;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

/// |a - n| / max(1e-8, |a|, |n|)
double relative_error(double analytic, double numeric);

/// A scalar the loss depends on, with its analytic gradient.
struct ParamProbe {
  std::string name;
  double* value;
  double analytic;
};

/// Central differences (f(p + h) - f(p - h)) / 2h for every probe, restoring
/// each value afterwards. Sorted by relative error, largest first.
std::vector<GradReport> check_gradients(const std::function<double()>& loss_fn,
                                        std::span<const ParamProbe> probes,
                                        double h = 1e-4);

void write_grad_reports_csv(std::span<const GradReport> reports,
                            const std::filesystem::path& path);

}  // namespace euvilt::ad
