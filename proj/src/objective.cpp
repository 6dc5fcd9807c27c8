#include "euvilt/objective.hpp"

#include <cmath>

#include "euvilt/errors.hpp"

namespace euvilt {

EdgeLossMode parse_edge_loss_mode(const std::string& name) {
  if (name == "mag_diff") return EdgeLossMode::kMagDiff;
  if (name == "grad_diff") return EdgeLossMode::kGradDiff;
  throw ConfigError("unknown edge_loss_mode '" + name + "'");
}

const char* edge_loss_mode_name(EdgeLossMode mode) {
  return mode == EdgeLossMode::kMagDiff ? "mag_diff" : "grad_diff";
}

double combine_losses(const LossWeights& w, double recon, double edge,
                      double reg) {
  return w.alpha * recon + w.beta * edge + w.gamma * reg;
}

double recon_loss(const Field2D& image, const Field2D& target) {
  if (!image.same_shape(target)) {
    throw DimensionError("recon_loss: shapes differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double d = image[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(image.size());
}

double edge_loss(const Field2D& image, const Field2D& target,
                 EdgeLossMode mode) {
  if (!image.same_shape(target)) {
    throw DimensionError("edge_loss: shapes differ");
  }
  if (mode == EdgeLossMode::kMagDiff) {
    return std::abs(gradient_l1(image) - gradient_l1(target));
  }
  Field2D diff(image.width(), image.height(), image.pixel_size_nm());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = image[i] - target[i];
  return gradient_l1(diff);
}

double physics_reg(const PhysicsParams& params, double reg_scale) {
  double sum = 0.0;
  for (double v : params.raw()) sum += std::abs(v);
  return reg_scale * sum;
}

LossBreakdown total_loss(const Field2D& image, const Field2D& target,
                         const PhysicsParams& params, const LossWeights& weights,
                         EdgeLossMode mode) {
  LossBreakdown b;
  b.recon = recon_loss(image, target);
  b.edge = edge_loss(image, target, mode);
  b.physics_reg = physics_reg(params, weights.reg_scale);
  b.total = combine_losses(weights, b.recon, b.edge, b.physics_reg);
  return b;
}

LossVars total_loss(ad::Var image, ad::Var target, const PhysicsVars& params,
                    const LossWeights& weights, EdgeLossMode mode) {
  if (image.value().shape != target.value().shape) {
    throw DimensionError("total_loss: shapes differ");
  }
  LossVars v;
  v.recon = ad::mean(ad::square(ad::sub(image, target)));
  if (mode == EdgeLossMode::kMagDiff) {
    v.edge = ad::abs(ad::sub(ad::gradient_l1(image), ad::gradient_l1(target)));
  } else {
    v.edge = ad::gradient_l1(ad::sub(image, target));
  }
  ad::Var abs_sum = ad::abs(params.theta[0]);
  for (std::size_t k = 1; k < params.theta.size(); ++k) {
    abs_sum = ad::add(abs_sum, ad::abs(params.theta[k]));
  }
  v.physics_reg = ad::scale(abs_sum, weights.reg_scale);
  v.total = ad::add(ad::add(ad::scale(v.recon, weights.alpha),
                            ad::scale(v.edge, weights.beta)),
                    ad::scale(v.physics_reg, weights.gamma));
  return v;
}

}  // namespace euvilt
