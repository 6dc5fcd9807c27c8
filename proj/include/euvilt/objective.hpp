#pragma once

#include <string>

#include "euvilt/autodiff.hpp"
#include "euvilt/field.hpp"
#include "euvilt/physics.hpp"

namespace euvilt {

struct LossWeights {
  double alpha = 0.7;       // reconstruction
  double beta = 0.25;       // edge
  double gamma = 0.05;      // physics regularizer
  double reg_scale = 0.01;  // inner factor of the regularizer
};

/// kMagDiff: |gradient_l1(I) - gradient_l1(T)|.
/// kGradDiff: gradient_l1(I - T), which penalizes misplaced edges directly.
enum class EdgeLossMode { kMagDiff, kGradDiff };

EdgeLossMode parse_edge_loss_mode(const std::string& name);
const char* edge_loss_mode_name(EdgeLossMode mode);

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double edge = 0.0;
  double physics_reg = 0.0;
};

/// alpha * recon + beta * edge + gamma * reg, always in that order.
double combine_losses(const LossWeights& w, double recon, double edge,
                      double reg);

double recon_loss(const Field2D& image, const Field2D& target);
double edge_loss(const Field2D& image, const Field2D& target,
                 EdgeLossMode mode = EdgeLossMode::kMagDiff);
double physics_reg(const PhysicsParams& params, double reg_scale = 0.01);
LossBreakdown total_loss(const Field2D& image, const Field2D& target,
                         const PhysicsParams& params,
                         const LossWeights& weights = {},
                         EdgeLossMode mode = EdgeLossMode::kMagDiff);

/// Taped counterparts; `target` is normally a constant leaf.
struct LossVars {
  ad::Var total;
  ad::Var recon;
  ad::Var edge;
  ad::Var physics_reg;

  LossBreakdown values() const {
    return {total.item(), recon.item(), edge.item(), physics_reg.item()};
  }
};

LossVars total_loss(ad::Var image, ad::Var target, const PhysicsVars& params,
                    const LossWeights& weights = {},
                    EdgeLossMode mode = EdgeLossMode::kMagDiff);

}  // namespace euvilt
