#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "euvilt/autodiff.hpp"
#include "euvilt/generator.hpp"
#include "euvilt/metrology.hpp"
#include "euvilt/objective.hpp"
#include "euvilt/patterns.hpp"
#include "euvilt/physics.hpp"

namespace euvilt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws NumericalError naming the
/// first non-finite gradient; nothing is modified in that case.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr,
               const AdamConfig& config = {});

/// How pixel_direct logits relate to the dataset samples.
enum class MaskSharing {
  kShared,     // one logit field for every sample, warm-started from sample 0
  kPerSample,  // one logit field per sample, each warm-started from its target
};

std::string_view mask_sharing_name(MaskSharing s);
MaskSharing parse_mask_sharing(std::string_view name);

struct TrainConfig {
  int epochs = 500;
  double lr_generator = 1e-4;
  double lr_physics = 1e-2;
  std::uint64_t seed = 7;
  StageFlags stages;
  LossWeights weights;
  EdgeLossMode edge_mode = EdgeLossMode::kMagDiff;
  /// 0 selects default_dataset_size(seed).
  int dataset_size = 0;
  GeneratorMode generator = GeneratorMode::kPixelDirect;
  MaskSharing mask_sharing = MaskSharing::kPerSample;
  PhysicsParams init_physics;
  AdamConfig adam;
  GridSpec grid;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;  // sample means
  double epe_nm = 0.0;
  EffectiveParams effective;
  PhysicsParams raw;
  double seconds = 0.0;
};

struct Checkpoint {
  int epoch = -1;
  double epe_nm = 0.0;
  PhysicsParams params;
  Field2D mask{1, 1};
  Field2D aerial{1, 1};
};

struct TrainResult {
  PatternKind kind = PatternKind::kEuvLineSpace;
  int dataset_size = 0;
  Field2D target{1, 1};
  double initial_epe_nm = 0.0;
  std::vector<EpochRecord> history;
  Checkpoint best;
  Checkpoint final;
  bool aborted = false;
  std::string abort_reason;

  double final_epe_nm() const { return final.epe_nm; }
  double best_epe_nm() const { return best.epe_nm; }
};

/// Reference line used for the summary improvement figure (nm).
inline constexpr double kBaselineEpeNm = 4.5;
/// (baseline - final) / baseline * 100.
double improvement_vs_baseline_pct(double final_epe_nm,
                                   double baseline_nm = kBaselineEpeNm);

/// Threshold mode used to score a stage set: fixed 0.5 when the contrast
/// stage clamps the image into [0, 1], half-max otherwise.
ThresholdMode threshold_mode_for(const StageFlags& stages);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(PatternKind kind, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
/// Trains on an explicit dataset; sample 0 is the evaluation template.
TrainResult train(PatternKind kind, const std::vector<Sample>& dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct AblationRow {
  std::string label;
  StageFlags stages;
  double final_epe_nm = 0.0;
  double best_epe_nm = 0.0;
  double improvement_pct = 0.0;  // vs the no_physics row
  EffectiveParams effective;
  Field2D aerial{1, 1};
  bool aborted = false;
};

inline constexpr std::array<const char*, 6> kAblationLabels = {
    "no_physics", "+diffraction", "+absorption", "+blur", "+phase", "full_physics"};

/// Independent trainings with cumulative stage sets. `stage_counts` selects
/// rows by number of enabled stages (default 0..5).
std::vector<AblationRow> ablate(PatternKind kind, const TrainConfig& config,
                                std::vector<int> stage_counts = {0, 1, 2, 3, 4, 5});

/// Central-difference check of the full pipeline loss on a random
/// `size` x `size` mask: every raw theta plus `n_logits` sampled mask logits.
std::vector<ad::GradReport> pipeline_gradient_check(int size, std::uint64_t seed,
                                                    int n_logits = 64,
                                                    double h = 1e-4);

}  // namespace euvilt
