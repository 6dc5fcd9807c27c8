#include "euvilt/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "euvilt/errors.hpp"

namespace euvilt {

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr, const AdamConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("non-finite gradient at parameter index " + std::to_string(i));
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

std::string_view mask_sharing_name(MaskSharing s) {
  return s == MaskSharing::kShared ? "shared" : "per_sample";
}

MaskSharing parse_mask_sharing(std::string_view name) {
  if (name == "shared") return MaskSharing::kShared;
  if (name == "per_sample") return MaskSharing::kPerSample;
  throw ConfigError("unknown mask sharing: " + std::string(name));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(lr_generator >= 0.0) || !(lr_physics >= 0.0)) {
    throw ConfigError("learning rates must be non-negative");
  }
  if (dataset_size < 0 || dataset_size > 1000) {
    throw ConfigError("dataset_size must be in [1, 1000] (0 for default)");
  }
  if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0 ||
      weights.reg_scale < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 &&
        adam.beta2 < 1.0 && adam.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

double improvement_vs_baseline_pct(double final_epe_nm, double baseline_nm) {
  return (baseline_nm - final_epe_nm) / baseline_nm * 100.0;
}

ThresholdMode threshold_mode_for(const StageFlags& stages) {
  return stages.contrast ? ThresholdMode::kFixedHalf : ThresholdMode::kHalfMax;
}

namespace {

// Mask parameters plus their optimizer state.
struct MaskSlot {
  Generator gen;
  std::vector<AdamState> adam;
};

MaskSlot make_slot(Generator gen) {
  MaskSlot s{std::move(gen), {}};
  for (const auto& b : s.gen.blocks()) s.adam.emplace_back(b.size());
  return s;
}

class Trainer {
 public:
  Trainer(PatternKind kind, const std::vector<Sample>& data, const TrainConfig& cfg)
      : kind_(kind),
        data_(data),
        cfg_(cfg),
        model_(data.front().field.pixel_size_nm()),
        params_(cfg.init_physics),
        physics_adam_(5),
        epe_cfg_(epe_config_for(kind)) {
    epe_cfg_.threshold_mode = threshold_mode_for(cfg.stages);
    if (cfg.generator == GeneratorMode::kMiniCnn) {
      slots_.push_back(make_slot(Generator::mini_cnn(MiniGeneratorParams::random(cfg.seed))));
    } else if (cfg.mask_sharing == MaskSharing::kShared) {
      slots_.push_back(make_slot(Generator::pixel_direct(data.front().field)));
    } else {
      for (const auto& s : data) slots_.push_back(make_slot(Generator::pixel_direct(s.field)));
    }
  }

  TrainResult run(const EpochCallback& on_epoch) {
    TrainResult res;
    res.kind = kind_;
    res.dataset_size = static_cast<int>(data_.size());
    res.target = data_.front().field;
    Checkpoint last = snapshot(-1);
    res.initial_epe_nm = last.epe_nm;
    res.best = last;
    res.final = last;

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      LossBreakdown sum;
      try {
        for (std::size_t k = 0; k < data_.size(); ++k) {
          const LossBreakdown l = step(k);
          sum.total += l.total;
          sum.recon += l.recon;
          sum.edge += l.edge;
          sum.physics_reg += l.physics_reg;
        }
      } catch (const NumericalError& e) {
        // res.final still holds the last good checkpoint.
        res.aborted = true;
        res.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        break;
      }
      const double n = static_cast<double>(data_.size());
      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = {sum.total / n, sum.recon / n, sum.edge / n, sum.physics_reg / n};
      last = snapshot(epoch);
      rec.epe_nm = last.epe_nm;
      rec.raw = params_;
      rec.effective = activate(params_, model_.pixel_size_nm());
      if (!rec.effective.strictly_in_bounds()) {
        res.aborted = true;
        res.abort_reason = "effective parameters left their ranges";
        break;
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.history.push_back(rec);
      if (last.epe_nm < res.best.epe_nm || res.best.epoch < 0) res.best = last;
      res.final = last;
      if (on_epoch) on_epoch(rec);
    }
    if (res.best.epoch < 0) res.best = res.final;
    return res;
  }

 private:
  MaskSlot& slot_for(std::size_t k) { return slots_.size() == 1 ? slots_[0] : slots_[k]; }

  LossBreakdown step(std::size_t k) {
    MaskSlot& slot = slot_for(k);
    const Field2D& target = data_[k].field;
    ad::Tape tape;
    const Generator::Recorded rec = slot.gen.record(tape, target, cfg_.lr_generator > 0.0);
    const PhysicsVars pv = PhysicsVars::record(tape, params_);
    const ad::Var image = model_.forward(tape, rec.mask, pv, cfg_.stages);
    const ad::Var tgt = tape.constant(ad::Tensor::from_field(target));
    const LossVars lv = total_loss(image, tgt, pv, cfg_.weights, cfg_.edge_mode);
    const LossBreakdown values = lv.values();
    if (!std::isfinite(values.total)) throw NumericalError("non-finite loss");
    tape.backward(lv.total);

    std::array<double, 5> g{};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto gi = pv.theta[i].grad();
      g[i] = gi.empty() ? 0.0 : gi[0];
    }
    // Validate everything before touching any parameter.
    for (std::size_t i = 0; i < 5; ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericalError(std::string("non-finite gradient for ") +
                             PhysicsParams::kNames[i]);
      }
    }
    if (cfg_.lr_generator > 0.0) {
      for (std::size_t b = 0; b < rec.params.size(); ++b) {
        for (double v : rec.params[b].grad()) {
          if (!std::isfinite(v)) {
            throw NumericalError("non-finite generator gradient in block " + std::to_string(b));
          }
        }
      }
      for (std::size_t b = 0; b < rec.params.size(); ++b) {
        adam_step(slot.adam[b], slot.gen.blocks()[b], rec.params[b].grad(),
                  cfg_.lr_generator, cfg_.adam);
      }
    }
    auto raw = params_.raw();
    adam_step(physics_adam_, raw, g, cfg_.lr_physics, cfg_.adam);
    params_ = PhysicsParams::from_raw(raw);
    return values;
  }

  Checkpoint snapshot(int epoch) const {
    Checkpoint c;
    c.epoch = epoch;
    c.params = params_;
    const Field2D& target = data_.front().field;
    c.mask = slots_.front().gen.generate(target);
    c.aerial = model_.forward(c.mask, params_, cfg_.stages);
    c.epe_nm = epe(c.aerial, target, epe_cfg_).epe_nm;
    return c;
  }

  PatternKind kind_;
  const std::vector<Sample>& data_;
  TrainConfig cfg_;
  ForwardModel model_;
  PhysicsParams params_;
  AdamState physics_adam_;
  EpeConfig epe_cfg_;
  std::vector<MaskSlot> slots_;
};

}  // namespace

TrainResult train(PatternKind kind, const std::vector<Sample>& dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ConfigError("empty dataset");
  Trainer t(kind, dataset, config);
  return t.run(on_epoch);
}

TrainResult train(PatternKind kind, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const int n = config.dataset_size > 0 ? config.dataset_size
                                        : default_dataset_size(config.seed);
  const auto data = sample_dataset(kind, n, config.seed, config.grid);
  return train(kind, data, config, on_epoch);
}

std::vector<AblationRow> ablate(PatternKind kind, const TrainConfig& config,
                                std::vector<int> stage_counts) {
  if (stage_counts.empty()) throw ConfigError("ablation needs at least one stage set");
  config.validate();
  const int n = config.dataset_size > 0 ? config.dataset_size
                                        : default_dataset_size(config.seed);
  const auto data = sample_dataset(kind, n, config.seed, config.grid);
  std::vector<AblationRow> rows;
  std::optional<double> baseline;
  for (int count : stage_counts) {
    if (count < 0 || count > 5) throw ConfigError("stage count must be in [0, 5]");
    TrainConfig c = config;
    c.stages = StageFlags::cumulative(count);
    const TrainResult r = train(kind, data, c);
    AblationRow row;
    row.label = kAblationLabels[static_cast<std::size_t>(count)];
    row.stages = c.stages;
    row.final_epe_nm = r.final_epe_nm();
    row.best_epe_nm = r.best_epe_nm();
    row.effective = activate(r.final.params, data.front().field.pixel_size_nm());
    row.aerial = r.final.aerial;
    row.aborted = r.aborted;
    if (count == 0) baseline = row.final_epe_nm;
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    row.improvement_pct =
        baseline && *baseline > 0.0
            ? (*baseline - row.final_epe_nm) / *baseline * 100.0
            : 0.0;
  }
  return rows;
}

std::vector<ad::GradReport> pipeline_gradient_check(int size, std::uint64_t seed,
                                                    int n_logits, double h) {
  if (size < 7) throw DimensionError("gradient check grid must be at least 7 px");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };

  Field2D target(size, size);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = uniform(0, 1) < 0.5 ? 0.0 : 1.0;
  PixelMaskParams logits = PixelMaskParams::zeros(size, size);
  for (double& v : logits.logits) v = uniform(-3.0, 3.0);

  PhysicsParams params;
  for (double* p : params.refs()) *p = uniform(-2.0, 2.0);
  // Keep sigma_b clear of the passthrough threshold.
  while (std::abs(activate(params).sigma_b_px - kBlurPassthroughPx) < 1e-3) {
    params.theta_b = uniform(-2.0, 2.0);
  }

  const ForwardModel model(target.pixel_size_nm());
  const StageFlags all = StageFlags::all();

  // Analytic gradients from one taped evaluation.
  ad::Tape tape;
  const Generator gen = Generator::pixel_direct(logits);
  const auto rec = gen.record(tape, target);
  const PhysicsVars pv = PhysicsVars::record(tape, params);
  const ad::Var image = model.forward(tape, rec.mask, pv, all);
  const LossVars lv = total_loss(image, tape.constant(ad::Tensor::from_field(target)), pv);
  tape.backward(lv.total);

  auto loss_fn = [&]() {
    const Field2D m = pixel_mask(logits);
    return total_loss(model.forward(m, params, all), target, params).total;
  };

  std::vector<ad::ParamProbe> probes;
  auto refs = params.refs();
  for (std::size_t i = 0; i < 5; ++i) {
    probes.push_back({PhysicsParams::kNames[i], refs[i], pv.theta[i].grad()[0]});
  }
  const auto grad = rec.params[0].grad();
  std::vector<std::size_t> idx(logits.logits.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(n_logits)));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) {
    probes.push_back({"logit[" + std::to_string(i) + "]", &logits.logits[i], grad[i]});
  }
  return ad::check_gradients(loss_fn, probes, h);
}

}  // namespace euvilt
