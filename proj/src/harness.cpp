#include "euvilt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "euvilt/errors.hpp"
#include "euvilt/metrology.hpp"
#include "euvilt/plot.hpp"
#include "json.hpp"

namespace euvilt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// %.10g keeps CSVs short and stable across runs.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json stages_json(const StageFlags& s) {
  return {{"diffraction", s.diffraction}, {"absorption", s.absorption},
          {"blur", s.blur}, {"phase", s.phase}, {"contrast", s.contrast}};
}

json raw_json(const PhysicsParams& p) {
  json j;
  const auto raw = p.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) j[PhysicsParams::kNames[i]] = raw[i];
  return j;
}

json effective_json(const EffectiveParams& e) {
  return {{"d", e.d}, {"a", e.a}, {"sigma_b_px", e.sigma_b_px}, {"blur_nm", e.blur_nm},
          {"phase_rad", e.phase_rad}, {"c", e.c}};
}

template <class T>
void take(const json& obj, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void parse_train(const json& j, TrainConfig& t) {
  require_object(j, "train");
  reject_unknown(j, {"epochs", "lr_generator", "lr_physics", "seed", "stages", "weights",
                     "edge_mode", "dataset_size", "generator", "mask_sharing",
                     "init_physics", "adam", "grid"},
                 "train");
  take(j, "epochs", t.epochs);
  take(j, "lr_generator", t.lr_generator);
  take(j, "lr_physics", t.lr_physics);
  take(j, "seed", t.seed);
  take(j, "dataset_size", t.dataset_size);
  if (j.contains("stages")) {
    const json& s = j["stages"];
    if (s.is_number_integer()) {
      t.stages = StageFlags::cumulative(s.get<int>());
    } else {
      require_object(s, "train.stages");
      reject_unknown(s, {"diffraction", "absorption", "blur", "phase", "contrast"}, "train.stages");
      take(s, "diffraction", t.stages.diffraction);
      take(s, "absorption", t.stages.absorption);
      take(s, "blur", t.stages.blur);
      take(s, "phase", t.stages.phase);
      take(s, "contrast", t.stages.contrast);
    }
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    require_object(w, "train.weights");
    reject_unknown(w, {"alpha", "beta", "gamma", "reg_scale"}, "train.weights");
    take(w, "alpha", t.weights.alpha);
    take(w, "beta", t.weights.beta);
    take(w, "gamma", t.weights.gamma);
    take(w, "reg_scale", t.weights.reg_scale);
  }
  std::string name;
  if (j.contains("edge_mode")) {
    take(j, "edge_mode", name);
    t.edge_mode = parse_edge_loss_mode(name);
  }
  if (j.contains("generator")) {
    take(j, "generator", name);
    t.generator = parse_generator_mode(name);
  }
  if (j.contains("mask_sharing")) {
    take(j, "mask_sharing", name);
    t.mask_sharing = parse_mask_sharing(name);
  }
  if (j.contains("init_physics")) {
    const json& p = j["init_physics"];
    require_object(p, "train.init_physics");
    reject_unknown(p, {"theta_d", "theta_a", "theta_b", "theta_p", "theta_c"},
                   "train.init_physics");
    auto refs = t.init_physics.refs();
    for (std::size_t i = 0; i < refs.size(); ++i) take(p, PhysicsParams::kNames[i], *refs[i]);
  }
  if (j.contains("adam")) {
    const json& a = j["adam"];
    require_object(a, "train.adam");
    reject_unknown(a, {"beta1", "beta2", "eps"}, "train.adam");
    take(a, "beta1", t.adam.beta1);
    take(a, "beta2", t.adam.beta2);
    take(a, "eps", t.adam.eps);
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    require_object(g, "train.grid");
    reject_unknown(g, {"width", "height", "pixel_size_nm"}, "train.grid");
    take(g, "width", t.grid.width);
    take(g, "height", t.grid.height);
    take(g, "pixel_size_nm", t.grid.pixel_size_nm);
  }
}

json run_config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json train = {
      {"epochs", t.epochs},
      {"lr_generator", t.lr_generator},
      {"lr_physics", t.lr_physics},
      {"seed", t.seed},
      {"stages", stages_json(t.stages)},
      {"weights",
       {{"alpha", t.weights.alpha}, {"beta", t.weights.beta},
        {"gamma", t.weights.gamma}, {"reg_scale", t.weights.reg_scale}}},
      {"edge_mode", edge_loss_mode_name(t.edge_mode)},
      {"dataset_size", t.dataset_size},
      {"generator", std::string(generator_mode_name(t.generator))},
      {"mask_sharing", std::string(mask_sharing_name(t.mask_sharing))},
      {"init_physics", raw_json(t.init_physics)},
      {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}},
      {"grid",
       {{"width", t.grid.width}, {"height", t.grid.height},
        {"pixel_size_nm", t.grid.pixel_size_nm}}},
  };
  return {{"command", c.command},
          {"kinds", c.kinds},
          {"out", c.out_dir.string()},
          {"run_dir", c.run_dir.string()},
          {"ablation_stages", c.ablation_stages},
          {"train", train}};
}

// Collects emitted files and writes the manifest last, via rename.
class RunDir {
 public:
  RunDir(const RunConfig& config, fs::path dir)
      : config_(config), dir_(std::move(dir)), started_(utc_now()) {
    ensure_dir(dir_);
    write_text(dir_ / "config.json", run_config_json(config_));
    add("config.json");
  }

  const fs::path& path() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }
  void add(const std::string& name) { files_.push_back(name); }
  void add_all(const std::vector<std::string>& names, const std::string& prefix = "") {
    for (const auto& n : names) files_.push_back(prefix + n);
  }
  void add_epoch_seconds(const std::vector<EpochRecord>& history) {
    for (const auto& r : history) epoch_seconds_.push_back(r.seconds);
  }

  void finish(int exit_code) {
    json m = {{"tool_version", kToolVersion},
              {"command", config_.command},
              {"config_hash", config_hash(config_)},
              {"seed", config_.train.seed},
              {"started_at", started_},
              {"finished_at", utc_now()},
              {"exit_code", exit_code},
              {"files", files_},
              {"epoch_seconds", epoch_seconds_}};
    const fs::path tmp = dir_ / "manifest.json.tmp";
    write_text(tmp, m.dump(2) + "\n");
    std::error_code ec;
    fs::rename(tmp, dir_ / "manifest.json", ec);
    if (ec) throw IoError("cannot finalize manifest in " + dir_.string());
  }

 private:
  const RunConfig& config_;
  fs::path dir_;
  std::string started_;
  std::vector<std::string> files_;
  std::vector<double> epoch_seconds_;
};

PatternKind single_kind(const RunConfig& config) {
  const auto kinds = config.resolved_kinds();
  if (kinds.size() != 1) {
    throw ConfigError(config.command + " needs exactly one --kind");
  }
  return kinds.front();
}

void write_abs_diff_pgm(const Field2D& a, const Field2D& b, const fs::path& path) {
  Field2D d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a[i] - b[i]);
  write_pgm(d, path);
}

json train_summary_json(const TrainResult& r) {
  const double px = r.target.pixel_size_nm();
  return {{"kind", std::string(pattern_name(r.kind))},
          {"dataset_size", r.dataset_size},
          {"epochs_run", r.history.size()},
          {"aborted", r.aborted},
          {"abort_reason", r.abort_reason},
          {"initial_epe_nm", r.initial_epe_nm},
          {"final_epe_nm", r.final_epe_nm()},
          {"best_epe_nm", r.best_epe_nm()},
          {"best_epoch", r.best.epoch},
          {"improvement_pct", improvement_vs_baseline_pct(r.final_epe_nm())},
          {"final", {{"raw", raw_json(r.final.params)},
                     {"effective", effective_json(activate(r.final.params, px))}}},
          {"best", {{"raw", raw_json(r.best.params)},
                    {"effective", effective_json(activate(r.best.params, px))}}}};
}

std::string summary_line(const TrainResult& r) {
  return std::string(pattern_name(r.kind)) + " " + num(r.final_epe_nm()) + " " +
         num(r.best_epe_nm()) + " " + num(improvement_vs_baseline_pct(r.final_epe_nm()));
}

// One row of summary.csv; status is "ok", "aborted" or the error text.
struct SweepRow {
  PatternKind kind = PatternKind::kEuvLineSpace;
  std::string status;
  double final_epe_nm = NAN;
  double best_epe_nm = NAN;
  double improvement_pct = NAN;
  EffectiveParams effective;
};

std::string opt_num(double v) { return std::isnan(v) ? "" : num(v); }

}  // namespace

std::vector<PatternKind> RunConfig::resolved_kinds() const {
  std::vector<PatternKind> out;
  std::set<PatternKind> seen;
  auto push = [&](PatternKind k) {
    if (seen.insert(k).second) out.push_back(k);
  };
  for (const auto& name : kinds) {
    if (name == "all") {
      for (auto k : all_pattern_kinds()) push(k);
    } else if (name == "standard") {
      for (auto k : standard_pattern_kinds()) push(k);
    } else if (name == "advanced") {
      for (auto k : advanced_pattern_kinds()) push(k);
    } else {
      push(parse_pattern_kind(name));
    }
  }
  return out;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(j, "config");
  reject_unknown(j, {"command", "kinds", "kind", "out", "run_dir", "ablation_stages", "train"},
                 "config");
  RunConfig c;
  take(j, "command", c.command);
  take(j, "kinds", c.kinds);
  if (j.contains("kind")) {
    std::string k;
    take(j, "kind", k);
    c.kinds = {k};
  }
  std::string path;
  if (j.contains("out")) {
    take(j, "out", path);
    c.out_dir = path;
  }
  if (j.contains("run_dir")) {
    take(j, "run_dir", path);
    c.run_dir = path;
  }
  take(j, "ablation_stages", c.ablation_stages);
  if (j.contains("train")) parse_train(j["train"], c.train);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_text(path));
}

std::string run_config_json(const RunConfig& config) {
  return run_config_to_json(config).dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
  // Timestamps and the output location do not affect results.
  json j = run_config_to_json(config);
  j.erase("out");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_history_csv(const std::vector<EpochRecord>& history, const fs::path& path) {
  auto f = open_out(path);
  f << "epoch,total,recon,edge,reg,epe_nm,d,a,blur_nm,phase,c\n";
  for (const auto& r : history) {
    const auto& e = r.effective;
    f << r.epoch << ',' << num(r.loss.total) << ',' << num(r.loss.recon) << ','
      << num(r.loss.edge) << ',' << num(r.loss.physics_reg) << ',' << num(r.epe_nm) << ','
      << num(e.d) << ',' << num(e.a) << ',' << num(e.blur_nm) << ',' << num(e.phase_rad)
      << ',' << num(e.c) << '\n';
  }
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<std::string> write_train_artifacts(const TrainResult& r, const fs::path& dir) {
  ensure_dir(dir);
  std::vector<std::string> files;
  auto emit = [&](const std::string& name) { files.push_back(name); return dir / name; };

  write_history_csv(r.history, emit("history.csv"));
  write_text(emit("params.json"), train_summary_json(r).dump(2) + "\n");
  write_pgm(r.target, emit("target.pgm"));
  write_pgm(r.final.mask, emit("mask_final.pgm"));
  write_pgm(r.final.aerial, emit("aerial_final.pgm"));
  write_abs_diff_pgm(r.final.aerial, r.target, emit("diff.pgm"));
  write_pgm(r.best.mask, emit("mask_best.pgm"));
  write_pgm(r.best.aerial, emit("aerial_best.pgm"));
  // Full-precision copies for render and external plotting.
  write_csv(r.target, emit("target.csv"));
  write_csv(r.final.mask, emit("mask_final.csv"));
  write_csv(r.final.aerial, emit("aerial_final.csv"));
  return files;
}

int cmd_generate_patterns(const RunConfig& config, std::ostream& out) {
  RunConfig c = config;
  if (c.kinds.empty()) c.kinds = {"all"};
  const auto kinds = c.resolved_kinds();
  if (kinds.empty()) throw ConfigError("no pattern kinds selected");
  RunDir run(c, c.out_dir);

  std::ostringstream cat;
  cat << "kind,difficulty,success_band,euv_ready,standard,fill_ratio,expected_fill,"
         "min_feature_nm,expected_min_feature_nm,subpixel_warning\n";
  for (PatternKind k : kinds) {
    const PatternSpec spec = canonical_spec(k, c.train.grid);
    const Field2D f = render(spec);
    const PatternStats st = stats(spec, f);
    const CatalogEntry& e = catalog_entry(k);
    const std::string name(pattern_name(k));
    write_pgm(f, run / (name + ".pgm"));
    run.add(name + ".pgm");
    const json j = {{"kind", name},
                    {"pitch_nm", spec.pitch_nm},
                    {"width_nm", spec.width_nm},
                    {"density", spec.density},
                    {"seed", spec.seed},
                    {"width_px", f.width()},
                    {"height_px", f.height()},
                    {"pixel_size_nm", f.pixel_size_nm()},
                    {"fill_ratio", st.fill_ratio},
                    {"min_feature_nm", st.min_feature_nm},
                    {"subpixel_warning", st.subpixel_warning},
                    {"expected_fill", e.expected_fill},
                    {"expected_min_feature_nm", e.expected_min_feature_nm}};
    write_text(run / (name + ".json"), j.dump(2) + "\n");
    run.add(name + ".json");
    cat << name << ',' << difficulty_name(e.category) << ',' << e.success_band << ','
        << (e.euv_ready ? 1 : 0) << ',' << (e.standard ? 1 : 0) << ',' << num(st.fill_ratio)
        << ',' << num(e.expected_fill) << ',' << num(st.min_feature_nm) << ','
        << num(e.expected_min_feature_nm) << ',' << (st.subpixel_warning ? 1 : 0) << '\n';
    out << name << " fill=" << num(st.fill_ratio) << " min_feature_nm="
        << num(st.min_feature_nm) << '\n';
  }
  write_text(run / "catalog.csv", cat.str());
  run.add("catalog.csv");
  run.finish(kExitOk);
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  const PatternKind kind = single_kind(config);
  RunDir run(config, config.out_dir);
  const TrainResult r = train(kind, config.train);
  run.add_all(write_train_artifacts(r, run.path()));
  run.add_epoch_seconds(r.history);
  const int code = r.aborted ? kExitNumerical : kExitOk;
  run.finish(code);
  out << summary_line(r) << '\n';
  if (r.aborted) throw NumericalError("training aborted at " + r.abort_reason);
  return code;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
  const PatternKind kind = single_kind(config);
  RunDir run(config, config.out_dir);
  const auto rows = ablate(kind, config.train, config.ablation_stages);
  const bool has_baseline =
      std::find(config.ablation_stages.begin(), config.ablation_stages.end(), 0) !=
      config.ablation_stages.end();

  std::ostringstream csv;
  csv << "stage,epe_nm,best_epe_nm,improvement_pct_vs_no_physics,d,a,blur_nm,phase,c,"
         "aborted\n";
  bool any_aborted = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    const auto& e = r.effective;
    csv << r.label << ',' << num(r.final_epe_nm) << ','
        << num(r.best_epe_nm) << ',' << (has_baseline ? num(r.improvement_pct) : "") << ','
        << num(e.d) << ',' << num(e.a) << ',' << num(e.blur_nm) << ',' << num(e.phase_rad)
        << ',' << num(e.c) << ',' << (r.aborted ? 1 : 0) << '\n';
    const std::string img = "aerial_" + std::to_string(i) + "_" + r.label + ".pgm";
    write_pgm(r.aerial, run / img);
    run.add(img);
    any_aborted = any_aborted || r.aborted;
    out << r.label << ' ' << num(r.final_epe_nm) << '\n';
  }
  write_text(run / "ablation.csv", csv.str());
  run.add("ablation.csv");
  const int code = any_aborted ? kExitNumerical : kExitOk;
  run.finish(code);
  return code;
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
  auto kinds = config.resolved_kinds();
  if (kinds.empty()) throw ConfigError("sweep needs at least one kind");
  std::sort(kinds.begin(), kinds.end(), [](PatternKind a, PatternKind b) {
    return pattern_name(a) < pattern_name(b);
  });
  RunDir run(config, config.out_dir);

  std::vector<SweepRow> rows;
  for (PatternKind k : kinds) {
    const std::string name(pattern_name(k));
    SweepRow row;
    row.kind = k;
    row.status = "ok";
    try {
      const TrainResult r = train(k, config.train);
      run.add_all(write_train_artifacts(r, run / name), name + "/");
      run.add_epoch_seconds(r.history);
      row.final_epe_nm = r.final_epe_nm();
      row.best_epe_nm = r.best_epe_nm();
      row.improvement_pct = improvement_vs_baseline_pct(r.final_epe_nm());
      row.effective = activate(r.final.params, r.target.pixel_size_nm());
      if (r.aborted) row.status = "aborted";
      out << summary_line(r) << '\n';
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      out << name << " failed: " << e.what() << '\n';
    }
    rows.push_back(row);
  }

  std::ostringstream csv;
  csv << "kind,final_epe_nm,best_epe_nm,improvement_pct,d,a,blur_nm,phase,c,status\n";
  std::vector<double> bars;
  std::vector<plot::Rgb> colors;
  bool all_ok = true;
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    all_ok = all_ok && ok;
    const auto& e = r.effective;
    csv << pattern_name(r.kind) << ',' << opt_num(r.final_epe_nm) << ','
        << opt_num(r.best_epe_nm) << ',' << opt_num(r.improvement_pct) << ','
        << (ok ? num(e.d) : "") << ',' << (ok ? num(e.a) : "") << ','
        << (ok ? num(e.blur_nm) : "") << ',' << (ok ? num(e.phase_rad) : "") << ','
        << (ok ? num(e.c) : "") << ",\"" << r.status << "\"\n";
    bars.push_back(std::isnan(r.final_epe_nm) ? 0.0 : r.final_epe_nm);
    colors.push_back(ok ? plot::kBlue : plot::kGray);
  }
  write_text(run / "summary.csv", csv.str());
  run.add("summary.csv");
  double y_max = 5.0;
  for (double b : bars) y_max = std::max(y_max, b * 1.1);
  plot::bar_chart(bars, colors, {1.0, kBaselineEpeNm}, y_max, 640, 360)
      .write_png(run / "summary.png");
  run.add("summary.png");
  const int code = all_ok ? kExitOk : kExitNumerical;
  run.finish(code);
  return code;
}

int cmd_render(const RunConfig& config, std::ostream& out) {
  const fs::path src = config.run_dir;
  if (src.empty()) throw ConfigError("render needs a run directory");
  for (const char* name : {"target.csv", "mask_final.csv", "aerial_final.csv", "params.json"}) {
    if (!fs::exists(src / name)) throw IoError("missing artifact " + (src / name).string());
  }
  const Field2D target = read_csv(src / "target.csv");
  const Field2D mask = read_csv(src / "mask_final.csv");
  const Field2D aerial = read_csv(src / "aerial_final.csv");
  if (!target.same_shape(mask) || !target.same_shape(aerial)) {
    throw DimensionError("run artifacts have mismatched shapes");
  }
  json params;
  try {
    params = json::parse(read_text(src / "params.json"));
  } catch (const json::exception& e) {
    throw IoError("unreadable params.json: " + std::string(e.what()));
  }
  RunDir run(config, config.out_dir.empty() ? src / "render" : config.out_dir);

  Field2D diff = aerial;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(aerial[i] - target[i]);

  // Horizontal cut through the middle row.
  const int row = target.height() / 2;
  std::ostringstream cs;
  cs << "x_nm,target,mask,aerial\n";
  std::vector<std::vector<double>> cut(3);
  for (int x = 0; x < target.width(); ++x) {
    cs << num(x * target.pixel_size_nm()) << ',' << num(target(row, x)) << ','
       << num(mask(row, x)) << ',' << num(aerial(row, x)) << '\n';
    cut[0].push_back(target(row, x));
    cut[1].push_back(mask(row, x));
    cut[2].push_back(aerial(row, x));
  }
  write_text(run / "cross_section.csv", cs.str());
  run.add("cross_section.csv");

  const json& eff = params.at("final").at("effective");
  const std::vector<std::pair<std::string, double>> theta = {
      {"d", eff.at("d").get<double>() / ParamBounds::kDiffractionMax},
      {"a", eff.at("a").get<double>() / ParamBounds::kAbsorptionMax},
      {"sigma_b", eff.at("sigma_b_px").get<double>() / ParamBounds::kBlurMaxPx},
      {"phase", std::abs(eff.at("phase_rad").get<double>()) / ParamBounds::kPhaseMaxRad},
      {"c", eff.at("c").get<double>() / ParamBounds::kContrastMax}};
  std::ostringstream th;
  th << "param,value,fraction_of_range\n";
  const std::vector<std::string> keys = {"d", "a", "sigma_b_px", "phase_rad", "c"};
  std::vector<double> theta_bars;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    th << keys[i] << ',' << num(eff.at(keys[i]).get<double>()) << ',' << num(theta[i].second)
       << '\n';
    theta_bars.push_back(theta[i].second);
  }
  write_text(run / "theta.csv", th.str());
  run.add("theta.csv");

  const double initial = params.at("initial_epe_nm").get<double>();
  const double best = params.at("best_epe_nm").get<double>();
  const double final_epe = params.at("final_epe_nm").get<double>();
  std::ostringstream ec;
  ec << "label,epe_nm\n"
     << "baseline," << num(kBaselineEpeNm) << '\n'
     << "initial," << num(initial) << '\n'
     << "best," << num(best) << '\n'
     << "final," << num(final_epe) << '\n';
  write_text(run / "epe_comparison.csv", ec.str());
  run.add("epe_comparison.csv");

  constexpr int kBins = 64;
  auto histogram = [&](const Field2D& f) {
    std::vector<double> h(kBins, 0.0);
    for (double v : f.values()) {
      const int b = std::clamp(static_cast<int>(std::floor(v * kBins)), 0, kBins - 1);
      h[b] += 1.0;
    }
    return h;
  };
  const auto h_target = histogram(target);
  const auto h_mask = histogram(mask);
  const auto h_aerial = histogram(aerial);
  std::ostringstream hs;
  hs << "bin_lo,bin_hi,target,mask,aerial\n";
  for (int b = 0; b < kBins; ++b) {
    hs << num(static_cast<double>(b) / kBins) << ',' << num(static_cast<double>(b + 1) / kBins)
       << ',' << h_target[b] << ',' << h_mask[b] << ',' << h_aerial[b] << '\n';
  }
  write_text(run / "histogram.csv", hs.str());
  run.add("histogram.csv");

  // 4 x 2 panels: rasters on top, charts below.
  constexpr int kPanel = 256;
  constexpr int kGap = 8;
  plot::Image img(4 * kPanel + 5 * kGap, 2 * kPanel + 3 * kGap);
  const Field2D* rasters[] = {&target, &mask, &aerial, &diff};
  for (int i = 0; i < 4; ++i) {
    img.blit_field(*rasters[i], kGap + i * (kPanel + kGap), kGap, kPanel, kPanel, 0.0, 1.0);
  }
  const int y2 = 2 * kGap + kPanel;
  img.paste(plot::line_chart(cut, {plot::kBlack, plot::kOrange, plot::kBlue}, 0.0, 1.2,
                             kPanel, kPanel),
            kGap, y2);
  img.paste(plot::bar_chart(theta_bars, {plot::kBlue, plot::kOrange, plot::kGreen,
                                         plot::kPurple, plot::kRed},
                            {}, 1.0, kPanel, kPanel),
            2 * kGap + kPanel, y2);
  const double epe_max = std::max({kBaselineEpeNm, initial, final_epe}) * 1.1;
  img.paste(plot::bar_chart({kBaselineEpeNm, initial, best, final_epe},
                            {plot::kGray, plot::kOrange, plot::kGreen, plot::kBlue},
                            {1.0, kBaselineEpeNm}, epe_max, kPanel, kPanel),
            3 * kGap + 2 * kPanel, y2);
  double h_max = 1.0;
  for (const auto* h : {&h_target, &h_mask, &h_aerial}) {
    for (double v : *h) h_max = std::max(h_max, std::log1p(v));
  }
  std::vector<std::vector<double>> logh(3);
  for (int b = 0; b < kBins; ++b) {
    logh[0].push_back(std::log1p(h_target[b]));
    logh[1].push_back(std::log1p(h_mask[b]));
    logh[2].push_back(std::log1p(h_aerial[b]));
  }
  img.paste(plot::line_chart(logh, {plot::kBlack, plot::kOrange, plot::kBlue}, 0.0, h_max,
                             kPanel, kPanel),
            4 * kGap + 3 * kPanel, y2);
  img.write_png(run / "render.png");
  run.add("render.png");
  run.finish(kExitOk);
  out << "rendered " << (run.path() / "render.png").string() << '\n';
  return kExitOk;
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.command == "generate-patterns") return cmd_generate_patterns(config, out);
    if (config.command == "train") return cmd_train(config, out);
    if (config.command == "ablate") return cmd_ablate(config, out);
    if (config.command == "sweep") return cmd_sweep(config, out);
    if (config.command == "render") return cmd_render(config, out);
    err << "error: unknown command '" << config.command << "'\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const MetricError& e) {
    err << "metric error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace euvilt
