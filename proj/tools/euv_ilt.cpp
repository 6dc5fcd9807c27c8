// euv-ilt: pattern generation, training, ablation, sweeps and figure panels.
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "euvilt/errors.hpp"
#include "euvilt/generator.hpp"
#include "euvilt/harness.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::vector<std::string> kinds;
  std::string out;
  std::string mode;
  std::string run_dir;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "JSON run config")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--epochs", o.epochs, "training epochs");
  sub->add_option("--kind", o.kinds, "pattern kind (repeatable; also all|standard|advanced)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--mode", o.mode, "generator: pixel_direct|mini_cnn");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EUV inverse lithography with a learnable physics model"};
  app.set_version_flag("--version", euvilt::kToolVersion);
  app.require_subcommand(1);

  Overrides o;
  const std::pair<const char*, const char*> commands[] = {
      {"generate-patterns", "render catalog templates with stats"},
      {"train", "optimize a mask and physics parameters for one kind"},
      {"ablate", "retrain with cumulative physics stages"},
      {"sweep", "train several kinds and summarize"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);
  auto* render = app.add_subcommand("render", "composite figure from a finished train run");
  add_common(render, o);
  render->add_option("run_dir", o.run_dir, "train run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : euvilt::kExitUsage;
  }

  euvilt::RunConfig cfg;
  try {
    if (!o.config_path.empty()) cfg = euvilt::load_run_config(o.config_path);
    cfg.command = app.get_subcommands().front()->get_name();
    if (o.seed) cfg.train.seed = *o.seed;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (!o.kinds.empty()) cfg.kinds = o.kinds;
    if (!o.mode.empty()) cfg.train.generator = euvilt::parse_generator_mode(o.mode);
    if (!o.run_dir.empty()) cfg.run_dir = o.run_dir;
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (cfg.out_dir.empty()) {
      cfg.out_dir = cfg.command == "render" ? cfg.run_dir / "render"
                                            : std::filesystem::path("runs") / cfg.command;
    }
    if (cfg.command == "sweep" && cfg.kinds.empty()) {
      std::cerr << "error: sweep needs at least one --kind\n";
      return euvilt::kExitUsage;
    }
    if ((cfg.command == "train" || cfg.command == "ablate") && cfg.kinds.empty()) {
      cfg.kinds = {"dram_arrays"};
    }
  } catch (const euvilt::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return euvilt::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return euvilt::kExitUsage;
  }
  return euvilt::run_command(cfg, std::cout, std::cerr);
}
