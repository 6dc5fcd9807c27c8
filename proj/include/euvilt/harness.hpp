#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "euvilt/optimizer.hpp"
#include "euvilt/patterns.hpp"

namespace euvilt {

inline constexpr const char* kToolVersion = "0.1.0";

/// CLI exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

/// Everything a command needs, loaded from JSON and then overridden from the
/// command line. The resolved form is written into every run directory.
struct RunConfig {
  std::string command;
  /// Kind names, or one of the group names "all", "standard", "advanced".
  std::vector<std::string> kinds;
  std::filesystem::path out_dir;
  TrainConfig train;
  /// Stage counts for ablate (0 = no_physics ... 5 = full_physics).
  std::vector<int> ablation_stages = {0, 1, 2, 3, 4, 5};
  /// Source run directory for render.
  std::filesystem::path run_dir;

  /// Expanded, de-duplicated kind list. Throws ConfigError on unknown names.
  std::vector<PatternKind> resolved_kinds() const;
};

/// Throws ConfigError on malformed content and IoError when unreadable.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& config);

/// FNV-1a of the resolved config JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

// Commands. Each writes into config.out_dir (created if needed) and returns
// an exit code; exceptions propagate to run_command.
int cmd_generate_patterns(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_ablate(const RunConfig& config, std::ostream& out);
int cmd_sweep(const RunConfig& config, std::ostream& out);
int cmd_render(const RunConfig& config, std::ostream& out);

/// Dispatches on config.command and maps exceptions onto exit codes.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Writes train artifacts for one result into `dir`; returns file names.
std::vector<std::string> write_train_artifacts(const TrainResult& result,
                                               const std::filesystem::path& dir);
void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

}  // namespace euvilt
