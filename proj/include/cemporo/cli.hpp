#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cemporo/experiment.hpp"

namespace cem {

enum ExitCode { exit_ok = 0, exit_config = 1, exit_numerical = 2 };

struct Variant {
  std::string name;
  Strategy strategy = Strategy::neighborhood;
  double theta = 0.3;
  double gamma = 0.3;
};

std::vector<Variant> load_variants(const std::filesystem::path& path);
/// Neighborhood and element strategies at theta = gamma = 0.3 and 0.7.
std::vector<Variant> default_variants();

/// Runs the configured experiment and writes its artifacts to `out`.
VariantResult cmd_run(const ExperimentConfig& config, const std::filesystem::path& out);

/// Writes a synthetic field (header + CSVs) to `header_path`.
void cmd_make_field(const ExperimentConfig& config, const std::filesystem::path& header_path);

/// Runs every variant on one offline setup; writes one artifact directory
/// per variant and a merged `compare.csv` (history rows prefixed by the
/// variant name).
std::vector<VariantResult> cmd_compare(const ExperimentConfig& config,
                                       const std::vector<Variant>& variants,
                                       const std::filesystem::path& out);

/// Formatted tables of every history.csv found under `dir`.
std::string cmd_report(const std::filesystem::path& dir);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv);

} // namespace cem
