#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cemporo/assembly.hpp"
#include "cemporo/auxspace.hpp"
#include "cemporo/cembasis.hpp"
#include "cemporo/coeff.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/online.hpp"
#include "cemporo/poro_solver.hpp"
#include "cemporo/report.hpp"

namespace cem {

struct Schedule {
  enum class Kind { none, final_step, every } kind = Kind::final_step;
  int every = 0;

  bool due(int n, int N) const;
  std::string describe() const;
};

struct ExperimentConfig {
  int ncx = 10, ncy = 10, refinement = 10;

  enum class MaterialKind { file, synth, homogeneous } material = MaterialKind::synth;
  std::string material_file;
  ChannelSpec synth;
  double homogeneous_E = 1.0;

  BiotScalars scalars;
  double tau = 0.05;
  double T = 1.0;

  int J_u = 2, J_p = 2;
  int ell_offline = 2;

  OnlineConfig online;
  Schedule schedule;

  enum class SourceKind { constant, sine, time_sine, table } source = SourceKind::constant;
  double source_value = 1.0;  ///< constant value, or scale of the sine forms
  std::string source_file;    ///< table: CSV of per-fine-cell values

  enum class InitialPressure { bubble, skewed_bubble, zero } initial = InitialPressure::bubble;

  std::string output_dir = "out";
  bool snapshots = true;
  bool dump_basis = false;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Relative paths inside the config resolve against this directory.
  std::filesystem::path base_dir;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Built-in presets: "example1", "example2", "example3", "example4".
ExperimentConfig preset(const std::string& name);

/// Offline artefacts shared by every online variant of one configuration.
struct Prepared {
  ExperimentConfig config;
  GridPair grid;
  MaterialField field;
  std::unique_ptr<PartitionOfUnity> pou;
  OperatorSet ops;
  AuxBasis aux;
  SpectralDiagnostics diagnostics;
  MultiscaleSpace offline;
  TimeGrid time;
  SourceTerm source;
  SolutionState fine_initial;
  Trajectory reference;
  double seconds_offline = 0.0;
  double seconds_reference = 0.0;

  Vector load(int n) const;
};

std::unique_ptr<Prepared> prepare(const ExperimentConfig& config);

struct StepError {
  int n = 0;
  int dof_u = 0;
  int dof_p = 0;
  double e_u = 0.0;
  double e_p = 0.0;
};

struct VariantResult {
  std::string name;
  OnlineConfig online;
  Schedule schedule;
  EnrichmentHistory history;
  std::vector<StepError> errors; ///< after any enrichment at each step
  MultiscaleSpace space;
  Trajectory trajectory;
  double seconds = 0.0;
};

VariantResult run_variant(const Prepared& prep, const OnlineConfig& online,
                          const Schedule& schedule, const std::string& name = "");

/// Writes history.csv/json, errors.csv, snapshots, optional basis dump and
/// manifest.json to `dir`.
void write_artifacts(const Prepared& prep, const VariantResult& result,
                     const std::filesystem::path& dir);

std::string errors_csv(const std::vector<StepError>& errors);

} // namespace cem
