#include "cemporo/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cemporo/parallel.hpp"

namespace cem {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Variant> load_variants(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_array() || j.empty()) throw ConfigError("variants file must hold a non-empty array");
  std::vector<Variant> out;
  try {
    for (const json& v : j) {
      Variant var;
      var.strategy = parse_strategy(v.value("strategy", std::string("neighborhood")));
      var.theta = v.value("theta", 0.3);
      var.gamma = v.value("gamma", var.theta);
      var.name = v.value("name", to_string(var.strategy) + "_" + std::to_string(var.theta));
      out.push_back(var);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed variants file: ") + e.what());
  }
  return out;
}

std::vector<Variant> default_variants() {
  return {{"element_0.7", Strategy::element, 0.7, 0.7},
          {"element_0.3", Strategy::element, 0.3, 0.3},
          {"neighborhood_0.7", Strategy::neighborhood, 0.7, 0.7},
          {"neighborhood_0.3", Strategy::neighborhood, 0.3, 0.3}};
}

VariantResult cmd_run(const ExperimentConfig& config, const fs::path& out) {
  const auto prep = prepare(config);
  VariantResult r = run_variant(*prep, config.online, config.schedule, "run");
  write_artifacts(*prep, r, out);
  return r;
}

void cmd_make_field(const ExperimentConfig& config, const fs::path& header_path) {
  config.validate();
  const GridPair grid(config.ncx, config.ncy, config.refinement);
  MaterialField field;
  if (config.material == ExperimentConfig::MaterialKind::homogeneous)
    field = homogeneous_field(grid, config.homogeneous_E, config.scalars);
  else if (config.material == ExperimentConfig::MaterialKind::synth)
    field = synth_channels(grid, config.synth, config.scalars);
  else
    throw ConfigError("make-field needs a synth or homogeneous material spec");
  if (header_path.has_parent_path()) fs::create_directories(header_path.parent_path());
  save_field(field, grid, header_path);
}

std::vector<VariantResult> cmd_compare(const ExperimentConfig& config,
                                       const std::vector<Variant>& variants,
                                       const fs::path& out) {
  if (variants.empty()) throw ConfigError("no variants to compare");
  std::vector<std::string> names;
  for (const Variant& v : variants) {
    if (v.name.empty() || v.name.find_first_of(",/\\") != std::string::npos)
      throw ConfigError("variant names must be non-empty and free of ',', '/' and '\\'");
    if (std::find(names.begin(), names.end(), v.name) != names.end())
      throw ConfigError("duplicate variant name '" + v.name + "'");
    names.push_back(v.name);
    OnlineConfig oc = config.online;
    oc.strategy = v.strategy;
    oc.theta = v.theta;
    oc.gamma = v.gamma;
    oc.validate();
  }
  const auto prep = prepare(config);
  std::vector<VariantResult> results;
  fs::create_directories(out);
  std::string merged = "variant," + history_csv(EnrichmentHistory{});
  for (const Variant& v : variants) {
    OnlineConfig oc = config.online;
    oc.strategy = v.strategy;
    oc.theta = v.theta;
    oc.gamma = v.gamma;
    VariantResult r = run_variant(*prep, oc, config.schedule, v.name);
    write_artifacts(*prep, r, out / v.name);
    const std::string csv = history_csv(r.history);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty()) merged += v.name + "," + line + "\n";
    results.push_back(std::move(r));
  }
  std::ofstream f(out / "compare.csv", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (out / "compare.csv").string());
  f << merged;
  return results;
}

std::string cmd_report(const fs::path& dir) {
  if (!fs::exists(dir)) throw ConfigError("no such directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "history.csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no history.csv under " + dir.string());
  std::string out;
  for (const fs::path& f : files) {
    out += "# " + fs::relative(f.parent_path(), dir).generic_string() + "\n";
    out += format_table(read_history_csv(f));
  }
  return out;
}

namespace {

ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset_name) {
  if (!config_path.empty() && !preset_name.empty())
    throw ConfigError("give either --config or --preset, not both");
  if (!config_path.empty()) return load_config(config_path);
  if (!preset_name.empty()) return preset(preset_name);
  throw ConfigError("a configuration is required (--config PATH or --preset NAME)");
}

} // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"CEM-GMsFEM multiscale solver for heterogeneous poroelasticity"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir, variants_path, in_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration (JSON)");
    sub->add_option("--preset", preset_name, "built-in configuration: example1..example4");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed of the synthetic field");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* run = app.add_subcommand("run", "fine reference + multiscale run with enrichment");
  add_common(run);
  CLI::App* make_field = app.add_subcommand("make-field", "write a synthetic coefficient field");
  add_common(make_field);
  CLI::App* compare = app.add_subcommand("compare", "run several online variants on one setup");
  add_common(compare);
  compare->add_option("--variants", variants_path, "JSON array of {name, strategy, theta, gamma}");
  CLI::App* report = app.add_subcommand("report", "print formatted tables of saved histories");
  report->add_option("--in", in_dir, "directory holding history.csv files")->required();
  report->add_option("--out", out_dir, "also write the tables to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (report->parsed()) {
      const std::string text = cmd_report(in_dir);
      std::cout << text;
      if (!out_dir.empty()) {
        std::ofstream f(out_dir, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + out_dir);
        f << text;
      }
      return exit_ok;
    }

    ExperimentConfig config = resolve_config(config_path, preset_name);
    if (seed) config.synth.seed = *seed;
    if (threads) config.threads = *threads;
    config.validate();
    parallel::set_threads(config.threads);
    fs::path out = out_dir;
    if (out.empty()) {
      out = config.output_dir.empty() ? fs::path("out") : fs::path(config.output_dir);
      if (out.is_relative() && !config.base_dir.empty()) out = config.base_dir / out;
    }
    config.output_dir = out.string();

    if (run->parsed()) {
      const VariantResult r = cmd_run(config, out);
      std::cout << format_table(r.history);
      std::cout << "artifacts written to " << out.string() << "\n";
    } else if (make_field->parsed()) {
      fs::path header = out;
      if (header.extension() != ".json") header /= "field.json";
      cmd_make_field(config, header);
      std::cout << "field written to " << header.string() << "\n";
    } else if (compare->parsed()) {
      const std::vector<Variant> variants =
          variants_path.empty() ? default_variants() : load_variants(variants_path);
      const auto results = cmd_compare(config, variants, out);
      for (const VariantResult& r : results) std::cout << "# " << r.name << "\n" << format_table(r.history);
      std::cout << "comparison written to " << (out / "compare.csv").string() << "\n";
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical;
  }
}

} // namespace cem
