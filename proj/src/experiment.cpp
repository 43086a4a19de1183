#include "cemporo/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "cemporo/parallel.hpp"

namespace cem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

const char* source_name(ExperimentConfig::SourceKind k) {
  switch (k) {
  case ExperimentConfig::SourceKind::constant: return "constant";
  case ExperimentConfig::SourceKind::sine: return "sine";
  case ExperimentConfig::SourceKind::time_sine: return "time_sine";
  case ExperimentConfig::SourceKind::table: return "table";
  }
  return "constant";
}

const char* initial_name(ExperimentConfig::InitialPressure p) {
  switch (p) {
  case ExperimentConfig::InitialPressure::bubble: return "bubble";
  case ExperimentConfig::InitialPressure::skewed_bubble: return "skewed_bubble";
  case ExperimentConfig::InitialPressure::zero: return "zero";
  }
  return "bubble";
}

} // namespace

bool Schedule::due(int n, int N) const {
  switch (kind) {
  case Kind::none: return false;
  case Kind::final_step: return n == N;
  case Kind::every: return every > 0 && n % every == 0;
  }
  return false;
}

std::string Schedule::describe() const {
  switch (kind) {
  case Kind::none: return "none";
  case Kind::final_step: return "final";
  case Kind::every: return "every " + std::to_string(every);
  }
  return "none";
}

void ExperimentConfig::validate() const {
  if (ncx < 1 || ncy < 1 || refinement < 1)
    throw ConfigError("mesh sizes and refinement must be positive");
  if (material == MaterialKind::file && material_file.empty())
    throw ConfigError("material file path is empty");
  if (material == MaterialKind::homogeneous && !(homogeneous_E > 0.0))
    throw ConfigError("homogeneous Young's modulus must be positive");
  if (material == MaterialKind::synth) {
    if (!(synth.background > 0.0) || !(synth.contrast >= 1.0))
      throw ConfigError("synthetic field needs background > 0 and contrast >= 1");
    if (synth.channels < 0 || synth.inclusions < 0 || synth.channel_width < 0)
      throw ConfigError("synthetic field counts must be non-negative");
  }
  if (!(scalars.nu_p > -1.0 && scalars.nu_p < 0.5)) throw ConfigError("nu_p must lie in (-1, 0.5)");
  if (!(scalars.alpha >= 0.0 && scalars.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(scalars.M > 0.0) || !(scalars.nu > 0.0)) throw ConfigError("M and nu must be positive");
  TimeGrid::from_final_time(tau, T);
  const int nloc = (refinement + 1) * (refinement + 1);
  if (J_u < 1 || J_p < 1 || J_u > 2 * nloc || J_p > nloc)
    throw ConfigError("J must lie between 1 and the local auxiliary dimension");
  if (ell_offline < 0) throw ConfigError("offline oversampling layers must be >= 0");
  online.validate();
  if (schedule.kind == Schedule::Kind::every && schedule.every < 1)
    throw ConfigError("enrichment period must be >= 1");
  if (source == SourceKind::table && source_file.empty())
    throw ConfigError("source table path is empty");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    if (j.contains("mesh")) {
      const json& m = j.at("mesh");
      read_opt(m, "Ncx", c.ncx);
      read_opt(m, "Ncy", c.ncy);
      read_opt(m, "refinement", c.refinement);
    }
    if (j.contains("material")) {
      const json& m = j.at("material");
      if (m.contains("file")) {
        c.material = ExperimentConfig::MaterialKind::file;
        c.material_file = m.at("file").get<std::string>();
      } else if (m.contains("homogeneous")) {
        c.material = ExperimentConfig::MaterialKind::homogeneous;
        read_opt(m.at("homogeneous"), "E", c.homogeneous_E);
      } else if (m.contains("synth")) {
        c.material = ExperimentConfig::MaterialKind::synth;
        const json& s = m.at("synth");
        read_opt(s, "background", c.synth.background);
        read_opt(s, "contrast", c.synth.contrast);
        read_opt(s, "channels", c.synth.channels);
        read_opt(s, "inclusions", c.synth.inclusions);
        read_opt(s, "channel_width", c.synth.channel_width);
        read_opt(s, "seed", c.synth.seed);
      } else {
        throw ConfigError("material needs one of file, synth, homogeneous");
      }
    }
    if (j.contains("scalars")) {
      const json& s = j.at("scalars");
      read_opt(s, "alpha", c.scalars.alpha);
      read_opt(s, "M", c.scalars.M);
      read_opt(s, "nu", c.scalars.nu);
      read_opt(s, "nu_p", c.scalars.nu_p);
    }
    if (j.contains("time")) {
      read_opt(j.at("time"), "tau", c.tau);
      read_opt(j.at("time"), "T", c.T);
    }
    if (j.contains("offline")) {
      const json& o = j.at("offline");
      if (o.contains("J")) c.J_u = c.J_p = o.at("J").get<int>();
      read_opt(o, "J_u", c.J_u);
      read_opt(o, "J_p", c.J_p);
      read_opt(o, "ell", c.ell_offline);
    }
    if (j.contains("online")) {
      const json& o = j.at("online");
      read_opt(o, "theta", c.online.theta);
      read_opt(o, "gamma", c.online.gamma);
      read_opt(o, "ell", c.online.layers);
      read_opt(o, "iterations", c.online.iterations);
      read_opt(o, "filter", c.online.filter);
      if (o.contains("strategy")) c.online.strategy = parse_strategy(o.at("strategy").get<std::string>());
      if (o.contains("tol")) c.online.tol = o.at("tol").get<double>();
      if (o.contains("eps")) c.online.eps = o.at("eps").get<double>();
      if (o.contains("schedule")) {
        const json& s = o.at("schedule");
        if (s.is_object()) {
          c.schedule.kind = Schedule::Kind::every;
          c.schedule.every = s.at("every").get<int>();
        } else {
          const std::string v = s.get<std::string>();
          if (v == "final") c.schedule.kind = Schedule::Kind::final_step;
          else if (v == "none") c.schedule.kind = Schedule::Kind::none;
          else throw ConfigError("schedule must be \"final\", \"none\" or {\"every\": k}");
        }
      }
    }
    if (j.contains("source")) {
      const json& s = j.at("source");
      const std::string kind = s.at("kind").get<std::string>();
      if (kind == "constant") c.source = ExperimentConfig::SourceKind::constant;
      else if (kind == "sine") c.source = ExperimentConfig::SourceKind::sine;
      else if (kind == "time_sine") c.source = ExperimentConfig::SourceKind::time_sine;
      else if (kind == "table") c.source = ExperimentConfig::SourceKind::table;
      else throw ConfigError("unknown source kind '" + kind + "'");
      if (s.contains("value")) c.source_value = s.at("value").get<double>();
      else if (s.contains("scale")) c.source_value = s.at("scale").get<double>();
      read_opt(s, "file", c.source_file);
    }
    if (j.contains("initial_pressure")) {
      const std::string v = j.at("initial_pressure").get<std::string>();
      if (v == "bubble") c.initial = ExperimentConfig::InitialPressure::bubble;
      else if (v == "skewed_bubble") c.initial = ExperimentConfig::InitialPressure::skewed_bubble;
      else if (v == "zero") c.initial = ExperimentConfig::InitialPressure::zero;
      else throw ConfigError("unknown initial_pressure '" + v + "'");
    }
    if (j.contains("output")) {
      const json& o = j.at("output");
      read_opt(o, "dir", c.output_dir);
      read_opt(o, "snapshots", c.snapshots);
      read_opt(o, "dump_basis", c.dump_basis);
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    if (j.contains("seed") && c.material == ExperimentConfig::MaterialKind::synth &&
        !(j.contains("material") && j.at("material").at("synth").contains("seed")))
      c.synth.seed = c.seed;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["mesh"] = {{"Ncx", c.ncx}, {"Ncy", c.ncy}, {"refinement", c.refinement}};
  switch (c.material) {
  case ExperimentConfig::MaterialKind::file: j["material"] = {{"file", c.material_file}}; break;
  case ExperimentConfig::MaterialKind::homogeneous:
    j["material"] = {{"homogeneous", {{"E", c.homogeneous_E}}}};
    break;
  case ExperimentConfig::MaterialKind::synth:
    j["material"] = {{"synth",
                      {{"background", c.synth.background},
                       {"contrast", c.synth.contrast},
                       {"channels", c.synth.channels},
                       {"inclusions", c.synth.inclusions},
                       {"channel_width", c.synth.channel_width},
                       {"seed", c.synth.seed}}}};
    break;
  }
  j["scalars"] = {{"alpha", c.scalars.alpha}, {"M", c.scalars.M}, {"nu", c.scalars.nu},
                  {"nu_p", c.scalars.nu_p}};
  j["time"] = {{"tau", c.tau}, {"T", c.T}};
  j["offline"] = {{"J_u", c.J_u}, {"J_p", c.J_p}, {"ell", c.ell_offline}};
  json online = {{"theta", c.online.theta},
                 {"gamma", c.online.gamma},
                 {"ell", c.online.layers},
                 {"strategy", to_string(c.online.strategy)},
                 {"iterations", c.online.iterations},
                 {"filter", c.online.filter}};
  if (c.online.tol) online["tol"] = *c.online.tol;
  if (c.online.eps) online["eps"] = *c.online.eps;
  switch (c.schedule.kind) {
  case Schedule::Kind::none: online["schedule"] = "none"; break;
  case Schedule::Kind::final_step: online["schedule"] = "final"; break;
  case Schedule::Kind::every: online["schedule"] = {{"every", c.schedule.every}}; break;
  }
  j["online"] = online;
  json source = {{"kind", source_name(c.source)}};
  if (c.source == ExperimentConfig::SourceKind::constant) source["value"] = c.source_value;
  else if (c.source == ExperimentConfig::SourceKind::table) source["file"] = c.source_file;
  else source["scale"] = c.source_value;
  j["source"] = source;
  j["initial_pressure"] = initial_name(c.initial);
  j["output"] = {{"dir", c.output_dir}, {"snapshots", c.snapshots}, {"dump_basis", c.dump_basis}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.material = ExperimentConfig::MaterialKind::synth;
  c.synth.contrast = 1e4;
  c.schedule.kind = Schedule::Kind::final_step;
  c.online.iterations = 5;
  if (name == "example1" || name == "example2") {
    c.tau = 0.05;
    c.source = ExperimentConfig::SourceKind::constant;
    c.source_value = 1.0;
    c.initial = ExperimentConfig::InitialPressure::bubble;
    if (name == "example2") c.scalars.nu_p = 0.49;
  } else if (name == "example3" || name == "example4") {
    c.ncx = c.ncy = 20;
    c.tau = 0.02;
    c.source = name == "example3" ? ExperimentConfig::SourceKind::sine
                                  : ExperimentConfig::SourceKind::time_sine;
    c.initial = ExperimentConfig::InitialPressure::skewed_bubble;
    c.online.layers = 3;
    c.online.iterations = 3;
    c.schedule = {Schedule::Kind::every, 5};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

Vector Prepared::load(int n) const { return assemble_load(grid, source, time.t(n)); }

std::unique_ptr<Prepared> prepare(const ExperimentConfig& config) {
  config.validate();
  parallel::set_threads(config.threads);
  auto prep = std::make_unique<Prepared>();
  prep->config = config;
  prep->time = TimeGrid::from_final_time(config.tau, config.T);

  const auto t0 = std::chrono::steady_clock::now();
  switch (config.material) {
  case ExperimentConfig::MaterialKind::file: {
    const fs::path header = resolve(config.base_dir, config.material_file);
    prep->grid = field_grid(header);
    prep->field = load_field(header);
    if (prep->grid.ncx() != config.ncx || prep->grid.ncy() != config.ncy ||
        prep->grid.refinement() != config.refinement)
      throw ConfigError("material file mesh does not match the configured mesh");
    BiotScalars s = config.scalars;
    prep->field = MaterialField(prep->field.nx(), prep->field.ny(), prep->field.E(),
                                prep->field.kappa(), s);
    break;
  }
  case ExperimentConfig::MaterialKind::synth:
    prep->grid = GridPair(config.ncx, config.ncy, config.refinement);
    prep->field = synth_channels(prep->grid, config.synth, config.scalars);
    break;
  case ExperimentConfig::MaterialKind::homogeneous:
    prep->grid = GridPair(config.ncx, config.ncy, config.refinement);
    prep->field = homogeneous_field(prep->grid, config.homogeneous_E, config.scalars);
    break;
  }
  prep->field.check_matches(prep->grid);

  switch (config.source) {
  case ExperimentConfig::SourceKind::constant:
    prep->source = SourceTerm::constant(config.source_value);
    break;
  case ExperimentConfig::SourceKind::sine:
    prep->source = SourceTerm::separable_sine(config.source_value);
    break;
  case ExperimentConfig::SourceKind::time_sine:
    prep->source = SourceTerm::time_sine(config.source_value);
    break;
  case ExperimentConfig::SourceKind::table: {
    const auto rows = read_csv_matrix(resolve(config.base_dir, config.source_file));
    std::vector<double> values;
    if (static_cast<int>(rows.size()) != prep->grid.nfy())
      throw ConfigError("source table must have one row per fine cell row");
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != prep->grid.nfx())
        throw ConfigError("source table must have one column per fine cell column");
      values.insert(values.end(), r.begin(), r.end());
    }
    prep->source = SourceTerm::cell_table(std::move(values));
    break;
  }
  }

  prep->pou = std::make_unique<PartitionOfUnity>(prep->grid);
  prep->ops = assemble_operators(prep->grid, prep->field, *prep->pou);
  prep->aux = build_aux_basis(prep->grid, prep->field, config.J_u, config.J_p);
  prep->diagnostics = spectral_diagnostics(prep->aux, config.ell_offline);
  prep->offline = build_offline_basis(prep->grid, prep->ops, prep->aux, config.ell_offline);
  prep->seconds_offline = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  ScalarFunction p0;
  switch (config.initial) {
  case ExperimentConfig::InitialPressure::bubble:
    p0 = [](double x, double y) { return 100.0 * x * (1 - x) * y * (1 - y); };
    break;
  case ExperimentConfig::InitialPressure::skewed_bubble:
    p0 = [](double x, double y) { return 100.0 * x * x * (1 - x) * y * y * (1 - y); };
    break;
  case ExperimentConfig::InitialPressure::zero:
    p0 = [](double, double) { return 0.0; };
    break;
  }
  prep->fine_initial = initial_state(prep->grid, prep->ops, p0);
  const Prepared* self = prep.get();
  prep->reference = run_fine(prep->ops, prep->time, [self](int n) { return self->load(n); },
                             prep->fine_initial);
  prep->seconds_reference = seconds_since(t1);
  return prep;
}

VariantResult run_variant(const Prepared& prep, const OnlineConfig& online,
                          const Schedule& schedule, const std::string& name) {
  online.validate();
  const auto t0 = std::chrono::steady_clock::now();
  VariantResult out;
  out.name = name;
  out.online = online;
  out.schedule = schedule;
  out.space = prep.offline;

  const RegionSet regions(prep.grid, *prep.pou, online.strategy);
  std::unique_ptr<IndicatorEngine> engine;
  if (schedule.kind != Schedule::Kind::none)
    engine = std::make_unique<IndicatorEngine>(prep.grid, prep.ops, regions);
  OnlineContext ctx{&prep.grid, &prep.ops, &prep.aux, &regions, engine.get(), prep.time.tau};

  const int N = prep.time.N;
  auto record = [&](int n, int k, int du, int dp, double eta, const Vector& u, const Vector& p) {
    const EnergyErrors e = energy_errors(prep.ops, u, p, prep.reference.u[n], prep.reference.p[n]);
    HistoryRow row;
    row.n = n;
    row.k = k;
    row.dof_u = du;
    row.dof_p = dp;
    row.e_u = e.e_u;
    row.e_p = e.e_p;
    row.eta = eta;
    row.strategy = to_string(online.strategy);
    row.theta = online.theta;
    row.gamma = online.gamma;
    row.ell = online.layers;
    out.history.rows.push_back(row);
  };

  StepHook hook = [&](StepContext& c) {
    if (!schedule.due(c.n, N)) return;
    const AdaptiveResult res =
        adaptive_loop(ctx, *c.space, *c.state, *c.u_prev, *c.p_prev, *c.load, c.n, online);
    for (const LevelRecord& l : res.levels) record(l.n, l.k, l.dof_u, l.dof_p, l.eta, l.u, l.p);
    *c.state = res.state;
  };

  auto load = [&prep](int n) { return prep.load(n); };
  out.trajectory = run_multiscale(prep.ops, out.space, prep.time, load, prep.fine_initial, hook,
                                  &prep.reference);

  if (schedule.kind == Schedule::Kind::none) {
    // Offline-only runs still report the final-time errors as a k=0 row.
    const Vector& u = out.trajectory.u[N];
    const Vector& p = out.trajectory.p[N];
    const Vector& up = out.trajectory.u[N - 1];
    const Vector& pp = out.trajectory.p[N - 1];
    const ResidualSet r =
        compute_residuals(prep.ops, u, p, up, pp, prep.load(N), prep.time.tau, N, 0);
    const IndicatorEngine global(prep.grid, prep.ops, regions);
    const double eta = global.global_norm(Family::displacement, r.r1) +
                       global.global_norm(Family::pressure, r.r2);
    record(N, 0, out.space.dof_u(), out.space.dof_p(), eta, u, p);
  }

  for (int n = 0; n <= N; ++n) {
    const EnergyErrors e = energy_errors(prep.ops, out.trajectory.u[n], out.trajectory.p[n],
                                         prep.reference.u[n], prep.reference.p[n]);
    out.errors.push_back({n, out.trajectory.dof_u[n], out.trajectory.dof_p[n], e.e_u, e.e_p});
  }
  out.seconds = seconds_since(t0);
  return out;
}

std::string errors_csv(const std::vector<StepError>& errors) {
  std::string s = "n,dof_u,dof_p,e_u,e_p\n";
  char buf[128];
  for (const StepError& e : errors) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6g,%.6g\n", e.n, e.dof_u, e.dof_p, e.e_u, e.e_p);
    s += buf;
  }
  return s;
}

void write_artifacts(const Prepared& prep, const VariantResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  write_history_csv(result.history, dir / "history.csv");
  write_history_json(result.history, dir / "history.json");
  {
    std::ofstream out(dir / "errors.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "errors.csv").string());
    out << errors_csv(result.errors);
  }
  {
    std::ofstream out(dir / "table.txt", std::ios::binary);
    out << format_table(result.history);
  }
  const int N = prep.time.N;
  if (prep.config.snapshots) {
    export_field_snapshot(prep.grid, prep.reference.u[N], prep.reference.p[N], dir / "snapshots",
                          "reference");
    export_field_snapshot(prep.grid, result.trajectory.u[N], result.trajectory.p[N],
                          dir / "snapshots", "multiscale");
  }
  if (prep.config.dump_basis) dump_basis(result.space, dir / "basis");

  json manifest;
  manifest["config"] = config_to_json(prep.config);
  manifest["variant"] = {{"name", result.name},
                         {"strategy", to_string(result.online.strategy)},
                         {"theta", result.online.theta},
                         {"gamma", result.online.gamma},
                         {"ell", result.online.layers},
                         {"iterations", result.online.iterations},
                         {"schedule", result.schedule.describe()}};
  manifest["grid"] = {{"fine_nodes_x", prep.grid.fine_nodes_x()},
                      {"fine_nodes_y", prep.grid.fine_nodes_y()},
                      {"dof_u_fine", prep.ops.n_u()},
                      {"dof_p_fine", prep.ops.n_p()}};
  manifest["time"] = {{"tau", prep.time.tau}, {"N", prep.time.N}, {"T", prep.time.T()}};
  const auto& d = prep.diagnostics;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  manifest["spectral"] = {{"lambda_u", num(d.lambda_u)}, {"lambda_p", num(d.lambda_p)},
                          {"Lambda", num(d.Lambda)}, {"layers", d.layers}, {"C_e", num(d.C_e)}};
  manifest["final_space"] = {{"dof_u", result.space.dof_u()}, {"dof_p", result.space.dof_p()}};
  manifest["files"] = {"history.csv", "history.json", "errors.csv", "table.txt"};
  write_json(manifest, dir / "manifest.json");
}

} // namespace cem
