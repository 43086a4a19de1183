#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cemporo/cli.hpp"

using namespace cem;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cemporo_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_config() {
  return json{{"mesh", {{"Ncx", 3}, {"Ncy", 3}, {"refinement", 3}}},
              {"material", {{"synth", {{"contrast", 100.0}, {"channels", 2}, {"inclusions", 2}}}}},
              {"time", {{"tau", 0.1}, {"T", 0.5}}},
              {"offline", {{"J", 2}, {"ell", 1}}},
              {"online", {{"theta", 0.3}, {"gamma", 0.3}, {"ell", 1}, {"iterations", 2}, {"schedule", "final"}}},
              {"source", {{"kind", "constant"}, {"value", 1.0}}},
              {"output", {{"snapshots", false}}},
              {"seed", 3}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cemporo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  write_json(j, p);
  return p;
}

} // namespace

TEST_CASE("config parsing, defaults and round trip") {
  const ExperimentConfig c = config_from_json(small_config());
  CHECK(c.ncx == 3);
  CHECK(c.J_u == 2);
  CHECK(c.J_p == 2);
  CHECK(c.synth.seed == 3);
  CHECK(c.synth.contrast == 100.0);
  CHECK(c.schedule.kind == Schedule::Kind::final_step);
  CHECK(c.online.layers == 1);
  const ExperimentConfig d = config_from_json(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));

  json j = small_config();
  j["online"]["schedule"] = {{"every", 2}};
  j["online"]["strategy"] = "element";
  j["material"]["synth"]["seed"] = 9;
  const ExperimentConfig e = config_from_json(j);
  CHECK(e.schedule.kind == Schedule::Kind::every);
  CHECK(e.schedule.every == 2);
  CHECK(e.online.strategy == Strategy::element);
  CHECK(e.synth.seed == 9);
}

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    json j = small_config();
    edit(j);
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  };
  bad([](json& j) { j["mesh"]["Ncx"] = 0; });
  bad([](json& j) { j["time"]["T"] = 0.55; });
  bad([](json& j) { j["online"]["theta"] = 1.5; });
  bad([](json& j) { j["online"]["schedule"] = "sometimes"; });
  bad([](json& j) { j["source"]["kind"] = "gaussian"; });
  bad([](json& j) { j["offline"]["J"] = 100; });
  bad([](json& j) { j["scalars"] = {{"nu_p", 0.5}}; });
  bad([](json& j) { j["mesh"]["Ncx"] = "three"; });
  bad([](json& j) { j["online"]["tol"] = 1e-3; });
}

TEST_CASE("presets") {
  const ExperimentConfig a = preset("example1");
  CHECK(a.ncx == 10);
  CHECK(a.refinement == 10);
  CHECK(a.tau == 0.05);
  CHECK(TimeGrid::from_final_time(a.tau, a.T).N == 20);
  CHECK(a.synth.contrast == 1e4);
  CHECK(preset("example2").scalars.nu_p == 0.49);
  const ExperimentConfig c = preset("example3");
  CHECK(c.ncx == 20);
  CHECK(TimeGrid::from_final_time(c.tau, c.T).N == 50);
  CHECK(c.schedule.kind == Schedule::Kind::every);
  CHECK(c.schedule.every == 5);
  CHECK(preset("example4").source == ExperimentConfig::SourceKind::time_sine);
  CHECK_THROWS_AS(preset("example9"), ConfigError);
}

TEST_CASE("schedules") {
  const Schedule f{Schedule::Kind::final_step, 0};
  CHECK(f.due(5, 5));
  CHECK_FALSE(f.due(4, 5));
  const Schedule e{Schedule::Kind::every, 2};
  CHECK(e.due(2, 5));
  CHECK_FALSE(e.due(5, 5));
  CHECK_FALSE(Schedule{Schedule::Kind::none, 0}.due(5, 5));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(cli({}) == exit_config);
  CHECK(cli({"frobnicate"}) == exit_config);
  CHECK(cli({"run"}) == exit_config);
  CHECK(cli({"run", "--config", (dir / "missing.json").string()}) == exit_config);
  CHECK(cli({"run", "--preset", "example9"}) == exit_config);
  CHECK(cli({"run", "--preset", "example1", "--threads", "0"}) == exit_config);
  json j = small_config();
  j["time"]["tau"] = -1;
  CHECK(cli({"run", "--config", write_config(dir, j).string()}) == exit_config);
  {
    std::ofstream out(dir / "broken.json");
    out << "{";
  }
  CHECK(cli({"run", "--config", (dir / "broken.json").string()}) == exit_config);
  CHECK(cli({"report", "--in", (dir / "nothing").string()}) == exit_config);
  fs::remove_all(dir);
}

TEST_CASE("run writes a final-step history with one row per level") {
  const fs::path dir = scratch("run");
  const fs::path cfg = write_config(dir, small_config());
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "out").string()}) == exit_ok);
  const EnrichmentHistory h = read_history_csv(dir / "out" / "history.csv");
  REQUIRE(h.rows.size() == 3);
  CHECK(h.well_formed());
  for (int k = 0; k < 3; ++k) {
    CHECK(h.rows[k].n == 5);
    CHECK(h.rows[k].k == k);
  }
  CHECK(h.rows[0].dof_u == 9 * 2);
  CHECK(h.rows[2].e_u < h.rows[0].e_u);
  CHECK(fs::exists(dir / "out" / "history.json"));
  CHECK(fs::exists(dir / "out" / "errors.csv"));
  CHECK(fs::exists(dir / "out" / "table.txt"));
  const json m = read_json(dir / "out" / "manifest.json");
  CHECK(m["time"]["N"] == 5);
  CHECK(m["final_space"]["dof_u"] == h.rows.back().dof_u);
  CHECK_FALSE(fs::exists(dir / "out" / "snapshots"));

  // report reads it back
  REQUIRE(cli({"report", "--in", (dir / "out").string(), "--out", (dir / "table.txt").string()}) == exit_ok);
  CHECK(slurp(dir / "table.txt").find("k=2, (") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("enrichment schedules select the time levels") {
  json j = small_config();
  j["online"]["schedule"] = {{"every", 2}};
  j["online"]["iterations"] = 1;
  ExperimentConfig c = config_from_json(j);
  const auto prep = prepare(c);
  const VariantResult every = run_variant(*prep, c.online, c.schedule);
  std::set<int> ns;
  for (const HistoryRow& r : every.history.rows) ns.insert(r.n);
  CHECK(ns == std::set<int>{2, 4});
  CHECK(every.history.rows.size() == 4);
  CHECK(every.errors.size() == 6);

  const VariantResult none = run_variant(*prep, c.online, Schedule{Schedule::Kind::none, 0});
  REQUIRE(none.history.rows.size() == 1);
  CHECK(none.history.rows[0].n == 5);
  CHECK(none.history.rows[0].k == 0);
  CHECK(none.space.dof_u() == prep->offline.dof_u());
  CHECK(none.history.rows[0].e_u == doctest::Approx(none.errors.back().e_u));
  CHECK(none.history.rows[0].eta > 0.0);

  c.online.iterations = 5;
  const VariantResult fin = run_variant(*prep, c.online, Schedule{});
  CHECK(fin.history.rows.size() == 6);
}

TEST_CASE("make-field is deterministic and honours --seed") {
  const fs::path dir = scratch("field");
  const fs::path cfg = write_config(dir, small_config());
  REQUIRE(cli({"make-field", "--config", cfg.string(), "--out", (dir / "a").string()}) == exit_ok);
  REQUIRE(cli({"make-field", "--config", cfg.string(), "--out", (dir / "b" / "f.json").string()}) == exit_ok);
  REQUIRE(cli({"make-field", "--config", cfg.string(), "--seed", "77", "--out", (dir / "c").string()}) == exit_ok);
  CHECK(slurp(dir / "a" / "field.E.csv") == slurp(dir / "b" / "f.E.csv"));
  CHECK(slurp(dir / "a" / "field.E.csv") != slurp(dir / "c" / "field.E.csv"));

  // a run on the written field equals a run on the synthetic description
  json j = small_config();
  j["material"] = {{"file", "a/field.json"}};
  const fs::path cfg2 = dir / "from_file.json";
  write_json(j, cfg2);
  REQUIRE(cli({"run", "--config", cfg2.string(), "--out", (dir / "r1").string()}) == exit_ok);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "r2").string()}) == exit_ok);
  CHECK(slurp(dir / "r1" / "history.csv") == slurp(dir / "r2" / "history.csv"));
  fs::remove_all(dir);
}

TEST_CASE("compare runs every variant on one setup") {
  const fs::path dir = scratch("compare");
  const fs::path cfg = write_config(dir, small_config());
  write_json(json::array({{{"name", "a"}, {"strategy", "element"}, {"theta", 0.5}},
                          {{"name", "b"}, {"strategy", "element"}, {"theta", 0.5}}}),
             dir / "variants.json");
  REQUIRE(cli({"compare", "--config", cfg.string(), "--variants", (dir / "variants.json").string(),
               "--out", (dir / "cmp").string()}) == exit_ok);
  const std::string a = slurp(dir / "cmp" / "a" / "history.csv");
  CHECK(a == slurp(dir / "cmp" / "b" / "history.csv"));
  const std::string merged = slurp(dir / "cmp" / "compare.csv");
  CHECK(merged.rfind("variant,n,k,", 0) == 0);
  CHECK(merged.find("\na,5,0,") != std::string::npos);
  CHECK(merged.find("\nb,5,2,") != std::string::npos);

  write_json(json::array({{{"name", "x"}}, {{"name", "x"}}}), dir / "dup.json");
  CHECK(cli({"compare", "--config", cfg.string(), "--variants", (dir / "dup.json").string(), "--out",
             (dir / "cmp2").string()}) == exit_config);
  CHECK(default_variants().size() == 4);
  fs::remove_all(dir);
}
