#include "cemporo/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cemporo/coeff.hpp"

namespace cem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double energy(const SparseMatrix& K, const Vector& v) {
  return std::sqrt(std::max(0.0, v.dot(K * v)));
}

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* kHeader = "n,k,dof_u,dof_p,e_u,e_p,eta,strategy,theta,gamma,ell";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("bad number '" + s + "' in history");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw ConfigError("bad integer '" + s + "' in history");
  return v;
}

} // namespace

EnergyErrors energy_errors(const OperatorSet& ops, const Vector& u, const Vector& p,
                           const Vector& u_ref, const Vector& p_ref) {
  EnergyErrors e;
  const double nu = energy(ops.A, u_ref), np = energy(ops.B, p_ref);
  const double du = energy(ops.A, u - u_ref), dp = energy(ops.B, p - p_ref);
  e.absolute_u = !(nu > 0.0);
  e.absolute_p = !(np > 0.0);
  e.e_u = e.absolute_u ? du : du / nu;
  e.e_p = e.absolute_p ? dp : dp / np;
  return e;
}

bool EnrichmentHistory::well_formed() const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const HistoryRow& a = rows[i - 1];
    const HistoryRow& b = rows[i];
    if (b.n < a.n) return false;
    if (b.n == a.n) {
      if (b.k <= a.k) return false;
      if (b.dof_u < a.dof_u || b.dof_p < a.dof_p) return false;
    }
  }
  return true;
}

double round_sig6(double v) { return std::stod(sig6(v)); }

std::string history_csv(const EnrichmentHistory& h) {
  std::string out = std::string(kHeader) + "\n";
  for (const HistoryRow& r : h.rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.k) + "," + std::to_string(r.dof_u) + "," +
           std::to_string(r.dof_p) + "," + sig6(r.e_u) + "," + sig6(r.e_p) + "," + sig6(r.eta) +
           "," + r.strategy + "," + sig6(r.theta) + "," + sig6(r.gamma) + "," +
           std::to_string(r.ell) + "\n";
  }
  return out;
}

void write_history_csv(const EnrichmentHistory& h, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << history_csv(h);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EnrichmentHistory parse_history_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw ConfigError("history CSV header mismatch");
  EnrichmentHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw ConfigError("history CSV row has wrong field count: " + line);
    HistoryRow r;
    r.n = to_int(f[0]);
    r.k = to_int(f[1]);
    r.dof_u = to_int(f[2]);
    r.dof_p = to_int(f[3]);
    r.e_u = to_double(f[4]);
    r.e_p = to_double(f[5]);
    r.eta = to_double(f[6]);
    r.strategy = f[7];
    r.theta = to_double(f[8]);
    r.gamma = to_double(f[9]);
    r.ell = to_int(f[10]);
    h.rows.push_back(r);
  }
  return h;
}

EnrichmentHistory read_history_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_history_csv(ss.str());
}

json history_json(const EnrichmentHistory& h) {
  json rows = json::array();
  for (const HistoryRow& r : h.rows)
    rows.push_back({{"n", r.n},
                    {"k", r.k},
                    {"dof_u", r.dof_u},
                    {"dof_p", r.dof_p},
                    {"e_u", round_sig6(r.e_u)},
                    {"e_p", round_sig6(r.e_p)},
                    {"eta", round_sig6(r.eta)},
                    {"strategy", r.strategy},
                    {"theta", round_sig6(r.theta)},
                    {"gamma", round_sig6(r.gamma)},
                    {"ell", r.ell}});
  return json{{"rows", rows}};
}

void write_history_json(const EnrichmentHistory& h, const fs::path& path) {
  write_json(history_json(h), path);
}

EnrichmentHistory parse_history_json(const json& j) {
  EnrichmentHistory h;
  for (const json& r : j.at("rows")) {
    HistoryRow row;
    row.n = r.at("n").get<int>();
    row.k = r.at("k").get<int>();
    row.dof_u = r.at("dof_u").get<int>();
    row.dof_p = r.at("dof_p").get<int>();
    row.e_u = r.at("e_u").get<double>();
    row.e_p = r.at("e_p").get<double>();
    row.eta = r.at("eta").get<double>();
    row.strategy = r.at("strategy").get<std::string>();
    row.theta = r.at("theta").get<double>();
    row.gamma = r.at("gamma").get<double>();
    row.ell = r.at("ell").get<int>();
    h.rows.push_back(row);
  }
  return h;
}

std::string format_row(const HistoryRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "k=%d, (%d, %d), %.2f%%, %.2f%%", row.k, row.dof_u, row.dof_p,
                100.0 * row.e_u, 100.0 * row.e_p);
  return buf;
}

std::string format_table(const EnrichmentHistory& h) {
  std::string out;
  int current = -1;
  for (const HistoryRow& r : h.rows) {
    if (r.n != current) {
      current = r.n;
      out += "n=" + std::to_string(r.n) + " (" + r.strategy + ", theta=" + sig6(r.theta) +
             ", gamma=" + sig6(r.gamma) + ", ell=" + std::to_string(r.ell) + ")\n";
    }
    out += "  " + format_row(r) + "\n";
  }
  return out;
}

std::vector<double> nodal_grid(const GridPair& grid, const Vector& v, int component) {
  std::vector<double> out(static_cast<std::size_t>(grid.num_fine_nodes()), 0.0);
  const int ncomp = component < 0 ? 1 : 2;
  const int c = component < 0 ? 0 : component;
  if (v.size() != ncomp * grid.num_free_nodes())
    throw ConfigError("vector length does not match the grid");
  for (int k = 0; k < grid.num_free_nodes(); ++k) out[grid.free_nodes()[k]] = v[ncomp * k + c];
  return out;
}

void export_field_snapshot(const GridPair& grid, const Vector& u, const Vector& p,
                           const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  const int nx = grid.fine_nodes_x(), ny = grid.fine_nodes_y();
  write_csv_matrix(dir / (stem + "_ux.csv"), nodal_grid(grid, u, 0), nx, ny);
  write_csv_matrix(dir / (stem + "_uy.csv"), nodal_grid(grid, u, 1), nx, ny);
  write_csv_matrix(dir / (stem + "_p.csv"), nodal_grid(grid, p, -1), nx, ny);
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

} // namespace cem
