#include "cemporo/coeff.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cemporo/types.hpp"

namespace cem {

namespace fs = std::filesystem;
using nlohmann::json;

LameParameters lame_from_E(double E, double nu_p) {
  if (!(E > 0.0)) throw ConfigError("Young's modulus must be positive");
  if (!(nu_p > -1.0 && nu_p < 0.5))
    throw ConfigError("Poisson ratio must lie in (-1, 0.5); got " + std::to_string(nu_p));
  return {nu_p / ((1.0 - 2.0 * nu_p) * (1.0 + nu_p)) * E, E / (2.0 * (1.0 + nu_p))};
}

MaterialField::MaterialField(int nx, int ny, std::vector<double> E, std::vector<double> kappa,
                             BiotScalars scalars)
    : nx_(nx), ny_(ny), E_(std::move(E)), kappa_(std::move(kappa)), scalars_(scalars) {
  const auto n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  if (E_.size() != n || kappa_.size() != n)
    throw ConfigError("material arrays do not match the fine-cell count " + std::to_string(n));
  if (!(scalars_.alpha >= 0.0 && scalars_.alpha <= 1.0))
    throw ConfigError("alpha must lie in [0, 1]");
  if (!(scalars_.M > 0.0)) throw ConfigError("Biot modulus must be positive");
  if (!(scalars_.nu > 0.0)) throw ConfigError("viscosity must be positive");
  lambda_.resize(n);
  mu_.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (!(kappa_[c] > 0.0)) throw ConfigError("permeability must be positive in every cell");
    const auto lm = lame_from_E(E_[c], scalars_.nu_p);
    lambda_[c] = lm.lambda;
    mu_[c] = lm.mu;
  }
}

void MaterialField::check_matches(const GridPair& grid) const {
  if (nx_ != grid.nfx() || ny_ != grid.nfy())
    throw ConfigError("material field is " + std::to_string(nx_) + "x" + std::to_string(ny_) +
                      " but the fine grid is " + std::to_string(grid.nfx()) + "x" +
                      std::to_string(grid.nfy()));
}

MaterialField homogeneous_field(const GridPair& grid, double E, BiotScalars scalars) {
  std::vector<double> values(grid.num_fine_cells(), E);
  return MaterialField(grid.nfx(), grid.nfy(), values, values, scalars);
}

MaterialField synth_channels(const GridPair& grid, const ChannelSpec& spec, BiotScalars scalars) {
  if (!(spec.contrast >= 1.0)) throw ConfigError("contrast must be >= 1");
  if (!(spec.background > 0.0)) throw ConfigError("background must be positive");
  const int nx = grid.nfx(), ny = grid.nfy();
  std::vector<double> E(grid.num_fine_cells(), spec.background);
  const double high = spec.background * spec.contrast;

  // Raw engine output only: distribution objects are not portable across
  // standard libraries, the engine sequence is.
  std::mt19937_64 rng(spec.seed);
  auto draw = [&rng](int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  const int width =
      spec.channel_width > 0 ? spec.channel_width : std::max(1, grid.refinement() / 5);
  for (int c = 0; c < spec.channels; ++c) {
    const bool horizontal = (c % 2 == 0);
    const int across = horizontal ? ny : nx;
    const int along = horizontal ? nx : ny;
    const int pos = draw(0, std::max(0, across - width));
    const int start = draw(0, along / 10);
    const int stop = along - draw(0, along / 10);
    for (int a = start; a < stop; ++a)
      for (int w = pos; w < std::min(across, pos + width); ++w) {
        const int cx = horizontal ? a : w;
        const int cy = horizontal ? w : a;
        E[grid.fine_cell(cx, cy)] = high;
      }
  }
  for (int k = 0; k < spec.inclusions; ++k) {
    const int sx = draw(1, std::max(1, grid.refinement() / 2));
    const int sy = draw(1, std::max(1, grid.refinement() / 2));
    const int x0 = draw(0, nx - sx);
    const int y0 = draw(0, ny - sy);
    for (int y = y0; y < y0 + sy; ++y)
      for (int x = x0; x < x0 + sx; ++x) E[grid.fine_cell(x, y)] = high;
  }
  return MaterialField(nx, ny, E, E, scalars);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const fs::path& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("bad number '" + std::string(s) + "' in " + where.string());
  return v;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows, int nx, int ny,
                            const fs::path& where) {
  if (static_cast<int>(rows.size()) != ny || (ny > 0 && static_cast<int>(rows[0].size()) != nx))
    throw ConfigError(where.string() + ": expected " + std::to_string(ny) + " rows of " +
                      std::to_string(nx) + " values, got " + std::to_string(rows.size()) +
                      " rows of " + std::to_string(rows.empty() ? 0 : rows[0].size()));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

} // namespace

std::vector<std::vector<double>> read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::size_t begin = 0;
    for (;;) {
      const auto comma = line.find(',', begin);
      row.push_back(parse_double(std::string_view(line).substr(begin, comma - begin), path));
      if (comma == std::string::npos) break;
      begin = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path.string() + ": ragged CSV rows");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_csv_matrix(const fs::path& path, const std::vector<double>& values, int cols,
                      int rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << format_double(values[static_cast<std::size_t>(r) * cols + c]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_field(const MaterialField& field, const GridPair& grid, const fs::path& header_path) {
  field.check_matches(grid);
  const auto stem = header_path.stem().string();
  const auto dir = header_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const std::string e_name = stem + ".E.csv";
  const std::string k_name = stem + ".kappa.csv";
  write_csv_matrix(dir / e_name, field.E(), field.nx(), field.ny());
  write_csv_matrix(dir / k_name, field.kappa(), field.nx(), field.ny());

  json h;
  h["Ncx"] = grid.ncx();
  h["Ncy"] = grid.ncy();
  h["refinement"] = grid.refinement();
  h["nu_p"] = field.nu_p();
  h["alpha"] = field.alpha();
  h["M"] = field.M();
  h["nu"] = field.nu();
  h["E"] = e_name;
  h["kappa"] = k_name;
  std::ofstream out(header_path);
  if (!out) throw std::runtime_error("cannot write " + header_path.string());
  out << h.dump(2) << '\n';
}

namespace {
json read_header(const fs::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw ConfigError("cannot open field header " + header_path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed field header " + header_path.string() + ": " + e.what());
  }
}
} // namespace

GridPair field_grid(const fs::path& header_path) {
  const json h = read_header(header_path);
  try {
    return GridPair(h.at("Ncx").get<int>(), h.at("Ncy").get<int>(),
                    h.at("refinement").get<int>());
  } catch (const json::exception& e) {
    throw ConfigError("field header missing grid keys: " + std::string(e.what()));
  }
}

MaterialField load_field(const fs::path& header_path) {
  const json h = read_header(header_path);
  const GridPair grid = field_grid(header_path);
  BiotScalars s;
  std::string e_name, k_name;
  try {
    s.nu_p = h.at("nu_p").get<double>();
    s.alpha = h.at("alpha").get<double>();
    s.M = h.at("M").get<double>();
    s.nu = h.at("nu").get<double>();
    e_name = h.at("E").get<std::string>();
    k_name = h.value("kappa", e_name);
  } catch (const json::exception& e) {
    throw ConfigError("field header incomplete: " + std::string(e.what()));
  }
  const auto dir = header_path.parent_path();
  const int nx = grid.nfx(), ny = grid.nfy();
  auto E = flatten(read_csv_matrix(dir / e_name), nx, ny, dir / e_name);
  auto kappa = flatten(read_csv_matrix(dir / k_name), nx, ny, dir / k_name);
  return MaterialField(nx, ny, std::move(E), std::move(kappa), s);
}

} // namespace cem
