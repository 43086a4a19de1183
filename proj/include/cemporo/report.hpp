#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cemporo/assembly.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/types.hpp"

namespace cem {

struct EnergyErrors {
  double e_u = 0.0;
  double e_p = 0.0;
  /// Set when the reference norm is zero and the value is an absolute error.
  bool absolute_u = false;
  bool absolute_p = false;
};

/// e_u = ||u - u_ref||_A / ||u_ref||_A and e_p likewise in the B norm.
EnergyErrors energy_errors(const OperatorSet& ops, const Vector& u, const Vector& p,
                           const Vector& u_ref, const Vector& p_ref);

struct HistoryRow {
  int n = 0;
  int k = 0;
  int dof_u = 0;
  int dof_p = 0;
  double e_u = 0.0;
  double e_p = 0.0;
  double eta = 0.0;
  std::string strategy;
  double theta = 0.0;
  double gamma = 0.0;
  int ell = 0;

  bool operator==(const HistoryRow&) const = default;
};

struct EnrichmentHistory {
  std::vector<HistoryRow> rows;

  /// Rows ordered by (n, k), DOFs non-decreasing in k within one n.
  bool well_formed() const;
};

/// Values are written with 6 significant digits; `read_history_csv` of the
/// output reproduces what was written exactly.
std::string history_csv(const EnrichmentHistory& h);
void write_history_csv(const EnrichmentHistory& h, const std::filesystem::path& path);
EnrichmentHistory parse_history_csv(const std::string& text);
EnrichmentHistory read_history_csv(const std::filesystem::path& path);

nlohmann::json history_json(const EnrichmentHistory& h);
void write_history_json(const EnrichmentHistory& h, const std::filesystem::path& path);
EnrichmentHistory parse_history_json(const nlohmann::json& j);

/// Rounds to the serialized precision (6 significant digits).
double round_sig6(double v);

/// "k=0, (200, 200), 31.91%, 12.45%"
std::string format_row(const HistoryRow& row);
/// Text table of a history, one format_row line per row, grouped by n.
std::string format_table(const EnrichmentHistory& h);

/// Nodal grid (nodes_y x nodes_x, boundary included) of a scalar field or
/// of one displacement component (component < 0 means scalar).
std::vector<double> nodal_grid(const GridPair& grid, const Vector& v, int component);

/// Writes u_x, u_y and p as CSV matrices `<stem>_ux.csv`, `<stem>_uy.csv`,
/// `<stem>_p.csv` in `dir`, values in shortest round-trip form.
void export_field_snapshot(const GridPair& grid, const Vector& u, const Vector& p,
                           const std::filesystem::path& dir, const std::string& stem);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace cem
