#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cemporo/grid.hpp"

namespace cem {

struct LameParameters {
  double lambda;
  double mu;
};

/// Lame parameters from Young's modulus and Poisson ratio.
LameParameters lame_from_E(double E, double nu_p);

/// Scalar material constants shared by the whole domain.
struct BiotScalars {
  double nu_p = 0.2;  ///< Poisson ratio, in (-1, 0.5)
  double alpha = 0.9; ///< Biot-Willis coefficient, in [0, 1]
  double M = 1.0;     ///< Biot modulus
  double nu = 1.0;    ///< fluid viscosity
};

/// Per-fine-cell heterogeneous coefficients. Immutable once built.
class MaterialField {
public:
  MaterialField() = default;
  /// Validates positivity and shapes, then derives the Lame fields.
  MaterialField(int nx, int ny, std::vector<double> E, std::vector<double> kappa,
                BiotScalars scalars);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }

  const std::vector<double>& E() const { return E_; }
  const std::vector<double>& kappa() const { return kappa_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& mu() const { return mu_; }
  const BiotScalars& scalars() const { return scalars_; }

  double nu_p() const { return scalars_.nu_p; }
  double alpha() const { return scalars_.alpha; }
  double M() const { return scalars_.M; }
  double nu() const { return scalars_.nu; }

  void check_matches(const GridPair& grid) const;

private:
  int nx_ = 0, ny_ = 0;
  std::vector<double> E_, kappa_, lambda_, mu_;
  BiotScalars scalars_;
};

MaterialField homogeneous_field(const GridPair& grid, double E, BiotScalars scalars);

/// Axis-aligned high-contrast layout. Channels are full-length strips of
/// `channel_width` fine cells; inclusions are small rectangles.
struct ChannelSpec {
  double background = 1.0;
  double contrast = 1.0e4;
  int channels = 4;
  int inclusions = 8;
  int channel_width = 1; ///< fine cells; 0 picks about a fifth of a coarse cell
  std::uint64_t seed = 1;
};

/// Synthetic coefficient field with kappa = E. Bit-identical for a fixed spec.
MaterialField synth_channels(const GridPair& grid, const ChannelSpec& spec, BiotScalars scalars);

/// Writes `<stem>.json` (header) and `<stem>.E.csv`, `<stem>.kappa.csv`.
void save_field(const MaterialField& field, const GridPair& grid,
                const std::filesystem::path& header_path);

/// Reads a field from its JSON header; the header fixes the grid shape and
/// names the CSV files (relative to the header's directory).
MaterialField load_field(const std::filesystem::path& header_path);

/// Grid recorded in a field header.
GridPair field_grid(const std::filesystem::path& header_path);

/// One CSV matrix, rows = y, columns = x. Throws on ragged rows.
std::vector<std::vector<double>> read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const std::vector<double>& values,
                      int cols, int rows);

} // namespace cem
