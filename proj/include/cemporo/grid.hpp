#pragma once

#include <array>
#include <vector>

namespace cem {

/// Matched coarse/fine structured meshes on the unit square.
///
/// Fine nodes, fine cells, coarse nodes and coarse cells are all numbered
/// lexicographically with x running fastest. Homogeneous Dirichlet data is
/// imposed on every node of the outer boundary, so only interior fine nodes
/// carry degrees of freedom; `free_index` maps a fine node to its position
/// among the interior nodes (or -1 on the boundary).
class GridPair {
public:
  GridPair() = default;
  GridPair(int ncx, int ncy, int refinement);

  int ncx() const { return ncx_; }
  int ncy() const { return ncy_; }
  int refinement() const { return refinement_; }

  int nfx() const { return ncx_ * refinement_; }
  int nfy() const { return ncy_ * refinement_; }
  int fine_nodes_x() const { return nfx() + 1; }
  int fine_nodes_y() const { return nfy() + 1; }
  int num_fine_nodes() const { return fine_nodes_x() * fine_nodes_y(); }
  int num_fine_cells() const { return nfx() * nfy(); }
  int num_free_nodes() const { return static_cast<int>(free_nodes_.size()); }

  int num_coarse_cells() const { return ncx_ * ncy_; }
  int num_coarse_nodes() const { return (ncx_ + 1) * (ncy_ + 1); }
  /// Interior coarse nodes, (Ncx-1)(Ncy-1).
  int num_interior_coarse_nodes() const { return (ncx_ - 1) * (ncy_ - 1); }

  double H() const { return 1.0 / ncx_; }
  double Hx() const { return 1.0 / ncx_; }
  double Hy() const { return 1.0 / ncy_; }
  double h() const { return hx(); }
  double hx() const { return 1.0 / nfx(); }
  double hy() const { return 1.0 / nfy(); }

  int fine_node(int ix, int iy) const { return iy * fine_nodes_x() + ix; }
  int fine_cell(int cx, int cy) const { return cy * nfx() + cx; }
  int coarse_cell(int i, int j) const { return j * ncx_ + i; }
  int coarse_node(int i, int j) const { return j * (ncx_ + 1) + i; }

  std::array<int, 2> fine_node_ij(int node) const {
    return {node % fine_nodes_x(), node / fine_nodes_x()};
  }
  std::array<int, 2> fine_cell_ij(int cell) const { return {cell % nfx(), cell / nfx()}; }
  std::array<int, 2> coarse_cell_ij(int cell) const { return {cell % ncx_, cell / ncx_}; }
  std::array<int, 2> coarse_node_ij(int node) const {
    return {node % (ncx_ + 1), node / (ncx_ + 1)};
  }
  std::array<double, 2> fine_node_xy(int node) const {
    const auto [ix, iy] = fine_node_ij(node);
    return {ix * hx(), iy * hy()};
  }

  /// Corner nodes of a fine cell in counter-clockwise order starting at (x0, y0).
  std::array<int, 4> fine_cell_nodes(int cell) const;

  bool on_boundary(int node) const { return free_index_[node] < 0; }
  int free_index(int node) const { return free_index_[node]; }
  const std::vector<int>& free_index_map() const { return free_index_; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }

  /// Fine cells covered by coarse cell `coarse`, lexicographic.
  std::vector<int> fine_cells_of_coarse(int coarse) const;

private:
  int ncx_ = 0, ncy_ = 0, refinement_ = 0;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
};

GridPair build_grids(int ncx, int ncy, int refinement);

enum class PatchKind { element, neighborhood };

/// An oversampled union of coarse cells. On a structured grid every patch is
/// an axis-aligned block of coarse cells, stored as an inclusive box.
struct Patch {
  PatchKind kind = PatchKind::element;
  int seed = 0;
  int layers = 0;
  int cx0 = 0, cy0 = 0, cx1 = 0, cy1 = 0;

  std::vector<int> coarse_cells;
  std::vector<int> fine_nodes;
  /// Nodes strictly inside the block and off the outer boundary; these carry
  /// the zero-trace patch degrees of freedom.
  std::vector<int> interior_nodes;

  bool contains_cell(int i, int j) const { return i >= cx0 && i <= cx1 && j >= cy0 && j <= cy1; }
};

Patch oversample_element(const GridPair& grid, int element, int layers);
Patch oversample_neighborhood(const GridPair& grid, int coarse_node, int layers);
/// Patch made of an explicit coarse-cell box (used for the whole domain).
Patch make_box_patch(const GridPair& grid, int cx0, int cy0, int cx1, int cy1);

/// Bilinear coarse hat functions, one per coarse node (boundary nodes
/// included, so the family sums to one on the whole closed domain).
class PartitionOfUnity {
public:
  explicit PartitionOfUnity(const GridPair& grid);

  int size() const { return static_cast<int>(support_.size()); }

  /// Value of hat `i` at a physical point.
  double value(int i, double x, double y) const;
  /// Gradient of hat `i` at a physical point inside coarse cell (ci, cj).
  std::array<double, 2> gradient(int i, int ci, int cj, double x, double y) const;
  /// Value at a fine node.
  double at_node(int i, int fine_node) const;

  /// Fine nodes in the closed support of hat i and the matching values.
  const std::vector<int>& support(int i) const { return support_[i]; }
  const std::vector<double>& values(int i) const { return values_[i]; }

private:
  int ncx_, ncy_;
  double hx_, hy_;
  std::vector<std::vector<int>> support_;
  std::vector<std::vector<double>> values_;
};

} // namespace cem
