#include "cemporo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cemporo/types.hpp"

namespace cem {

GridPair::GridPair(int ncx, int ncy, int refinement)
    : ncx_(ncx), ncy_(ncy), refinement_(refinement) {
  if (ncx < 1 || ncy < 1 || refinement < 1)
    throw ConfigError("grid counts must be >= 1 (got " + std::to_string(ncx) + ", " +
                      std::to_string(ncy) + ", " + std::to_string(refinement) + ")");
  free_index_.assign(num_fine_nodes(), -1);
  for (int iy = 1; iy < fine_nodes_y() - 1; ++iy)
    for (int ix = 1; ix < fine_nodes_x() - 1; ++ix) {
      const int node = fine_node(ix, iy);
      free_index_[node] = static_cast<int>(free_nodes_.size());
      free_nodes_.push_back(node);
    }
}

std::array<int, 4> GridPair::fine_cell_nodes(int cell) const {
  const auto [cx, cy] = fine_cell_ij(cell);
  return {fine_node(cx, cy), fine_node(cx + 1, cy), fine_node(cx + 1, cy + 1),
          fine_node(cx, cy + 1)};
}

std::vector<int> GridPair::fine_cells_of_coarse(int coarse) const {
  const auto [ci, cj] = coarse_cell_ij(coarse);
  std::vector<int> cells;
  cells.reserve(refinement_ * refinement_);
  for (int fy = cj * refinement_; fy < (cj + 1) * refinement_; ++fy)
    for (int fx = ci * refinement_; fx < (ci + 1) * refinement_; ++fx)
      cells.push_back(fine_cell(fx, fy));
  return cells;
}

GridPair build_grids(int ncx, int ncy, int refinement) { return GridPair(ncx, ncy, refinement); }

Patch make_box_patch(const GridPair& grid, int cx0, int cy0, int cx1, int cy1) {
  Patch p;
  p.cx0 = std::max(cx0, 0);
  p.cy0 = std::max(cy0, 0);
  p.cx1 = std::min(cx1, grid.ncx() - 1);
  p.cy1 = std::min(cy1, grid.ncy() - 1);
  for (int j = p.cy0; j <= p.cy1; ++j)
    for (int i = p.cx0; i <= p.cx1; ++i) p.coarse_cells.push_back(grid.coarse_cell(i, j));

  const int r = grid.refinement();
  const int ix0 = p.cx0 * r, ix1 = (p.cx1 + 1) * r;
  const int iy0 = p.cy0 * r, iy1 = (p.cy1 + 1) * r;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      const int node = grid.fine_node(ix, iy);
      p.fine_nodes.push_back(node);
      if (ix > ix0 && ix < ix1 && iy > iy0 && iy < iy1 && !grid.on_boundary(node))
        p.interior_nodes.push_back(node);
    }
  return p;
}

Patch oversample_element(const GridPair& grid, int element, int layers) {
  if (element < 0 || element >= grid.num_coarse_cells())
    throw ConfigError("coarse element index out of range");
  if (layers < 0) throw ConfigError("oversampling layers must be >= 0");
  const auto [i, j] = grid.coarse_cell_ij(element);
  // Each layer adds every cell whose closure meets the current block, which
  // on a tensor grid grows the box by one cell in all eight directions.
  Patch p = make_box_patch(grid, i - layers, j - layers, i + layers, j + layers);
  p.kind = PatchKind::element;
  p.seed = element;
  p.layers = layers;
  return p;
}

Patch oversample_neighborhood(const GridPair& grid, int coarse_node, int layers) {
  if (coarse_node < 0 || coarse_node >= grid.num_coarse_nodes())
    throw ConfigError("coarse node index out of range");
  if (layers < 0) throw ConfigError("oversampling layers must be >= 0");
  const auto [a, b] = grid.coarse_node_ij(coarse_node);
  Patch p = make_box_patch(grid, a - 1 - layers, b - 1 - layers, a + layers, b + layers);
  p.kind = PatchKind::neighborhood;
  p.seed = coarse_node;
  p.layers = layers;
  return p;
}

PartitionOfUnity::PartitionOfUnity(const GridPair& grid)
    : ncx_(grid.ncx()), ncy_(grid.ncy()), hx_(grid.Hx()),
      hy_(grid.Hy()) {
  support_.resize(grid.num_coarse_nodes());
  values_.resize(grid.num_coarse_nodes());
  for (int n = 0; n < grid.num_coarse_nodes(); ++n) {
    const Patch omega = oversample_neighborhood(grid, n, 0);
    const auto [a, b] = grid.coarse_node_ij(n);
    const int r = grid.refinement();
    for (int node : omega.fine_nodes) {
      // Integer form keeps nodal values exact (0.5 at edge midpoints etc.).
      const auto [ix, iy] = grid.fine_node_ij(node);
      const double wx = 1.0 - std::abs(ix - a * r) / static_cast<double>(r);
      const double wy = 1.0 - std::abs(iy - b * r) / static_cast<double>(r);
      const double v = std::max(0.0, wx) * std::max(0.0, wy);
      if (v > 0.0) {
        support_[n].push_back(node);
        values_[n].push_back(v);
      }
    }
  }
}

double PartitionOfUnity::value(int i, double x, double y) const {
  const int a = i % (ncx_ + 1), b = i / (ncx_ + 1);
  const double wx = std::max(0.0, 1.0 - std::abs(x / hx_ - a));
  const double wy = std::max(0.0, 1.0 - std::abs(y / hy_ - b));
  return wx * wy;
}

std::array<double, 2> PartitionOfUnity::gradient(int i, int ci, int cj, double x,
                                                 double y) const {
  const int a = i % (ncx_ + 1), b = i / (ncx_ + 1);
  if (a < ci || a > ci + 1 || b < cj || b > cj + 1) return {0.0, 0.0};
  // Restricted to cell (ci, cj) the hat is a product of two linear factors.
  const double sx = (a == ci) ? -1.0 : 1.0;
  const double sy = (b == cj) ? -1.0 : 1.0;
  const double wx = 1.0 - std::abs(x / hx_ - a);
  const double wy = 1.0 - std::abs(y / hy_ - b);
  return {sx / hx_ * wy, sy / hy_ * wx};
}

double PartitionOfUnity::at_node(int i, int fine_node) const {
  const auto& s = support_[i];
  const auto it = std::lower_bound(s.begin(), s.end(), fine_node);
  if (it == s.end() || *it != fine_node) return 0.0;
  return values_[i][static_cast<std::size_t>(it - s.begin())];
}

} // namespace cem
