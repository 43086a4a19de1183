#pragma once

#include <filesystem>
#include <vector>

#include "cemporo/coeff.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/types.hpp"

namespace cem {

// Degrees of freedom live on interior fine nodes only. Displacement DOFs are
// interleaved (2k, 2k+1) for free node k, pressure DOF k for free node k.
inline int udof(int free_node, int component) { return 2 * free_node + component; }

/// Global DOF indices of a patch's zero-trace space, in patch order.
struct PatchDofs {
  std::vector<int> u;
  std::vector<int> p;
};

PatchDofs patch_dofs(const GridPair& grid, const Patch& patch);

/// Fine-scale operators of the coupled system on interior DOFs.
struct OperatorSet {
  SparseMatrix A;  ///< elasticity stiffness a(u, v)
  SparseMatrix B;  ///< permeability stiffness b(p, q)
  SparseMatrix C;  ///< (1/M) pressure mass c(p, q)
  SparseMatrix D;  ///< coupling d(u, q), rows = pressure, cols = displacement
  SparseMatrix S1; ///< sigma-tilde weighted displacement mass
  SparseMatrix S2; ///< kappa-tilde weighted pressure mass
  SparseMatrix Mp; ///< unweighted pressure mass

  int n_u() const { return static_cast<int>(A.rows()); }
  int n_p() const { return static_cast<int>(B.rows()); }
};

OperatorSet assemble_operators(const GridPair& grid, const MaterialField& field,
                               const PartitionOfUnity& pou);

/// Operators restricted to a patch's zero-trace DOFs.
struct LocalOperators {
  PatchDofs dofs;
  SparseMatrix A, B, C, D, S1, S2;
};

LocalOperators restrict_to_patch(const OperatorSet& ops, const GridPair& grid,
                                 const Patch& patch);

/// Rows/cols `keep` of a square sparse matrix (or rows/cols separately).
SparseMatrix submatrix(const SparseMatrix& m, const std::vector<int>& rows,
                       const std::vector<int>& cols);

/// Neumann-type (no Dirichlet elimination) operators of one coarse element,
/// dense, on all fine nodes of the element. Displacement DOFs interleaved.
struct ElementOperators {
  std::vector<int> nodes; ///< global fine node ids, lexicographic
  Matrix A, S1;           ///< 2n x 2n
  Matrix B, S2;           ///< n x n
};

ElementOperators assemble_element_operators(const GridPair& grid, const MaterialField& field,
                                            int element);

/// sigma-tilde and kappa-tilde weights at a point of coarse cell (ci, cj),
/// before multiplication by (lambda + 2 mu) resp. kappa / nu.
double pou_gradient_weight(const GridPair& grid, int ci, int cj, double x, double y);

/// Source term f(t, x1, x2) from a small closed set of forms.
class SourceTerm {
public:
  enum class Kind { constant, separable_sine, time_sine, cell_table };

  static SourceTerm constant(double value);
  /// 2 pi^2 sin(pi x) sin(pi y), times `scale`.
  static SourceTerm separable_sine(double scale = 1.0);
  /// 2 pi^2 t sin(pi x) sin(pi y), times `scale`.
  static SourceTerm time_sine(double scale = 1.0);
  /// Piecewise constant per fine cell, constant in time.
  static SourceTerm cell_table(std::vector<double> values);

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  const std::vector<double>& table() const { return table_; }
  double operator()(double t, double x, double y, int cell) const;

private:
  Kind kind_ = Kind::constant;
  double scale_ = 0.0;
  std::vector<double> table_;
};

/// (f(t), N_k) for every fine node, boundary nodes included.
Vector assemble_load_all_nodes(const GridPair& grid, const SourceTerm& f, double t);
/// Load restricted to interior pressure DOFs.
Vector assemble_load(const GridPair& grid, const SourceTerm& f, double t);

/// (g, N_k) on interior DOFs for a time-independent scalar function.
template <typename Fn>
Vector assemble_function_load(const GridPair& grid, Fn&& g);

/// Nodal interpolant on interior DOFs.
template <typename Fn>
Vector interpolate_scalar(const GridPair& grid, Fn&& g) {
  Vector v(grid.num_free_nodes());
  for (int k = 0; k < grid.num_free_nodes(); ++k) {
    const auto [x, y] = grid.fine_node_xy(grid.free_nodes()[k]);
    v[k] = g(x, y);
  }
  return v;
}

/// Writes a matrix in Matrix Market coordinate format.
void export_matrix_market(const SparseMatrix& m, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

namespace detail {
inline constexpr double gauss_pt[2] = {0.21132486540518711775, 0.78867513459481288225};
}

template <typename Fn>
Vector assemble_function_load(const GridPair& grid, Fn&& g) {
  Vector load = Vector::Zero(grid.num_free_nodes());
  const double hx = grid.hx(), hy = grid.hy();
  const double w = 0.25 * hx * hy;
  for (int c = 0; c < grid.num_fine_cells(); ++c) {
    const auto [cx, cy] = grid.fine_cell_ij(c);
    const auto nodes = grid.fine_cell_nodes(c);
    for (double s : detail::gauss_pt)
      for (double t : detail::gauss_pt) {
        const double val = g((cx + s) * hx, (cy + t) * hy) * w;
        const double N[4] = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
        for (int a = 0; a < 4; ++a) {
          const int k = grid.free_index(nodes[a]);
          if (k >= 0) load[k] += val * N[a];
        }
      }
  }
  return load;
}

} // namespace cem
