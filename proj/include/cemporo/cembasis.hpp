#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "cemporo/assembly.hpp"
#include "cemporo/auxspace.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/types.hpp"

namespace cem {

/// Where a multiscale basis column came from.
struct ColumnOrigin {
  enum class Kind { offline, online, fine } kind = Kind::offline;
  int region = -1;    ///< coarse element (offline, element strategy) or coarse node
  int index = 0;      ///< auxiliary function j for offline columns
  int time_index = -1;
  int iteration = -1;
};

/// Column collection spanning V_ms and Q_ms, stored as sparse matrices whose
/// rows are the global interior DOFs.
struct MultiscaleSpace {
  SparseMatrix RV;
  SparseMatrix RQ;
  std::vector<ColumnOrigin> origin_u;
  std::vector<ColumnOrigin> origin_p;
  int layers = 0;
  int generation = 0;

  int dof_u() const { return static_cast<int>(RV.cols()); }
  int dof_p() const { return static_cast<int>(RQ.cols()); }
  const SparseMatrix& basis(Family f) const { return f == Family::displacement ? RV : RQ; }
};

/// Every fine unit vector as a column (the fine space in multiscale clothing).
MultiscaleSpace identity_space(const OperatorSet& ops);

/// Appends columns to one family and bumps the generation.
void append_columns(MultiscaleSpace& space, Family f, const std::vector<SparseMatrix>& cols,
                    const std::vector<ColumnOrigin>& origins);

/// Solver for (K + W W^T) x = b on a patch's zero-trace space, where K is the
/// restricted stiffness (a or b) and W collects S_loc * basis_j for every
/// auxiliary function of every coarse element in the patch. W W^T is the
/// matrix form of s(pi(x), pi(v)).
///
/// The low-rank term is handled by Woodbury: with Z = K^{-1} W and
/// G = W^T Z, the solution is x = y - Z (I + G)^{-1} W^T y, y = K^{-1} b.
class ConstrainedPatchSolver {
public:
  ConstrainedPatchSolver(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux,
                         const Patch& patch, Family family);

  const std::vector<int>& dofs() const { return dofs_; }
  /// Auxiliary functions (element, j) that make up the columns of W.
  const std::vector<std::pair<int, int>>& constraints() const { return aux_ids_; }

  Vector solve(const Vector& rhs) const;
  /// Solution for right-hand side W e_c, i.e. the CEM basis of constraint c.
  Vector solve_constraint(int c) const;
  Vector constraint_rhs(int c) const { return W_.col(c); }
  /// ||(K + W W^T) x - b|| / ||b|| (0 when b = 0 and x = 0).
  double relative_residual(const Vector& x, const Vector& rhs) const;

  /// Local vector (patch dof order) -> sparse global column.
  SparseMatrix to_global(const Vector& x, int global_size) const;
  /// Global vector -> local dofs.
  Vector gather(const Vector& global) const;

private:
  std::vector<int> dofs_;
  std::vector<std::pair<int, int>> aux_ids_;
  SparseMatrix K_;
  Matrix W_, Z_;
  Eigen::SimplicialLDLT<SparseMatrix> K_factor_;
  Eigen::LDLT<Matrix> cap_factor_;
};

/// One CEM basis column per (element, auxiliary function), solved on the
/// element's l-layer oversampled patch.
MultiscaleSpace build_offline_basis(const GridPair& grid, const OperatorSet& ops,
                                    const AuxBasis& aux, int layers);

/// Same construction with the patch equal to the whole domain.
MultiscaleSpace build_global_basis_oracle(const GridPair& grid, const OperatorSet& ops,
                                          const AuxBasis& aux);

/// CEM basis functions of one element on its l-layer patch, one global
/// dense column per auxiliary function.
Matrix build_element_basis(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux,
                           int element, int layers, Family family);

/// Largest defining-equation relative residual over all offline columns of
/// a family (each re-checked on its own patch).
double offline_residual(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux,
                        const MultiscaleSpace& space, Family family);

/// Dense Galerkin projections of the fine operators.
struct CoarseOperators {
  Matrix A, B, C, D;
};

CoarseOperators galerkin_project(const MultiscaleSpace& space, const OperatorSet& ops);

/// Raw little-endian float64 columns plus a JSON manifest of provenance.
void dump_basis(const MultiscaleSpace& space, const std::filesystem::path& dir);

} // namespace cem
