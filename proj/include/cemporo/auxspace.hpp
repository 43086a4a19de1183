#pragma once

#include <vector>

#include "cemporo/assembly.hpp"
#include "cemporo/coeff.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/types.hpp"

namespace cem {

/// Local spectral data of one coarse element.
///
/// Vectors live on all fine nodes of the element (displacement interleaved).
/// `*_svecs` caches S_loc * vecs so that s_i(v, basis_j) is a dot product.
struct ElementAux {
  int element = -1;
  std::vector<int> nodes;
  Vector disp_values;  ///< every eigenvalue, ascending
  Vector pres_values;
  Matrix disp_vecs;    ///< first J1 eigenvectors, s-orthonormal
  Matrix disp_svecs;
  Matrix pres_vecs;    ///< first J2 eigenvectors
  Matrix pres_svecs;

  const Matrix& vecs(Family f) const { return f == Family::displacement ? disp_vecs : pres_vecs; }
  const Matrix& svecs(Family f) const {
    return f == Family::displacement ? disp_svecs : pres_svecs;
  }
  const Vector& values(Family f) const {
    return f == Family::displacement ? disp_values : pres_values;
  }
};

/// Solves the Neumann-type generalized eigenproblems of one element and keeps
/// the first J1 / J2 pairs.
///
/// The numerically degenerate kernels (rigid motions, constants) are replaced
/// by the s-orthonormalized canonical modes: x-translation, y-translation,
/// rotation about the element centre; the constant for pressure. Every other
/// eigenvector is signed so that its largest-magnitude entry is positive.
ElementAux solve_local_spectral(const GridPair& grid, const MaterialField& field, int element,
                                int J1, int J2);

/// Auxiliary spaces for every coarse element.
class AuxBasis {
public:
  AuxBasis() = default;
  AuxBasis(std::vector<ElementAux> elements, int J1, int J2);

  int J(Family f) const { return f == Family::displacement ? J1_ : J2_; }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  const ElementAux& element(int i) const { return elements_[i]; }

  /// Global interior-DOF image S_loc * basis_j of element i (entries on
  /// boundary nodes dropped). These are the constraint columns.
  Vector constraint_column(const GridPair& grid, Family f, int element, int j) const;

private:
  std::vector<ElementAux> elements_;
  int J1_ = 0, J2_ = 0;
};

AuxBasis build_aux_basis(const GridPair& grid, const MaterialField& field, int J1, int J2);

/// Piecewise field made of one local vector per coarse element; the natural
/// home of pi(v), which is discontinuous across element boundaries.
using BrokenField = std::vector<Vector>;

/// Gathers a global interior-DOF vector into per-element local vectors.
BrokenField to_broken(const AuxBasis& aux, const GridPair& grid, Family f, const Vector& v);

/// Sums per-element local vectors into a global interior-DOF vector
/// (contributions at shared nodes add up; boundary entries are dropped).
Vector scatter_broken(const AuxBasis& aux, const GridPair& grid, Family f, const BrokenField& v);

/// Coefficients s_i(v, basis_j^i), stacked element by element.
Vector pi_coefficients(const AuxBasis& aux, Family f, const BrokenField& v);

/// pi(v) = sum_i sum_j s_i(v, basis_j^i) basis_j^i.
BrokenField project_pi(const AuxBasis& aux, Family f, const BrokenField& v);
BrokenField project_pi(const AuxBasis& aux, const GridPair& grid, Family f, const Vector& v);

struct SpectralDiagnostics {
  double lambda_u = 0.0; ///< min over elements of the (J1+1)-th displacement eigenvalue
  double lambda_p = 0.0; ///< same for pressure with J2
  double Lambda = 0.0;   ///< min of the two
  int layers = 0;
  double C_e = 0.0;      ///< exponential decay factor, +inf when Lambda == 0
};

double decay_factor(double Lambda, int layers);
SpectralDiagnostics spectral_diagnostics(const AuxBasis& aux, int layers);

} // namespace cem
