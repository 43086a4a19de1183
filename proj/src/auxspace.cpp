#include "cemporo/auxspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "cemporo/parallel.hpp"

namespace cem {

namespace {

// Modified Gram-Schmidt in the S inner product, two passes.
Matrix s_orthonormalize(const Matrix& modes, const Matrix& S) {
  Matrix q = modes;
  for (int k = 0; k < q.cols(); ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < k; ++j) {
        const double c = q.col(j).dot(S * q.col(k));
        q.col(k) -= c * q.col(j);
      }
    const double n = std::sqrt(q.col(k).dot(S * q.col(k)));
    if (!(n > 0.0)) throw NumericalError("degenerate kernel mode in local spectral problem");
    q.col(k) /= n;
  }
  return q;
}

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

} // namespace

ElementAux solve_local_spectral(const GridPair& grid, const MaterialField& field, int element,
                                int J1, int J2) {
  if (element < 0 || element >= grid.num_coarse_cells())
    throw ConfigError("coarse element index out of range");
  const ElementOperators ops = assemble_element_operators(grid, field, element);
  const int n = static_cast<int>(ops.nodes.size());
  if (J1 < 1 || J2 < 1 || J1 > 2 * n || J2 > n)
    throw ConfigError("requested " + std::to_string(J1) + "/" + std::to_string(J2) +
                      " local eigenpairs but the element has " + std::to_string(2 * n) + "/" +
                      std::to_string(n) + " degrees of freedom");

  ElementAux aux;
  aux.element = element;
  aux.nodes = ops.nodes;

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ue(ops.A, ops.S1);
  if (ue.info() != Eigen::Success) throw NumericalError("displacement eigensolve failed");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> pe(ops.B, ops.S2);
  if (pe.info() != Eigen::Success) throw NumericalError("pressure eigensolve failed");

  aux.disp_values = ue.eigenvalues();
  aux.pres_values = pe.eigenvalues();
  aux.disp_vecs = ue.eigenvectors().leftCols(J1);
  aux.pres_vecs = pe.eigenvectors().leftCols(J2);

  // Canonical kernel bases.
  const auto [ci, cj] = grid.coarse_cell_ij(element);
  const double xc = (ci + 0.5) * grid.Hx(), yc = (cj + 0.5) * grid.Hy();
  Matrix rigid(2 * n, 3);
  for (int a = 0; a < n; ++a) {
    const auto [x, y] = grid.fine_node_xy(ops.nodes[a]);
    rigid.row(2 * a) << 1.0, 0.0, -(y - yc);
    rigid.row(2 * a + 1) << 0.0, 1.0, (x - xc);
  }
  const Matrix rigid_s = s_orthonormalize(rigid, ops.S1);
  const int nk1 = std::min(3, J1);
  aux.disp_vecs.leftCols(nk1) = rigid_s.leftCols(nk1);
  for (int j = nk1; j < J1; ++j) fix_sign(aux.disp_vecs.col(j));

  const Matrix ones = Matrix::Ones(n, 1);
  aux.pres_vecs.col(0) = s_orthonormalize(ones, ops.S2).col(0);
  for (int j = 1; j < J2; ++j) fix_sign(aux.pres_vecs.col(j));

  aux.disp_svecs = ops.S1 * aux.disp_vecs;
  aux.pres_svecs = ops.S2 * aux.pres_vecs;
  return aux;
}

AuxBasis::AuxBasis(std::vector<ElementAux> elements, int J1, int J2)
    : elements_(std::move(elements)), J1_(J1), J2_(J2) {}

Vector AuxBasis::constraint_column(const GridPair& grid, Family f, int element, int j) const {
  const ElementAux& e = elements_[element];
  const int ncomp = f == Family::displacement ? 2 : 1;
  Vector col = Vector::Zero(ncomp * grid.num_free_nodes());
  const auto& sv = e.svecs(f);
  for (std::size_t a = 0; a < e.nodes.size(); ++a) {
    const int k = grid.free_index(e.nodes[a]);
    if (k < 0) continue;
    for (int c = 0; c < ncomp; ++c) col[ncomp * k + c] = sv(ncomp * a + c, j);
  }
  return col;
}

AuxBasis build_aux_basis(const GridPair& grid, const MaterialField& field, int J1, int J2) {
  std::vector<ElementAux> elements(grid.num_coarse_cells());
  parallel::parallel_for(elements.size(), [&](std::size_t i) {
    elements[i] = solve_local_spectral(grid, field, static_cast<int>(i), J1, J2);
  });
  return AuxBasis(std::move(elements), J1, J2);
}

BrokenField to_broken(const AuxBasis& aux, const GridPair& grid, Family f, const Vector& v) {
  const int ncomp = f == Family::displacement ? 2 : 1;
  BrokenField out(aux.num_elements());
  for (int i = 0; i < aux.num_elements(); ++i) {
    const auto& nodes = aux.element(i).nodes;
    out[i] = Vector::Zero(ncomp * static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const int k = grid.free_index(nodes[a]);
      if (k < 0) continue;
      for (int c = 0; c < ncomp; ++c) out[i][ncomp * a + c] = v[ncomp * k + c];
    }
  }
  return out;
}

Vector scatter_broken(const AuxBasis& aux, const GridPair& grid, Family f, const BrokenField& v) {
  const int ncomp = f == Family::displacement ? 2 : 1;
  Vector out = Vector::Zero(ncomp * grid.num_free_nodes());
  for (int i = 0; i < aux.num_elements(); ++i) {
    const auto& nodes = aux.element(i).nodes;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const int k = grid.free_index(nodes[a]);
      if (k < 0) continue;
      for (int c = 0; c < ncomp; ++c) out[ncomp * k + c] += v[i][ncomp * a + c];
    }
  }
  return out;
}

Vector pi_coefficients(const AuxBasis& aux, Family f, const BrokenField& v) {
  const int J = aux.J(f);
  Vector c(aux.num_elements() * J);
  for (int i = 0; i < aux.num_elements(); ++i)
    c.segment(i * J, J) = aux.element(i).svecs(f).transpose() * v[i];
  return c;
}

BrokenField project_pi(const AuxBasis& aux, Family f, const BrokenField& v) {
  BrokenField out(aux.num_elements());
  for (int i = 0; i < aux.num_elements(); ++i) {
    const ElementAux& e = aux.element(i);
    out[i] = e.vecs(f) * (e.svecs(f).transpose() * v[i]);
  }
  return out;
}

BrokenField project_pi(const AuxBasis& aux, const GridPair& grid, Family f, const Vector& v) {
  return project_pi(aux, f, to_broken(aux, grid, f, v));
}

double decay_factor(double Lambda, int layers) {
  if (!(Lambda > 0.0)) return std::numeric_limits<double>::infinity();
  const double base = 1.0 + 1.0 / (2.0 * (1.0 + std::sqrt(Lambda)));
  return (1.0 + 1.0 / Lambda) * std::pow(base, 1.0 - layers);
}

namespace {
// Kernel eigenvalues come out as +-1e-15 noise; report them as exact zeros.
double chop(const Vector& values, int index) {
  const double v = values[index];
  return v <= 1e-10 * values.cwiseAbs().maxCoeff() ? 0.0 : v;
}
} // namespace

SpectralDiagnostics spectral_diagnostics(const AuxBasis& aux, int layers) {
  SpectralDiagnostics d;
  d.layers = layers;
  d.lambda_u = std::numeric_limits<double>::infinity();
  d.lambda_p = std::numeric_limits<double>::infinity();
  for (int i = 0; i < aux.num_elements(); ++i) {
    const ElementAux& e = aux.element(i);
    // With J equal to the local dimension nothing is left out: lambda_{J+1} = inf.
    if (e.disp_values.size() > aux.J(Family::displacement))
      d.lambda_u = std::min(d.lambda_u, chop(e.disp_values, aux.J(Family::displacement)));
    if (e.pres_values.size() > aux.J(Family::pressure))
      d.lambda_p = std::min(d.lambda_p, chop(e.pres_values, aux.J(Family::pressure)));
  }
  d.Lambda = std::min(d.lambda_u, d.lambda_p);
  d.C_e = decay_factor(d.Lambda, layers);
  return d;
}

} // namespace cem
