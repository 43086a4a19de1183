#include "cemporo/assembly.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/SparseExtra>

namespace cem {

namespace {

using detail::gauss_pt;

struct QuadPoint {
  double s, t;          // reference coordinates in [0, 1]^2
  double N[4];          // shape values
  double dNdx[4];       // physical gradients
  double dNdy[4];
};

// The four 2x2 Gauss points of a fine cell of size hx x hy.
std::array<QuadPoint, 4> cell_quadrature(double hx, double hy) {
  std::array<QuadPoint, 4> q{};
  int k = 0;
  for (double t : gauss_pt)
    for (double s : gauss_pt) {
      QuadPoint& p = q[k++];
      p.s = s;
      p.t = t;
      p.N[0] = (1 - s) * (1 - t);
      p.N[1] = s * (1 - t);
      p.N[2] = s * t;
      p.N[3] = (1 - s) * t;
      const double ds[4] = {-(1 - t), (1 - t), t, -t};
      const double dt[4] = {-(1 - s), -s, s, (1 - s)};
      for (int a = 0; a < 4; ++a) {
        p.dNdx[a] = ds[a] / hx;
        p.dNdy[a] = dt[a] / hy;
      }
    }
  return q;
}

struct CellMatrices {
  Eigen::Matrix<double, 8, 8> A;  // elasticity, interleaved (node, comp)
  Eigen::Matrix<double, 8, 8> S1; // sigma-tilde mass
  Eigen::Matrix4d B, S2, M;       // permeability stiffness, kappa-tilde mass, plain mass
  Eigen::Matrix<double, 4, 8> D;  // coupling alpha div(u) q
};

template <typename Mat>
void mirror_upper(Mat& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
}

CellMatrices cell_matrices(const GridPair& grid, const MaterialField& field, int cell) {
  const double hx = grid.hx(), hy = grid.hy();
  const double w = 0.25 * hx * hy;
  const auto [cx, cy] = grid.fine_cell_ij(cell);
  const int r = grid.refinement();
  const int ci = cx / r, cj = cy / r;
  const double lam = field.lambda()[cell], mu = field.mu()[cell];
  const double perm = field.kappa()[cell] / field.nu();
  const double alpha = field.alpha();

  CellMatrices m;
  m.A.setZero();
  m.S1.setZero();
  m.B.setZero();
  m.S2.setZero();
  m.M.setZero();
  m.D.setZero();
  for (const QuadPoint& q : cell_quadrature(hx, hy)) {
    const double x = (cx + q.s) * hx, y = (cy + q.t) * hy;
    const double g = pou_gradient_weight(grid, ci, cj, x, y);
    const double sig = (lam + 2 * mu) * g * w;
    const double kap = perm * g * w;
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) {
        const double ax = q.dNdx[a], ay = q.dNdy[a], bx = q.dNdx[b], by = q.dNdy[b];
        // sigma(u):eps(v) for u = N_b e_j, v = N_a e_i
        m.A(2 * a, 2 * b) += w * ((lam + 2 * mu) * ax * bx + mu * ay * by);
        m.A(2 * a + 1, 2 * b + 1) += w * ((lam + 2 * mu) * ay * by + mu * ax * bx);
        m.A(2 * a, 2 * b + 1) += w * (lam * ax * by + mu * ay * bx);
        m.A(2 * a + 1, 2 * b) += w * (lam * ay * bx + mu * ax * by);
        const double nn = q.N[a] * q.N[b];
        m.S1(2 * a, 2 * b) += sig * nn;
        m.S1(2 * a + 1, 2 * b + 1) += sig * nn;
        m.B(a, b) += w * perm * (ax * bx + ay * by);
        m.S2(a, b) += kap * nn;
        m.M(a, b) += w * nn;
      }
    for (int b = 0; b < 4; ++b)
      for (int a = 0; a < 4; ++a) {
        m.D(b, 2 * a) += w * alpha * q.dNdx[a] * q.N[b];
        m.D(b, 2 * a + 1) += w * alpha * q.dNdy[a] * q.N[b];
      }
  }
  // Node pairs a <= b were filled; the rest follows from symmetry.
  mirror_upper(m.A);
  mirror_upper(m.S1);
  mirror_upper(m.B);
  mirror_upper(m.S2);
  mirror_upper(m.M);
  return m;
}

} // namespace

double pou_gradient_weight(const GridPair& grid, int ci, int cj, double x, double y) {
  const double Hx = grid.Hx(), Hy = grid.Hy();
  const double xi = x / Hx - ci, eta = y / Hy - cj;
  return 2.0 / (Hx * Hx) * ((1 - eta) * (1 - eta) + eta * eta) +
         2.0 / (Hy * Hy) * ((1 - xi) * (1 - xi) + xi * xi);
}

PatchDofs patch_dofs(const GridPair& grid, const Patch& patch) {
  PatchDofs d;
  d.u.reserve(2 * patch.interior_nodes.size());
  d.p.reserve(patch.interior_nodes.size());
  for (int node : patch.interior_nodes) {
    const int k = grid.free_index(node);
    d.u.push_back(udof(k, 0));
    d.u.push_back(udof(k, 1));
    d.p.push_back(k);
  }
  return d;
}

OperatorSet assemble_operators(const GridPair& grid, const MaterialField& field,
                               const PartitionOfUnity& pou) {
  field.check_matches(grid);
  if (pou.size() != grid.num_coarse_nodes())
    throw ConfigError("partition of unity does not match the coarse grid");
  const int np = grid.num_free_nodes(), nu = 2 * np;
  std::vector<Triplet> tA, tB, tM, tD, tS1, tS2;
  const std::size_t nc = grid.num_fine_cells();
  tA.reserve(nc * 64);
  tS1.reserve(nc * 32);
  tB.reserve(nc * 16);
  tM.reserve(nc * 16);
  tS2.reserve(nc * 16);
  tD.reserve(nc * 32);
  for (int c = 0; c < grid.num_fine_cells(); ++c) {
    const CellMatrices m = cell_matrices(grid, field, c);
    const auto nodes = grid.fine_cell_nodes(c);
    int k[4];
    for (int a = 0; a < 4; ++a) k[a] = grid.free_index(nodes[a]);
    for (int a = 0; a < 4; ++a) {
      if (k[a] < 0) continue;
      for (int b = 0; b < 4; ++b) {
        if (k[b] < 0) continue;
        tB.emplace_back(k[a], k[b], m.B(a, b));
        tS2.emplace_back(k[a], k[b], m.S2(a, b));
        tM.emplace_back(k[a], k[b], m.M(a, b));
        for (int i = 0; i < 2; ++i) {
          tD.emplace_back(k[a], udof(k[b], i), m.D(a, 2 * b + i));
          for (int j = 0; j < 2; ++j) {
            tA.emplace_back(udof(k[a], i), udof(k[b], j), m.A(2 * a + i, 2 * b + j));
            if (i == j) tS1.emplace_back(udof(k[a], i), udof(k[b], j), m.S1(2 * a + i, 2 * b + j));
          }
        }
      }
    }
  }
  OperatorSet ops;
  ops.A.resize(nu, nu);
  ops.A.setFromTriplets(tA.begin(), tA.end());
  ops.S1.resize(nu, nu);
  ops.S1.setFromTriplets(tS1.begin(), tS1.end());
  ops.B.resize(np, np);
  ops.B.setFromTriplets(tB.begin(), tB.end());
  ops.S2.resize(np, np);
  ops.S2.setFromTriplets(tS2.begin(), tS2.end());
  ops.Mp.resize(np, np);
  ops.Mp.setFromTriplets(tM.begin(), tM.end());
  ops.C = ops.Mp * (1.0 / field.M());
  ops.D.resize(np, nu);
  ops.D.setFromTriplets(tD.begin(), tD.end());
  return ops;
}

SparseMatrix submatrix(const SparseMatrix& m, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  std::vector<int> row_map(m.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_map[rows[i]] = static_cast<int>(i);
  std::vector<Triplet> t;
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (SparseMatrix::InnerIterator it(m, cols[j]); it; ++it) {
      const int r = row_map[it.row()];
      if (r >= 0) t.emplace_back(r, static_cast<int>(j), it.value());
    }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

LocalOperators restrict_to_patch(const OperatorSet& ops, const GridPair& grid,
                                 const Patch& patch) {
  LocalOperators loc;
  loc.dofs = patch_dofs(grid, patch);
  if (loc.dofs.p.empty()) throw ConfigError("patch has no interior degrees of freedom");
  loc.A = submatrix(ops.A, loc.dofs.u, loc.dofs.u);
  loc.S1 = submatrix(ops.S1, loc.dofs.u, loc.dofs.u);
  loc.B = submatrix(ops.B, loc.dofs.p, loc.dofs.p);
  loc.C = submatrix(ops.C, loc.dofs.p, loc.dofs.p);
  loc.S2 = submatrix(ops.S2, loc.dofs.p, loc.dofs.p);
  loc.D = submatrix(ops.D, loc.dofs.p, loc.dofs.u);
  return loc;
}

ElementOperators assemble_element_operators(const GridPair& grid, const MaterialField& field,
                                            int element) {
  field.check_matches(grid);
  const auto [ci, cj] = grid.coarse_cell_ij(element);
  const int r = grid.refinement();
  const int n1 = r + 1;
  ElementOperators e;
  for (int iy = cj * r; iy <= (cj + 1) * r; ++iy)
    for (int ix = ci * r; ix <= (ci + 1) * r; ++ix) e.nodes.push_back(grid.fine_node(ix, iy));
  const int n = n1 * n1;
  e.A = Matrix::Zero(2 * n, 2 * n);
  e.S1 = Matrix::Zero(2 * n, 2 * n);
  e.B = Matrix::Zero(n, n);
  e.S2 = Matrix::Zero(n, n);
  for (int c : grid.fine_cells_of_coarse(element)) {
    const CellMatrices m = cell_matrices(grid, field, c);
    const auto [cx, cy] = grid.fine_cell_ij(c);
    const int lx = cx - ci * r, ly = cy - cj * r;
    const int loc[4] = {ly * n1 + lx, ly * n1 + lx + 1, (ly + 1) * n1 + lx + 1,
                        (ly + 1) * n1 + lx};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        e.B(loc[a], loc[b]) += m.B(a, b);
        e.S2(loc[a], loc[b]) += m.S2(a, b);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            e.A(2 * loc[a] + i, 2 * loc[b] + j) += m.A(2 * a + i, 2 * b + j);
            e.S1(2 * loc[a] + i, 2 * loc[b] + j) += m.S1(2 * a + i, 2 * b + j);
          }
      }
  }
  return e;
}

SourceTerm SourceTerm::constant(double value) {
  SourceTerm s;
  s.kind_ = Kind::constant;
  s.scale_ = value;
  return s;
}

SourceTerm SourceTerm::separable_sine(double scale) {
  SourceTerm s;
  s.kind_ = Kind::separable_sine;
  s.scale_ = scale;
  return s;
}

SourceTerm SourceTerm::time_sine(double scale) {
  SourceTerm s;
  s.kind_ = Kind::time_sine;
  s.scale_ = scale;
  return s;
}

SourceTerm SourceTerm::cell_table(std::vector<double> values) {
  SourceTerm s;
  s.kind_ = Kind::cell_table;
  s.scale_ = 1.0;
  s.table_ = std::move(values);
  return s;
}

double SourceTerm::operator()(double t, double x, double y, int cell) const {
  constexpr double pi = std::numbers::pi;
  switch (kind_) {
  case Kind::constant:
    return scale_;
  case Kind::separable_sine:
    return scale_ * 2 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
  case Kind::time_sine:
    return scale_ * 2 * pi * pi * t * std::sin(pi * x) * std::sin(pi * y);
  case Kind::cell_table:
    return table_[cell];
  }
  return 0.0;
}

Vector assemble_load_all_nodes(const GridPair& grid, const SourceTerm& f, double t) {
  if (f.kind() == SourceTerm::Kind::cell_table &&
      static_cast<int>(f.table().size()) != grid.num_fine_cells())
    throw ConfigError("source table does not match the fine-cell count");
  Vector load = Vector::Zero(grid.num_fine_nodes());
  const double hx = grid.hx(), hy = grid.hy();
  const double w = 0.25 * hx * hy;
  const auto quad = cell_quadrature(hx, hy);
  for (int c = 0; c < grid.num_fine_cells(); ++c) {
    const auto [cx, cy] = grid.fine_cell_ij(c);
    const auto nodes = grid.fine_cell_nodes(c);
    for (const QuadPoint& q : quad) {
      const double val = f(t, (cx + q.s) * hx, (cy + q.t) * hy, c) * w;
      for (int a = 0; a < 4; ++a) load[nodes[a]] += val * q.N[a];
    }
  }
  return load;
}

Vector assemble_load(const GridPair& grid, const SourceTerm& f, double t) {
  const Vector all = assemble_load_all_nodes(grid, f, t);
  Vector load(grid.num_free_nodes());
  for (int k = 0; k < grid.num_free_nodes(); ++k) load[k] = all[grid.free_nodes()[k]];
  return load;
}

void export_matrix_market(const SparseMatrix& m, const std::filesystem::path& path) {
  if (!Eigen::saveMarket(m, path.string()))
    throw std::runtime_error("cannot write " + path.string());
}

} // namespace cem
