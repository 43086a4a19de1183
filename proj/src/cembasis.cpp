#include "cemporo/cembasis.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cemporo/parallel.hpp"

namespace cem {

namespace {

int components(Family f) { return f == Family::displacement ? 2 : 1; }

const SparseMatrix& stiffness(const OperatorSet& ops, Family f) {
  return f == Family::displacement ? ops.A : ops.B;
}

std::vector<int> family_dofs(const GridPair& grid, const Patch& patch, Family f) {
  PatchDofs d = patch_dofs(grid, patch);
  return f == Family::displacement ? std::move(d.u) : std::move(d.p);
}

SparseMatrix columns_to_matrix(int rows, const std::vector<std::vector<Triplet>>& per_task,
                               int cols) {
  std::size_t nnz = 0;
  for (const auto& t : per_task) nnz += t.size();
  std::vector<Triplet> all;
  all.reserve(nnz);
  for (const auto& t : per_task) all.insert(all.end(), t.begin(), t.end());
  SparseMatrix m(rows, cols);
  m.setFromTriplets(all.begin(), all.end());
  return m;
}

} // namespace

MultiscaleSpace identity_space(const OperatorSet& ops) {
  MultiscaleSpace s;
  s.RV.resize(ops.n_u(), ops.n_u());
  s.RV.setIdentity();
  s.RQ.resize(ops.n_p(), ops.n_p());
  s.RQ.setIdentity();
  s.origin_u.assign(ops.n_u(), ColumnOrigin{ColumnOrigin::Kind::fine});
  s.origin_p.assign(ops.n_p(), ColumnOrigin{ColumnOrigin::Kind::fine});
  for (int i = 0; i < ops.n_u(); ++i) s.origin_u[i].index = i;
  for (int i = 0; i < ops.n_p(); ++i) s.origin_p[i].index = i;
  return s;
}

void append_columns(MultiscaleSpace& space, Family f, const std::vector<SparseMatrix>& cols,
                    const std::vector<ColumnOrigin>& origins) {
  if (cols.empty()) return;
  SparseMatrix& R = f == Family::displacement ? space.RV : space.RQ;
  auto& org = f == Family::displacement ? space.origin_u : space.origin_p;
  std::vector<Triplet> t;
  t.reserve(R.nonZeros());
  for (int j = 0; j < R.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(R, j); it; ++it) t.emplace_back(it.row(), j, it.value());
  int c = static_cast<int>(R.cols());
  for (const SparseMatrix& col : cols) {
    for (SparseMatrix::InnerIterator it(col, 0); it; ++it) t.emplace_back(it.row(), c, it.value());
    ++c;
  }
  SparseMatrix out(R.rows(), c);
  out.setFromTriplets(t.begin(), t.end());
  R = std::move(out);
  org.insert(org.end(), origins.begin(), origins.end());
  ++space.generation;
}

ConstrainedPatchSolver::ConstrainedPatchSolver(const GridPair& grid, const OperatorSet& ops,
                                               const AuxBasis& aux, const Patch& patch,
                                               Family family)
    : dofs_(family_dofs(grid, patch, family)) {
  if (dofs_.empty()) throw ConfigError("patch has no interior degrees of freedom");
  const int ncomp = components(family);
  K_ = submatrix(stiffness(ops, family), dofs_, dofs_);

  std::vector<int> local(static_cast<std::size_t>(ncomp) * grid.num_free_nodes(), -1);
  for (std::size_t l = 0; l < dofs_.size(); ++l) local[dofs_[l]] = static_cast<int>(l);

  const int J = aux.J(family);
  for (int e : patch.coarse_cells)
    for (int j = 0; j < J; ++j) aux_ids_.emplace_back(e, j);
  W_ = Matrix::Zero(static_cast<Eigen::Index>(dofs_.size()),
                    static_cast<Eigen::Index>(aux_ids_.size()));
  for (std::size_t c = 0; c < aux_ids_.size(); ++c) {
    const auto [e, j] = aux_ids_[c];
    const ElementAux& ea = aux.element(e);
    const auto& sv = ea.svecs(family);
    for (std::size_t a = 0; a < ea.nodes.size(); ++a) {
      const int k = grid.free_index(ea.nodes[a]);
      if (k < 0) continue;
      for (int comp = 0; comp < ncomp; ++comp) {
        const int l = local[ncomp * k + comp];
        if (l >= 0) W_(l, static_cast<Eigen::Index>(c)) = sv(ncomp * a + comp, j);
      }
    }
  }

  K_factor_.compute(K_);
  if (K_factor_.info() != Eigen::Success)
    throw NumericalError("patch stiffness factorization failed");
  Z_ = K_factor_.solve(W_);
  Matrix cap = W_.transpose() * Z_;
  cap.diagonal().array() += 1.0;
  cap_factor_.compute(cap);
  if (cap_factor_.info() != Eigen::Success)
    throw NumericalError("constraint capacitance factorization failed");
}

Vector ConstrainedPatchSolver::solve(const Vector& rhs) const {
  const Vector y = K_factor_.solve(rhs);
  if (W_.cols() == 0) return y;
  return y - Z_ * cap_factor_.solve(W_.transpose() * y);
}

Vector ConstrainedPatchSolver::solve_constraint(int c) const {
  Vector e = Vector::Zero(W_.cols());
  e[c] = 1.0;
  return Z_ * cap_factor_.solve(e);
}

double ConstrainedPatchSolver::relative_residual(const Vector& x, const Vector& rhs) const {
  const Vector r = K_ * x + W_ * (W_.transpose() * x) - rhs;
  const double nb = rhs.norm();
  if (nb == 0.0) return r.norm();
  return r.norm() / nb;
}

SparseMatrix ConstrainedPatchSolver::to_global(const Vector& x, int global_size) const {
  std::vector<Triplet> t;
  t.reserve(dofs_.size());
  for (std::size_t l = 0; l < dofs_.size(); ++l)
    if (x[static_cast<Eigen::Index>(l)] != 0.0) t.emplace_back(dofs_[l], 0, x[static_cast<Eigen::Index>(l)]);
  SparseMatrix m(global_size, 1);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Vector ConstrainedPatchSolver::gather(const Vector& global) const {
  Vector x(static_cast<Eigen::Index>(dofs_.size()));
  for (std::size_t l = 0; l < dofs_.size(); ++l) x[static_cast<Eigen::Index>(l)] = global[dofs_[l]];
  return x;
}

namespace {

void build_family(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux, int layers,
                  Family family, MultiscaleSpace& space) {
  const int ne = grid.num_coarse_cells();
  const int J = aux.J(family);
  const int rows = family == Family::displacement ? ops.n_u() : ops.n_p();
  std::vector<std::vector<Triplet>> triplets(ne);
  parallel::parallel_for(ne, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    const Patch patch = oversample_element(grid, i, layers);
    const ConstrainedPatchSolver solver(grid, ops, aux, patch, family);
    const auto& ids = solver.constraints();
    for (int j = 0; j < J; ++j) {
      const auto it = std::find(ids.begin(), ids.end(), std::make_pair(i, j));
      const Vector x = solver.solve_constraint(static_cast<int>(it - ids.begin()));
      for (std::size_t l = 0; l < solver.dofs().size(); ++l)
        if (x[static_cast<Eigen::Index>(l)] != 0.0)
          triplets[idx].emplace_back(solver.dofs()[l], i * J + j, x[static_cast<Eigen::Index>(l)]);
    }
  });
  auto& R = family == Family::displacement ? space.RV : space.RQ;
  auto& org = family == Family::displacement ? space.origin_u : space.origin_p;
  R = columns_to_matrix(rows, triplets, ne * J);
  org.clear();
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < J; ++j) org.push_back({ColumnOrigin::Kind::offline, i, j, -1, -1});
}

} // namespace

MultiscaleSpace build_offline_basis(const GridPair& grid, const OperatorSet& ops,
                                    const AuxBasis& aux, int layers) {
  if (layers < 0) throw ConfigError("oversampling layers must be >= 0");
  MultiscaleSpace space;
  space.layers = layers;
  build_family(grid, ops, aux, layers, Family::displacement, space);
  build_family(grid, ops, aux, layers, Family::pressure, space);
  return space;
}

MultiscaleSpace build_global_basis_oracle(const GridPair& grid, const OperatorSet& ops,
                                          const AuxBasis& aux) {
  return build_offline_basis(grid, ops, aux, std::max(grid.ncx(), grid.ncy()));
}

Matrix build_element_basis(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux,
                           int element, int layers, Family family) {
  const Patch patch = oversample_element(grid, element, layers);
  const ConstrainedPatchSolver solver(grid, ops, aux, patch, family);
  const int J = aux.J(family);
  const int rows = family == Family::displacement ? ops.n_u() : ops.n_p();
  Matrix out = Matrix::Zero(rows, J);
  const auto& ids = solver.constraints();
  for (int j = 0; j < J; ++j) {
    const auto it = std::find(ids.begin(), ids.end(), std::make_pair(element, j));
    const Vector x = solver.solve_constraint(static_cast<int>(it - ids.begin()));
    for (std::size_t l = 0; l < solver.dofs().size(); ++l)
      out(solver.dofs()[l], j) = x[static_cast<Eigen::Index>(l)];
  }
  return out;
}

double offline_residual(const GridPair& grid, const OperatorSet& ops, const AuxBasis& aux,
                        const MultiscaleSpace& space, Family family) {
  const SparseMatrix& R = space.basis(family);
  const auto& origins = family == Family::displacement ? space.origin_u : space.origin_p;
  const SparseMatrix& K = stiffness(ops, family);
  std::vector<double> worst(R.cols(), 0.0);
  parallel::parallel_for(static_cast<std::size_t>(R.cols()), [&](std::size_t c) {
    const ColumnOrigin& o = origins[c];
    if (o.kind != ColumnOrigin::Kind::offline) return;
    const Vector psi = R.col(static_cast<Eigen::Index>(c));
    // a(psi, v) + s(pi psi, pi v) - s(basis_j, pi v), assembled through the
    // broken-field projection machinery rather than the solver's W matrix.
    const Vector coeff = pi_coefficients(aux, family, to_broken(aux, grid, family, psi));
    BrokenField weighted(aux.num_elements());
    const int J = aux.J(family);
    for (int e = 0; e < aux.num_elements(); ++e)
      weighted[e] = aux.element(e).svecs(family) * coeff.segment(e * J, J);
    const Vector target = aux.constraint_column(grid, family, o.region, o.index);
    const Vector res = K * psi + scatter_broken(aux, grid, family, weighted) - target;
    const Patch patch = oversample_element(grid, o.region, space.layers);
    const std::vector<int> dofs = family_dofs(grid, patch, family);
    double rn = 0.0, tn = 0.0;
    for (int d : dofs) {
      rn += res[d] * res[d];
      tn += target[d] * target[d];
    }
    worst[c] = tn > 0 ? std::sqrt(rn / tn) : std::sqrt(rn);
  });
  return worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
}

CoarseOperators galerkin_project(const MultiscaleSpace& space, const OperatorSet& ops) {
  if (space.dof_u() == 0 || space.dof_p() == 0)
    throw ConfigError("cannot project onto an empty multiscale space");
  CoarseOperators c;
  const SparseMatrix AR = ops.A * space.RV;
  const SparseMatrix BR = ops.B * space.RQ;
  const SparseMatrix CR = ops.C * space.RQ;
  const SparseMatrix DR = ops.D * space.RV;
  c.A = Matrix(SparseMatrix(space.RV.transpose()) * AR);
  c.B = Matrix(SparseMatrix(space.RQ.transpose()) * BR);
  c.C = Matrix(SparseMatrix(space.RQ.transpose()) * CR);
  c.D = Matrix(SparseMatrix(space.RQ.transpose()) * DR);
  return c;
}

void dump_basis(const MultiscaleSpace& space, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["layers"] = space.layers;
  manifest["generation"] = space.generation;
  auto write_family = [&](const char* name, const SparseMatrix& R,
                          const std::vector<ColumnOrigin>& origins) {
    const std::string file = std::string(name) + "_columns.bin";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    for (int c = 0; c < R.cols(); ++c) {
      const Vector col = R.col(c);
      // x86-64 and aarch64 are little-endian, matching the declared format.
      out.write(reinterpret_cast<const char*>(col.data()),
                static_cast<std::streamsize>(col.size() * sizeof(double)));
    }
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& o : origins) {
      const char* kind = o.kind == ColumnOrigin::Kind::offline  ? "offline"
                         : o.kind == ColumnOrigin::Kind::online ? "online"
                                                                : "fine";
      cols.push_back({{"kind", kind},
                      {"region", o.region},
                      {"index", o.index},
                      {"time_index", o.time_index},
                      {"iteration", o.iteration}});
    }
    manifest[name] = {{"file", file}, {"rows", R.rows()}, {"cols", R.cols()},
                      {"dtype", "float64-le"}, {"columns", cols}};
  };
  write_family("displacement", space.RV, space.origin_u);
  write_family("pressure", space.RQ, space.origin_p);
  std::ofstream m(dir / "basis_manifest.json");
  m << manifest.dump(2) << '\n';
}

} // namespace cem
