#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "cemporo/cembasis.hpp"
#include "oracles.hpp"

using namespace cem;
namespace fs = std::filesystem;

namespace {

struct Setup {
  GridPair grid;
  MaterialField field;
  PartitionOfUnity pou;
  OperatorSet ops;
  AuxBasis aux;
  Setup(int nc, int r, int J1, int J2, std::uint64_t seed, double contrast)
      : grid(nc, nc, r), field(oracle::random_field(grid, seed, contrast)), pou(grid),
        ops(assemble_operators(grid, field, pou)), aux(build_aux_basis(grid, field, J1, J2)) {}
};

// Dense (K + W W^T) on the patch, W built column by column from the
// auxiliary basis of every element inside the patch.
Matrix dense_patch_operator(const Setup& s, const Patch& p, Family f, const std::vector<int>& dofs) {
  const SparseMatrix& K = f == Family::displacement ? s.ops.A : s.ops.B;
  const int n = static_cast<int>(dofs.size());
  Matrix M(n, n);
  const Matrix Kd(K);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = Kd(dofs[i], dofs[j]);
  for (int e : p.coarse_cells)
    for (int j = 0; j < s.aux.J(f); ++j) {
      const Vector c = s.aux.constraint_column(s.grid, f, e, j);
      Vector w(n);
      for (int i = 0; i < n; ++i) w[i] = c[dofs[i]];
      M += w * w.transpose();
    }
  return M;
}

std::set<int> patch_global_dofs(const GridPair& g, const Patch& p, Family f) {
  std::set<int> out;
  for (int node : p.interior_nodes) {
    const int k = g.free_index(node);
    if (f == Family::displacement) {
      out.insert(2 * k);
      out.insert(2 * k + 1);
    } else {
      out.insert(k);
    }
  }
  return out;
}

} // namespace

TEST_CASE("Woodbury patch solve agrees with a dense solve") {
  const Setup s(3, 3, 3, 2, 17, 1e4);
  for (Family f : {Family::displacement, Family::pressure}) {
    for (int layers : {0, 1}) {
      const Patch p = oversample_element(s.grid, 4, layers);
      const ConstrainedPatchSolver solver(s.grid, s.ops, s.aux, p, f);
      const Matrix M = dense_patch_operator(s, p, f, solver.dofs());
      oracle::Gen gen(layers + 1);
      const Vector b = gen.vector(static_cast<int>(solver.dofs().size()));
      const Vector x = solver.solve(b);
      const Vector xd = M.ldlt().solve(b);
      CHECK((x - xd).norm() <= 1e-9 * xd.norm());
      CHECK(solver.relative_residual(x, b) < 1e-10);
      CHECK(solver.constraints().size() == p.coarse_cells.size() * s.aux.J(f));
    }
  }
}

TEST_CASE("offline columns: support, counts and defining equations") {
  const Setup s(4, 3, 3, 2, 5, 1e4);
  const int layers = 1;
  const MultiscaleSpace space = build_offline_basis(s.grid, s.ops, s.aux, layers);
  CHECK(space.dof_u() == 16 * 3);
  CHECK(space.dof_p() == 16 * 2);
  CHECK(space.RV.rows() == s.ops.n_u());
  CHECK(space.layers == layers);
  for (Family f : {Family::displacement, Family::pressure}) {
    const SparseMatrix& R = space.basis(f);
    const int J = s.aux.J(f);
    for (int c = 0; c < R.cols(); ++c) {
      const auto& o = (f == Family::displacement ? space.origin_u : space.origin_p)[c];
      CHECK(o.kind == ColumnOrigin::Kind::offline);
      CHECK(o.region == c / J);
      CHECK(o.index == c % J);
      const std::set<int> allowed =
          patch_global_dofs(s.grid, oversample_element(s.grid, o.region, layers), f);
      for (SparseMatrix::InnerIterator it(R, c); it; ++it)
        if (it.value() != 0.0) CHECK(allowed.count(static_cast<int>(it.row())) == 1);
    }
    CHECK(offline_residual(s.grid, s.ops, s.aux, space, f) <= 1e-10);
  }
}

TEST_CASE("offline columns equal the dense patch solutions") {
  const Setup s(3, 2, 4, 2, 23, 1e3);
  const int layers = 1, e = 1;
  const Patch p = oversample_element(s.grid, e, layers);
  for (Family f : {Family::displacement, Family::pressure}) {
    const ConstrainedPatchSolver solver(s.grid, s.ops, s.aux, p, f);
    const Matrix M = dense_patch_operator(s, p, f, solver.dofs());
    const Matrix cols = build_element_basis(s.grid, s.ops, s.aux, e, layers, f);
    REQUIRE(cols.cols() == s.aux.J(f));
    for (int j = 0; j < s.aux.J(f); ++j) {
      const Vector c = s.aux.constraint_column(s.grid, f, e, j);
      Vector rhs(solver.dofs().size());
      for (std::size_t i = 0; i < solver.dofs().size(); ++i) rhs[i] = c[solver.dofs()[i]];
      const Vector ref = M.ldlt().solve(rhs);
      Vector got(solver.dofs().size());
      for (std::size_t i = 0; i < solver.dofs().size(); ++i) got[i] = cols(solver.dofs()[i], j);
      CHECK((got - ref).norm() <= 1e-9 * ref.norm());
      // nothing leaks outside the patch
      CHECK(cols.col(j).norm() == doctest::Approx(got.norm()).epsilon(1e-15));
    }
  }
}

TEST_CASE("a patch covering the domain reproduces the global basis") {
  const Setup s(3, 3, 3, 1, 2, 1e4);
  const MultiscaleSpace glob = build_global_basis_oracle(s.grid, s.ops, s.aux);
  const MultiscaleSpace big = build_offline_basis(s.grid, s.ops, s.aux, 3);
  CHECK(oracle::rel_diff(Matrix(big.RV), Matrix(glob.RV)) < 1e-12);
  CHECK(oracle::rel_diff(Matrix(big.RQ), Matrix(glob.RQ)) < 1e-12);
}

TEST_CASE("localized columns approach the global ones as layers grow") {
  const Setup s(6, 3, 3, 2, 31, 1e2);
  const MultiscaleSpace glob = build_global_basis_oracle(s.grid, s.ops, s.aux);
  const Matrix A(s.ops.A), B(s.ops.B);
  double prev_u = 1e300, prev_p = 1e300;
  for (int layers = 1; layers <= 3; ++layers) {
    const MultiscaleSpace loc = build_offline_basis(s.grid, s.ops, s.aux, layers);
    const Matrix du = Matrix(loc.RV) - Matrix(glob.RV);
    const Matrix dp = Matrix(loc.RQ) - Matrix(glob.RQ);
    const double eu = std::sqrt((du.transpose() * A * du).trace());
    const double ep = std::sqrt((dp.transpose() * B * dp).trace());
    CHECK(eu < prev_u);
    CHECK(ep < prev_p);
    prev_u = eu;
    prev_p = ep;
  }
}

TEST_CASE("Galerkin projection onto the identity space returns the fine operators") {
  const Setup s(2, 2, 2, 1, 3, 10);
  const MultiscaleSpace id = identity_space(s.ops);
  CHECK(id.dof_u() == s.ops.n_u());
  const CoarseOperators c = galerkin_project(id, s.ops);
  CHECK((c.A - Matrix(s.ops.A)).norm() == 0.0);
  CHECK((c.B - Matrix(s.ops.B)).norm() == 0.0);
  CHECK((c.C - Matrix(s.ops.C)).norm() == 0.0);
  CHECK((c.D - Matrix(s.ops.D)).norm() == 0.0);
}

TEST_CASE("Galerkin projection of random columns matches dense products") {
  const Setup s(2, 2, 2, 1, 4, 10);
  MultiscaleSpace sp = build_offline_basis(s.grid, s.ops, s.aux, 1);
  const CoarseOperators c = galerkin_project(sp, s.ops);
  const Matrix V(sp.RV), Q(sp.RQ);
  CHECK(oracle::rel_diff(c.A, V.transpose() * Matrix(s.ops.A) * V) < 1e-13);
  CHECK(oracle::rel_diff(c.D, Q.transpose() * Matrix(s.ops.D) * V) < 1e-13);
}

TEST_CASE("appending columns grows the space and bumps the generation") {
  const Setup s(2, 2, 2, 1, 4, 10);
  MultiscaleSpace sp = build_offline_basis(s.grid, s.ops, s.aux, 1);
  const int g0 = sp.generation, n0 = sp.dof_p();
  SparseMatrix col(s.ops.n_p(), 1);
  col.insert(3, 0) = 1.0;
  append_columns(sp, Family::pressure, {col}, {ColumnOrigin{ColumnOrigin::Kind::online, 2, 0, 5, 1}});
  CHECK(sp.dof_p() == n0 + 1);
  CHECK(sp.generation == g0 + 1);
  CHECK(sp.RQ.coeff(3, n0) == 1.0);
  CHECK(sp.origin_p.back().time_index == 5);
  append_columns(sp, Family::pressure, {}, {});
  CHECK(sp.generation == g0 + 1);
}

TEST_CASE("basis dump writes raw columns and a manifest") {
  const Setup s(2, 2, 2, 1, 4, 10);
  const MultiscaleSpace sp = build_offline_basis(s.grid, s.ops, s.aux, 1);
  const fs::path dir = fs::temp_directory_path() / "cemporo_dump";
  fs::remove_all(dir);
  dump_basis(sp, dir);
  CHECK(fs::file_size(dir / "displacement_columns.bin") ==
        static_cast<std::uintmax_t>(sp.RV.rows() * sp.RV.cols() * 8));
  std::ifstream in(dir / "basis_manifest.json");
  const nlohmann::json m = nlohmann::json::parse(in);
  CHECK(m["pressure"]["cols"] == sp.dof_p());
  CHECK(m["pressure"]["columns"].size() == static_cast<std::size_t>(sp.dof_p()));
  std::ifstream bin(dir / "pressure_columns.bin", std::ios::binary);
  std::vector<double> raw(sp.RQ.rows() * sp.RQ.cols());
  bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
  const Matrix Q(sp.RQ);
  CHECK(raw[sp.RQ.rows() + 2] == Q(2, 1));
  fs::remove_all(dir);
}
