#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "cemporo/assembly.hpp"
#include "oracles.hpp"

using namespace cem;
namespace fs = std::filesystem;

namespace {

double rel(const SparseMatrix& a, const Matrix& b) { return oracle::rel_diff(Matrix(a), b); }

} // namespace

TEST_CASE("operators match the dense oracle on a random field") {
  for (std::uint64_t seed : {1u, 2u}) {
    const GridPair g(2, 3, 3);
    const MaterialField f = oracle::random_field(g, seed, 1e3, {0.3, 0.8, 2.0, 1.7});
    const PartitionOfUnity pou(g);
    const OperatorSet ops = assemble_operators(g, f, pou);
    const oracle::DenseOps ref = oracle::dense_assemble(g, f);
    CHECK(rel(ops.A, ref.A) < 1e-12);
    CHECK(rel(ops.B, ref.B) < 1e-12);
    CHECK(rel(ops.C, ref.C) < 1e-12);
    CHECK(rel(ops.D, ref.D) < 1e-12);
    CHECK(rel(ops.Mp, ref.Mp) < 1e-12);
    CHECK(rel(ops.S1, ref.S1) < 1e-12);
    CHECK(rel(ops.S2, ref.S2) < 1e-12);
  }
}

TEST_CASE("hand stencils at an interior node of a uniform mesh") {
  const GridPair g(1, 1, 4);
  const MaterialField f = homogeneous_field(g, 1.0, {});
  const OperatorSet ops = assemble_operators(g, f, PartitionOfUnity(g));
  const int k = g.free_index(g.fine_node(2, 2));
  const double h = g.h();
  CHECK(ops.B.coeff(k, k) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(ops.B.coeff(k, g.free_index(g.fine_node(3, 2))) == doctest::Approx(-1.0 / 3.0));
  CHECK(ops.B.coeff(k, g.free_index(g.fine_node(3, 3))) == doctest::Approx(-1.0 / 3.0));
  CHECK(ops.Mp.coeff(k, k) == doctest::Approx(4.0 * h * h / 9.0).epsilon(1e-14));
  CHECK(ops.C.coeff(k, k) == doctest::Approx(ops.Mp.coeff(k, k) / f.M()));
}

TEST_CASE("stiffness matrices are symmetric positive definite") {
  const GridPair g(2, 2, 3);
  const MaterialField f = oracle::random_field(g, 5, 1e4);
  const OperatorSet ops = assemble_operators(g, f, PartitionOfUnity(g));
  for (const SparseMatrix* m : {&ops.A, &ops.B, &ops.S1, &ops.S2, &ops.Mp}) {
    const Matrix d(*m);
    CHECK((d - d.transpose()).norm() <= 1e-14 * d.norm());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(d);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("element Neumann operators: rigid motions and constants in the kernel") {
  const GridPair g(3, 3, 4);
  const MaterialField f = oracle::random_field(g, 9, 1e4);
  const ElementOperators e = assemble_element_operators(g, f, g.coarse_cell(1, 2));
  const int n = static_cast<int>(e.nodes.size());
  REQUIRE(n == 25);
  Vector tx = Vector::Zero(2 * n), ty = Vector::Zero(2 * n), rot(2 * n), one = Vector::Ones(n);
  for (int k = 0; k < n; ++k) {
    const auto [x, y] = g.fine_node_xy(e.nodes[k]);
    tx[2 * k] = 1;
    ty[2 * k + 1] = 1;
    rot[2 * k] = -y;
    rot[2 * k + 1] = x;
  }
  const double scale = e.A.norm();
  CHECK((e.A * tx).norm() < 1e-12 * scale);
  CHECK((e.A * ty).norm() < 1e-12 * scale);
  CHECK((e.A * rot).norm() < 1e-12 * scale);
  CHECK((e.B * one).norm() < 1e-12 * e.B.norm());
  const Eigen::SelfAdjointEigenSolver<Matrix> es(e.S1);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("patch restriction equals the submatrix on patch dofs") {
  const GridPair g(3, 3, 2);
  const MaterialField f = oracle::random_field(g, 4, 100);
  const OperatorSet ops = assemble_operators(g, f, PartitionOfUnity(g));
  const Patch p = oversample_element(g, g.coarse_cell(0, 1), 1);
  const LocalOperators loc = restrict_to_patch(ops, g, p);
  REQUIRE(loc.dofs.p.size() == p.interior_nodes.size());
  REQUIRE(loc.dofs.u.size() == 2 * p.interior_nodes.size());
  const Matrix A(ops.A), D(ops.D);
  for (std::size_t i = 0; i < loc.dofs.u.size(); ++i)
    for (std::size_t j = 0; j < loc.dofs.u.size(); ++j)
      CHECK(loc.A.coeff(i, j) == A(loc.dofs.u[i], loc.dofs.u[j]));
  for (std::size_t i = 0; i < loc.dofs.p.size(); ++i)
    for (std::size_t j = 0; j < loc.dofs.u.size(); ++j)
      CHECK(loc.D.coeff(i, j) == D(loc.dofs.p[i], loc.dofs.u[j]));
}

TEST_CASE("sine load against the interpolated sine converges to pi^2 / 2 at second order") {
  const double exact = std::numbers::pi * std::numbers::pi / 2;
  double prev = 0.0;
  for (int r : {8, 16, 32}) {
    const GridPair g(2, 2, r);
    const Vector load = assemble_load(g, SourceTerm::separable_sine(), 0.0);
    const Vector s = interpolate_scalar(g, [](double x, double y) {
      return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
    });
    const double err = std::abs(load.dot(s) - exact);
    CHECK(err < 0.02 * exact);
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("time-dependent sine scales linearly with t, constant load integrates to one") {
  const GridPair g(2, 2, 3);
  const Vector a = assemble_load(g, SourceTerm::separable_sine(2.0), 0.0);
  const Vector b = assemble_load(g, SourceTerm::time_sine(2.0), 0.7);
  CHECK((b - 0.7 * a).norm() < 1e-14 * a.norm());
  const Vector c = assemble_load_all_nodes(g, SourceTerm::constant(1.0), 0.0);
  CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-14));
  std::vector<double> table(g.num_fine_cells(), 3.0);
  const Vector d = assemble_load_all_nodes(g, SourceTerm::cell_table(table), 5.0);
  CHECK(d.sum() == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("matrix market export") {
  SparseMatrix m(3, 2);
  m.insert(0, 1) = 2.5;
  m.insert(2, 0) = -1.0;
  m.makeCompressed();
  const fs::path p = fs::temp_directory_path() / "cemporo_mm.mtx";
  export_matrix_market(m, p);
  std::ifstream in(p);
  std::string header, sizes;
  std::getline(in, header);
  CHECK(header.rfind("%%MatrixMarket matrix coordinate", 0) == 0);
  CHECK(header.find("real general") != std::string::npos);
  std::getline(in, sizes);
  while (!sizes.empty() && sizes[0] == '%') std::getline(in, sizes);
  CHECK(sizes == "3 2 2");
  int r, c;
  double v;
  in >> r >> c >> v;
  CHECK(((r == 3 && c == 1 && v == -1.0) || (r == 1 && c == 2 && v == 2.5)));
  fs::remove(p);
}
