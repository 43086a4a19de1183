#include <doctest.h>

#include <cmath>
#include <limits>

#include "cemporo/auxspace.hpp"
#include "oracles.hpp"

using namespace cem;

TEST_CASE("local kernels: three rigid modes, one constant") {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 4; ++trial) {
    const GridPair g(2, 2, gen.integer(2, 5));
    const MaterialField f = oracle::random_field(g, 100 + trial, 1e4);
    for (int e = 0; e < g.num_coarse_cells(); ++e) {
      const ElementAux a = solve_local_spectral(g, f, e, 4, 2);
      const Vector& du = a.disp_values;
      const Vector& dp = a.pres_values;
      int zu = 0, zp = 0;
      for (int i = 0; i < du.size(); ++i) zu += du[i] <= 1e-10 * du[3];
      for (int i = 0; i < dp.size(); ++i) zp += dp[i] <= 1e-10 * dp[1];
      CHECK(zu == 3);
      CHECK(zp == 1);
    }
  }
}

TEST_CASE("kept eigenvectors are s-orthonormal and satisfy their eigen-equation") {
  const GridPair g(3, 2, 4);
  const MaterialField f = oracle::random_field(g, 8, 1e3);
  const int J1 = 6, J2 = 3;
  for (int e : {0, 4}) {
    const ElementAux a = solve_local_spectral(g, f, e, J1, J2);
    const ElementOperators ops = assemble_element_operators(g, f, e);
    const Matrix gu = a.disp_vecs.transpose() * ops.S1 * a.disp_vecs;
    const Matrix gp = a.pres_vecs.transpose() * ops.S2 * a.pres_vecs;
    CHECK((gu - Matrix::Identity(J1, J1)).norm() < 1e-10);
    CHECK((gp - Matrix::Identity(J2, J2)).norm() < 1e-10);
    CHECK((a.disp_svecs - ops.S1 * a.disp_vecs).norm() < 1e-14 * a.disp_svecs.norm());
    for (int j = 0; j < J1; ++j) {
      const Vector v = a.disp_vecs.col(j);
      const Vector r = ops.A * v - a.disp_values[j] * (ops.S1 * v);
      CHECK(r.norm() <= 1e-8 * std::max(1.0, (ops.A * v).norm()));
      // Rayleigh quotient
      CHECK(v.dot(ops.A * v) == doctest::Approx(a.disp_values[j]).epsilon(1e-8).scale(1.0));
    }
    for (int j = 0; j < J2; ++j) {
      const Vector v = a.pres_vecs.col(j);
      CHECK(v.dot(ops.B * v) == doctest::Approx(a.pres_values[j]).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("pi is an s-orthogonal projection") {
  const GridPair g(2, 2, 3);
  const MaterialField f = oracle::random_field(g, 13, 1e2);
  const AuxBasis aux = build_aux_basis(g, f, 4, 2);
  oracle::Gen gen(5);
  for (Family fam : {Family::displacement, Family::pressure}) {
    const int ncomp = fam == Family::displacement ? 2 : 1;
    const Vector v = gen.vector(ncomp * g.num_free_nodes());
    const BrokenField p1 = project_pi(aux, g, fam, v);
    const BrokenField p2 = project_pi(aux, fam, p1);
    const BrokenField bv = to_broken(aux, g, fam, v);
    for (int i = 0; i < aux.num_elements(); ++i) {
      CHECK((p2[i] - p1[i]).norm() < 1e-10 * (1 + p1[i].norm()));
      // residual v - pi v is s-orthogonal to the kept vectors
      const Vector resid = bv[i] - p1[i];
      CHECK((aux.element(i).svecs(fam).transpose() * resid).norm() < 1e-10 * (1 + bv[i].norm()));
    }
  }
}

TEST_CASE("broken gather/scatter and constraint columns") {
  const GridPair g(2, 2, 2);
  const MaterialField f = homogeneous_field(g, 1.0, {});
  const AuxBasis aux = build_aux_basis(g, f, 3, 1);
  const Vector ones = Vector::Ones(g.num_free_nodes());
  const Vector mult = scatter_broken(aux, g, Family::pressure, to_broken(aux, g, Family::pressure, ones));
  // centre node is shared by 4 elements, edge midpoints by 2
  CHECK(mult[g.free_index(g.fine_node(2, 2))] == 4.0);
  CHECK(mult[g.free_index(g.fine_node(1, 2))] == 2.0);
  CHECK(mult[g.free_index(g.fine_node(1, 1))] == 1.0);

  const Vector col = aux.constraint_column(g, Family::pressure, 0, 0);
  const ElementAux& e = aux.element(0);
  for (std::size_t a = 0; a < e.nodes.size(); ++a) {
    const int k = g.free_index(e.nodes[a]);
    if (k >= 0) CHECK(col[k] == e.pres_svecs(a, 0));
  }
  CHECK(col[g.free_index(g.fine_node(3, 3))] == 0.0);
}

TEST_CASE("J outside the local dimension is rejected") {
  const GridPair g(1, 1, 2);
  const MaterialField f = homogeneous_field(g, 1.0, {});
  CHECK_THROWS_AS(solve_local_spectral(g, f, 0, 0, 1), ConfigError);
  CHECK_THROWS_AS(solve_local_spectral(g, f, 0, 19, 1), ConfigError);
  CHECK_THROWS_AS(solve_local_spectral(g, f, 0, 2, 10), ConfigError);
  CHECK_THROWS_AS(solve_local_spectral(g, f, 1, 2, 1), ConfigError);
  CHECK_NOTHROW(solve_local_spectral(g, f, 0, 18, 9));
}

TEST_CASE("decay factor and spectral diagnostics") {
  CHECK(decay_factor(1.0, 1) == doctest::Approx(2.0));
  CHECK(decay_factor(1.0, 3) == doctest::Approx(1.28));
  CHECK(std::isinf(decay_factor(0.0, 2)));
  CHECK(decay_factor(4.0, 5) < decay_factor(4.0, 4));

  const GridPair g(2, 2, 3);
  const MaterialField f = oracle::random_field(g, 3, 10);
  const SpectralDiagnostics d2 = spectral_diagnostics(build_aux_basis(g, f, 2, 1), 2);
  CHECK(d2.lambda_u == 0.0);
  CHECK(d2.lambda_p > 0.0);
  CHECK(std::isinf(d2.C_e));
  const SpectralDiagnostics d4 = spectral_diagnostics(build_aux_basis(g, f, 4, 2), 2);
  CHECK(d4.lambda_u > 0.0);
  CHECK(d4.Lambda == std::min(d4.lambda_u, d4.lambda_p));
  CHECK(d4.C_e == doctest::Approx(decay_factor(d4.Lambda, 2)));
}
