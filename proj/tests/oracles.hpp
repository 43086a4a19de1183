#pragma once

// Independent reference implementations used only by the tests: dense
// matrices, 3-point Gauss quadrature, tensor-form strain energy.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cemporo/coeff.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/types.hpp"

namespace oracle {

using cem::Matrix;
using cem::Vector;

struct DenseOps {
  Matrix A, B, C, D, S1, S2, Mp;
};

inline constexpr double g3_pt[3] = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
inline constexpr double g3_wt[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// Sum over the 4 coarse hats of |grad chi|^2 at (x, y) in coarse cell (ci, cj).
inline double hat_gradient_sum(const cem::GridPair& g, int ci, int cj, double x, double y) {
  const double Hx = g.Hx(), Hy = g.Hy();
  const double xi = x / Hx - ci, eta = y / Hy - cj;
  double s = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double fx = a ? xi : 1 - xi, fy = b ? eta : 1 - eta;
      const double dfx = (a ? 1.0 : -1.0) / Hx, dfy = (b ? 1.0 : -1.0) / Hy;
      const double gx = dfx * fy, gy = fx * dfy;
      s += gx * gx + gy * gy;
    }
  return s;
}

inline constexpr double g2_pt[2] = {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287};
inline constexpr double g2_wt[2] = {0.5, 0.5};

inline DenseOps dense_assemble_rule(const cem::GridPair& g, const cem::MaterialField& f, int npts) {
  const double* pts = npts == 3 ? g3_pt : g2_pt;
  const double* wts = npts == 3 ? g3_wt : g2_wt;
  const int nf = g.num_free_nodes();
  DenseOps o;
  o.A = Matrix::Zero(2 * nf, 2 * nf);
  o.S1 = Matrix::Zero(2 * nf, 2 * nf);
  o.B = Matrix::Zero(nf, nf);
  o.S2 = Matrix::Zero(nf, nf);
  o.Mp = Matrix::Zero(nf, nf);
  o.D = Matrix::Zero(nf, 2 * nf);
  const double hx = g.hx(), hy = g.hy();
  const int r = g.refinement();
  for (int cy = 0; cy < g.nfy(); ++cy)
    for (int cx = 0; cx < g.nfx(); ++cx) {
      const int cell = g.fine_cell(cx, cy);
      const double lam = f.lambda()[cell], mu = f.mu()[cell], kap = f.kappa()[cell];
      const int ids[4] = {g.free_index(g.fine_node(cx, cy)), g.free_index(g.fine_node(cx + 1, cy)),
                          g.free_index(g.fine_node(cx, cy + 1)),
                          g.free_index(g.fine_node(cx + 1, cy + 1))};
      for (int qa = 0; qa < npts; ++qa)
        for (int qb = 0; qb < npts; ++qb) {
          const double s = pts[qa], t = pts[qb];
          const double w = wts[qa] * wts[qb] * hx * hy;
          const double x = (cx + s) * hx, y = (cy + t) * hy;
          // local nodes: (0,0), (1,0), (0,1), (1,1)
          double N[4], Nx[4], Ny[4];
          for (int k = 0; k < 4; ++k) {
            const int a = k % 2, b = k / 2;
            const double fs = a ? s : 1 - s, ft = b ? t : 1 - t;
            N[k] = fs * ft;
            Nx[k] = (a ? 1.0 : -1.0) / hx * ft;
            Ny[k] = fs * (b ? 1.0 : -1.0) / hy;
          }
          const double wt = hat_gradient_sum(g, cx / r, cy / r, x, y);
          for (int i = 0; i < 4; ++i) {
            if (ids[i] < 0) continue;
            for (int j = 0; j < 4; ++j) {
              if (ids[j] < 0) continue;
              for (int ci = 0; ci < 2; ++ci)
                for (int cj = 0; cj < 2; ++cj) {
                  // grad of vector basis e_c N: row c holds grad N
                  double Gi[2][2] = {{0, 0}, {0, 0}}, Gj[2][2] = {{0, 0}, {0, 0}};
                  Gi[ci][0] = Nx[i];
                  Gi[ci][1] = Ny[i];
                  Gj[cj][0] = Nx[j];
                  Gj[cj][1] = Ny[j];
                  double epsij = 0.0;
                  for (int p = 0; p < 2; ++p)
                    for (int q = 0; q < 2; ++q) {
                      const double ei = 0.5 * (Gi[p][q] + Gi[q][p]);
                      const double ej = 0.5 * (Gj[p][q] + Gj[q][p]);
                      epsij += ei * ej;
                    }
                  const double divi = Gi[0][0] + Gi[1][1], divj = Gj[0][0] + Gj[1][1];
                  o.A(2 * ids[i] + ci, 2 * ids[j] + cj) += w * (2 * mu * epsij + lam * divi * divj);
                  if (ci == cj)
                    o.S1(2 * ids[i] + ci, 2 * ids[j] + cj) += w * (lam + 2 * mu) * wt * N[i] * N[j];
                }
              o.B(ids[i], ids[j]) += w * kap / f.nu() * (Nx[i] * Nx[j] + Ny[i] * Ny[j]);
              o.S2(ids[i], ids[j]) += w * kap / f.nu() * wt * N[i] * N[j];
              o.Mp(ids[i], ids[j]) += w * N[i] * N[j];
              // d(u, q) = alpha * int div(u) q, rows = pressure
              o.D(ids[j], 2 * ids[i]) += w * f.alpha() * Nx[i] * N[j];
              o.D(ids[j], 2 * ids[i] + 1) += w * f.alpha() * Ny[i] * N[j];
            }
          }
        }
    }
  o.C = o.Mp / f.M();
  return o;
}

/// Exact (3-point) quadrature for the stiffness, coupling and mass terms;
/// the sigma/kappa-tilde weighted masses use the 2-point rule the library
/// is specified with (their weight is quadratic, so no rule is "the" value).
inline DenseOps dense_assemble(const cem::GridPair& g, const cem::MaterialField& f) {
  DenseOps o = dense_assemble_rule(g, f, 3);
  const DenseOps o2 = dense_assemble_rule(g, f, 2);
  o.S1 = o2.S1;
  o.S2 = o2.S2;
  return o;
}

/// Random piecewise-constant field with log-uniform values in [1, contrast].
inline cem::MaterialField random_field(const cem::GridPair& g, std::uint64_t seed, double contrast,
                                       cem::BiotScalars s = {}) {
  std::mt19937_64 rng(seed);
  std::vector<double> E(g.num_fine_cells()), K(g.num_fine_cells());
  const double lc = std::log(contrast);
  for (auto& e : E) e = std::exp(lc * ((rng() >> 11) * 0x1.0p-53));
  for (auto& k : K) k = std::exp(lc * ((rng() >> 11) * 0x1.0p-53));
  return cem::MaterialField(g.nfx(), g.nfy(), E, K, s);
}

/// Hand-rolled generator helpers for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  int integer(int lo, int hi) { return lo + static_cast<int>(rng() % std::uint64_t(hi - lo + 1)); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53); }
  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(-1.0, 1.0);
    return v;
  }
};

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double n = b.norm();
  return n > 0 ? (a - b).norm() / n : (a - b).norm();
}

} // namespace oracle
