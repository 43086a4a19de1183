#include "cemporo/poro_solver.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace cem {

TimeGrid::TimeGrid(double tau_, int N_) : tau(tau_), N(N_) {
  if (!(tau > 0.0)) throw ConfigError("time step must be positive");
  if (N < 1) throw ConfigError("step count must be at least 1");
}

TimeGrid TimeGrid::from_final_time(double tau, double T) {
  if (!(tau > 0.0) || !(T > 0.0)) throw ConfigError("time step and final time must be positive");
  const double steps = T / tau;
  const double N = std::round(steps);
  if (std::abs(steps - N) > 1e-9 * std::max(1.0, steps))
    throw ConfigError("final time " + std::to_string(T) + " is not a multiple of tau " +
                      std::to_string(tau));
  return TimeGrid(tau, static_cast<int>(N));
}

Vector project_initial_pressure(const GridPair& grid, const OperatorSet& ops,
                                const ScalarFunction& p0) {
  const Vector rhs = assemble_function_load(grid, p0);
  Eigen::SimplicialLDLT<SparseMatrix> mass(ops.Mp);
  if (mass.info() != Eigen::Success) throw NumericalError("pressure mass factorization failed");
  return mass.solve(rhs);
}

SolutionState initial_state(const GridPair& grid, const OperatorSet& ops,
                            const ScalarFunction& p0) {
  SolutionState s;
  s.p = project_initial_pressure(grid, ops, p0);
  Eigen::SimplicialLDLT<SparseMatrix> A(ops.A);
  if (A.info() != Eigen::Success) throw NumericalError("elasticity factorization failed");
  s.u = A.solve(Vector(ops.D.transpose() * s.p));
  s.tag = SpaceTag{true, -1};
  s.n = 0;
  return s;
}

Matrix energy_coordinates(const Matrix& K) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  if (es.info() != Eigen::Success) throw NumericalError("coarse eigendecomposition failed");
  const Vector& w = es.eigenvalues();
  const double cutoff = 1e-13 * std::max(w.cwiseAbs().maxCoeff(), 1e-300);
  int first = 0;
  while (first < w.size() && w[first] <= cutoff) ++first;
  const int k = static_cast<int>(w.size()) - first;
  Matrix T(K.rows(), k);
  for (int j = 0; j < k; ++j)
    T.col(j) = es.eigenvectors().col(first + j) / std::sqrt(w[first + j]);
  return T;
}

namespace {

Vector solve_spd(const Matrix& K, const Vector& rhs) {
  const Matrix T = energy_coordinates(K);
  return T * (T.transpose() * rhs);
}

} // namespace

SolutionState initial_state(const OperatorSet& ops, const MultiscaleSpace& space,
                            const SolutionState& fine0) {
  const CoarseOperators c = galerkin_project(space, ops);
  SolutionState s;
  s.p = solve_spd(c.B, Vector(space.RQ.transpose() * (ops.B * fine0.p)));
  const Vector p_fine = space.RQ * s.p;
  s.u = solve_spd(c.A, Vector(space.RV.transpose() * (ops.D.transpose() * p_fine)));
  s.tag = SpaceTag{false, space.generation};
  s.n = 0;
  return s;
}

FineStepper::FineStepper(const OperatorSet& ops, double tau) : ops_(&ops), tau_(tau) {
  const int nu = ops.n_u(), np = ops.n_p();
  std::vector<Triplet> t;
  t.reserve(ops.A.nonZeros() + 2 * ops.D.nonZeros() + ops.B.nonZeros() + ops.C.nonZeros());
  for (int j = 0; j < ops.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(ops.A, j); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < ops.D.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(ops.D, j); it; ++it) {
      t.emplace_back(nu + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nu + it.row(), -it.value());
    }
  const SparseMatrix E = ops.C + tau * ops.B;
  for (int j = 0; j < E.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(E, j); it; ++it)
      t.emplace_back(nu + it.row(), nu + it.col(), it.value());
  SparseMatrix K(nu + np, nu + np);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  lu_.compute(K);
  if (lu_.info() != Eigen::Success) throw NumericalError("fine block factorization failed");
}

SolutionState FineStepper::step(const SolutionState& prev, const Vector& load) const {
  const int nu = ops_->n_u(), np = ops_->n_p();
  Vector rhs = Vector::Zero(nu + np);
  rhs.tail(np) = tau_ * load + ops_->D * prev.u + ops_->C * prev.p;
  const Vector x = lu_.solve(rhs);
  if (lu_.info() != Eigen::Success) throw NumericalError("fine block solve failed");
  SolutionState s;
  s.u = x.head(nu);
  s.p = x.tail(np);
  s.tag = SpaceTag{true, -1};
  s.n = prev.n + 1;
  return s;
}

MultiscaleStepper::MultiscaleStepper(const OperatorSet& ops, const MultiscaleSpace& space,
                                     double tau)
    : ops_(&ops), space_(&space), tau_(tau), generation_(space.generation),
      coarse_(galerkin_project(space, ops)) {
  Tu_ = energy_coordinates(coarse_.A);
  Tp_ = energy_coordinates(coarse_.B);
  const int ku = static_cast<int>(Tu_.cols()), kp = static_cast<int>(Tp_.cols());
  Matrix K(ku + kp, ku + kp);
  const Matrix Dr = Tp_.transpose() * coarse_.D * Tu_;
  K.topLeftCorner(ku, ku) = Tu_.transpose() * coarse_.A * Tu_;
  K.topRightCorner(ku, kp) = -Dr.transpose();
  K.bottomLeftCorner(kp, ku) = Dr;
  K.bottomRightCorner(kp, kp) = Tp_.transpose() * (coarse_.C + tau * coarse_.B) * Tp_;
  lu_.compute(K);
}

SolutionState MultiscaleStepper::step(const Vector& u_prev, const Vector& p_prev,
                                      const Vector& load, int n) const {
  const int ku = static_cast<int>(Tu_.cols()), kp = static_cast<int>(Tp_.cols());
  const Vector g = tau_ * load + ops_->D * u_prev + ops_->C * p_prev;
  Vector rhs = Vector::Zero(ku + kp);
  rhs.tail(kp) = Tp_.transpose() * (space_->RQ.transpose() * g);
  const Vector y = lu_.solve(rhs);
  if (!y.allFinite()) throw NumericalError("multiscale step produced non-finite values");
  SolutionState s;
  s.u = Tu_ * y.head(ku);
  s.p = Tp_ * y.tail(kp);
  s.tag = SpaceTag{false, generation_};
  s.n = n;
  return s;
}

Vector MultiscaleStepper::lift_u(const Vector& coeff) const { return space_->RV * coeff; }
Vector MultiscaleStepper::lift_p(const Vector& coeff) const { return space_->RQ * coeff; }

Trajectory run_fine(const OperatorSet& ops, const TimeGrid& time, const LoadFunction& load,
                    const SolutionState& initial) {
  Trajectory tr;
  const FineStepper stepper(ops, time.tau);
  SolutionState s = initial;
  tr.u.push_back(s.u);
  tr.p.push_back(s.p);
  tr.dof_u.push_back(ops.n_u());
  tr.dof_p.push_back(ops.n_p());
  for (int n = 1; n <= time.N; ++n) {
    s = stepper.step(s, load(n));
    tr.u.push_back(s.u);
    tr.p.push_back(s.p);
    tr.dof_u.push_back(ops.n_u());
    tr.dof_p.push_back(ops.n_p());
  }
  return tr;
}

Trajectory run_multiscale(const OperatorSet& ops, MultiscaleSpace& space, const TimeGrid& time,
                          const LoadFunction& load, const SolutionState& fine_initial,
                          const StepHook& hook, const Trajectory* reference) {
  Trajectory tr;
  const SolutionState s0 = initial_state(ops, space, fine_initial);
  Vector u_prev = space.RV * s0.u;
  Vector p_prev = space.RQ * s0.p;
  tr.u.push_back(u_prev);
  tr.p.push_back(p_prev);
  tr.dof_u.push_back(space.dof_u());
  tr.dof_p.push_back(space.dof_p());

  auto stepper = std::make_unique<MultiscaleStepper>(ops, space, time.tau);
  for (int n = 1; n <= time.N; ++n) {
    if (stepper->generation() != space.generation)
      stepper = std::make_unique<MultiscaleStepper>(ops, space, time.tau);
    const Vector f = load(n);
    SolutionState s = stepper->step(u_prev, p_prev, f, n);
    if (hook) {
      StepContext ctx;
      ctx.n = n;
      ctx.t = time.t(n);
      ctx.load = &f;
      ctx.u_prev = &u_prev;
      ctx.p_prev = &p_prev;
      if (reference) {
        ctx.u_ref = &reference->u.at(n);
        ctx.p_ref = &reference->p.at(n);
      }
      ctx.space = &space;
      ctx.state = &s;
      hook(ctx);
      // Columns are only ever appended, so a state left in an older space
      // extends by zeros.
      if (s.u.size() < space.dof_u()) s.u.conservativeResizeLike(Vector::Zero(space.dof_u()));
      if (s.p.size() < space.dof_p()) s.p.conservativeResizeLike(Vector::Zero(space.dof_p()));
    }
    u_prev = space.RV * s.u;
    p_prev = space.RQ * s.p;
    tr.u.push_back(u_prev);
    tr.p.push_back(p_prev);
    tr.dof_u.push_back(space.dof_u());
    tr.dof_p.push_back(space.dof_p());
  }
  return tr;
}

} // namespace cem
