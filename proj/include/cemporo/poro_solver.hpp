#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "cemporo/assembly.hpp"
#include "cemporo/cembasis.hpp"
#include "cemporo/types.hpp"

namespace cem {

struct TimeGrid {
  double tau = 0.0;
  int N = 0;

  TimeGrid() = default;
  TimeGrid(double tau, int N);
  /// N = round(T / tau); T must be a whole multiple of tau up to 1e-9.
  static TimeGrid from_final_time(double tau, double T);

  double T() const { return N * tau; }
  double t(int n) const { return n * tau; }
};

/// Which space a state's coefficient vectors refer to.
struct SpaceTag {
  bool fine = true;
  int generation = -1;

  bool operator==(const SpaceTag&) const = default;
};

struct SolutionState {
  Vector u;
  Vector p;
  SpaceTag tag;
  int n = 0;
};

/// T with T^T K T = I on the numerical range of a symmetric positive
/// semidefinite K (eigenvalues below 1e-13 of the largest are dropped).
Matrix energy_coordinates(const Matrix& K);

using ScalarFunction = std::function<double(double, double)>;

/// L2 projection of p0 onto the fine pressure space.
Vector project_initial_pressure(const GridPair& grid, const OperatorSet& ops,
                                const ScalarFunction& p0);

/// Fine initial data: p = mass projection of p0, u solves a(u, v) = d(v, p).
SolutionState initial_state(const GridPair& grid, const OperatorSet& ops, const ScalarFunction& p0);

/// Multiscale initial data: p = b-projection of the fine p0 onto Q_ms, u
/// solves the elasticity equation in V_ms with that pressure.
SolutionState initial_state(const OperatorSet& ops, const MultiscaleSpace& space,
                            const SolutionState& fine0);

/// Backward Euler on the fine space. One sparse LU per tau.
class FineStepper {
public:
  FineStepper(const OperatorSet& ops, double tau);

  /// `load` is (f(t_n), N_k) on the interior pressure DOFs.
  SolutionState step(const SolutionState& prev, const Vector& load) const;

private:
  const OperatorSet* ops_;
  double tau_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

/// Backward Euler in a multiscale space. The previous state is always taken
/// in fine coordinates, so the space may change between steps.
///
/// Columns are not orthogonalized; the coarse system is solved in the
/// coordinates T_u = Q_u L_u^{-1/2} of the eigendecomposition of the coarse
/// A (resp. B), dropping numerically null directions.
class MultiscaleStepper {
public:
  MultiscaleStepper(const OperatorSet& ops, const MultiscaleSpace& space, double tau);

  SolutionState step(const Vector& u_prev, const Vector& p_prev, const Vector& load, int n) const;

  /// Coefficients -> fine interior vectors.
  Vector lift_u(const Vector& coeff) const;
  Vector lift_p(const Vector& coeff) const;
  const CoarseOperators& coarse() const { return coarse_; }
  int generation() const { return generation_; }
  /// Number of numerically independent directions kept (u, p).
  std::pair<int, int> rank() const { return {int(Tu_.cols()), int(Tp_.cols())}; }

private:
  const OperatorSet* ops_;
  const MultiscaleSpace* space_;
  double tau_;
  int generation_;
  CoarseOperators coarse_;
  Matrix Tu_, Tp_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Fine-coordinate trajectory.
struct Trajectory {
  std::vector<Vector> u;
  std::vector<Vector> p;
  std::vector<int> dof_u;
  std::vector<int> dof_p;
};

/// Data handed to an enrichment hook after step n has been solved.
struct StepContext {
  int n = 0;
  double t = 0.0;
  const Vector* load = nullptr;
  const Vector* u_prev = nullptr; ///< fine coordinates, step n-1
  const Vector* p_prev = nullptr;
  const Vector* u_ref = nullptr;  ///< fine reference at step n, if available
  const Vector* p_ref = nullptr;
  MultiscaleSpace* space = nullptr;
  SolutionState* state = nullptr; ///< multiscale state at step n (mutable)
};

using StepHook = std::function<void(StepContext&)>;

/// Load vector (f(t_n), N_k) on interior pressure DOFs.
using LoadFunction = std::function<Vector(int n)>;

Trajectory run_fine(const OperatorSet& ops, const TimeGrid& time, const LoadFunction& load,
                    const SolutionState& initial);

/// Multiscale trajectory; `hook` runs after every step and may enlarge the
/// space and replace the step's state. Reference states, when given, are
/// passed to the hook for error bookkeeping.
Trajectory run_multiscale(const OperatorSet& ops, MultiscaleSpace& space, const TimeGrid& time,
                          const LoadFunction& load, const SolutionState& fine_initial,
                          const StepHook& hook = {}, const Trajectory* reference = nullptr);

} // namespace cem
