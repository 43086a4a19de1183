#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "cemporo/assembly.hpp"
#include "cemporo/auxspace.hpp"
#include "cemporo/cembasis.hpp"
#include "cemporo/grid.hpp"
#include "cemporo/poro_solver.hpp"
#include "cemporo/types.hpp"

namespace cem {

enum class Strategy { neighborhood, element };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

/// Residual co-vectors on fine interior DOFs.
///   r1 = D^T p - A u
///   r2 = f - B p - C (p - p_prev) / tau - D (u - u_prev) / tau
struct ResidualSet {
  Vector r1;
  Vector r2;
  int n = 0;
  int k = 0;

  const Vector& of(Family f) const { return f == Family::displacement ? r1 : r2; }
};

ResidualSet compute_residuals(const OperatorSet& ops, const Vector& u, const Vector& p,
                              const Vector& u_prev, const Vector& p_prev, const Vector& load,
                              double tau, int n = 0, int k = 0);

/// Local regions (coarse neighborhoods or coarse elements) with their
/// residual weights and online patches.
class RegionSet {
public:
  RegionSet(const GridPair& grid, const PartitionOfUnity& pou, Strategy strategy);

  Strategy strategy() const { return strategy_; }
  int size() const { return static_cast<int>(regions_.size()); }
  /// Zero-trace region omega_i (resp. K_i).
  const Patch& region(int i) const { return regions_[i]; }
  /// Oversampled online patch omega_i^+ (resp. K_i^+).
  Patch online_patch(int i, int layers) const;
  /// Nodal weight of region i at a fine node: chi_i for neighborhoods, the
  /// indicator of the open element for elements.
  double weight(int i, int fine_node) const;

private:
  const GridPair* grid_;
  const PartitionOfUnity* pou_;
  Strategy strategy_;
  std::vector<Patch> regions_;
};

struct IndicatorSet {
  Strategy strategy = Strategy::neighborhood;
  std::vector<double> eta_u;  ///< ||z^1_i||_{a'} per region
  std::vector<double> eta_p;  ///< ||z^2_i||_{b'} per region
  std::vector<int> order_u;   ///< descending, ties by ascending index
  std::vector<int> order_p;
  double global_u = 0.0;      ///< ||r1||_{a'}
  double global_p = 0.0;      ///< ||r2||_{b'}

  double eta() const { return global_u + global_p; }
};

/// Stable descending permutation (ties by ascending index).
std::vector<int> descending_order(const std::vector<double>& values);

/// Smallest leading set with sum_{i>m} eta_i^2 < theta * sum_i eta_i^2.
/// theta = 0 selects every strictly positive entry; all-zero input selects
/// nothing.
std::vector<int> select_regions(const std::vector<double>& eta, double theta);

/// Dual norms of residuals via Riesz solves. Factorizations of the local
/// (zero-trace) and global stiffness matrices are computed once and reused.
class IndicatorEngine {
public:
  IndicatorEngine(const GridPair& grid, const OperatorSet& ops, const RegionSet& regions);
  ~IndicatorEngine();

  IndicatorSet compute(const ResidualSet& r) const;
  /// sqrt(r^T K^{-1} r) over the whole interior space (K = A or B).
  double global_norm(Family f, const Vector& r) const;
  /// Same on the zero-trace space of region i, r given globally.
  double local_norm(Family f, int region, const Vector& r) const;
  const std::vector<int>& region_dofs(Family f, int region) const;

private:
  struct Local;
  const OperatorSet* ops_;
  const RegionSet* regions_;
  std::vector<std::unique_ptr<Local>> local_;
  Eigen::SimplicialLDLT<SparseMatrix> A_factor_, B_factor_;
};

struct OnlineConfig {
  double theta = 0.3;
  double gamma = 0.3;
  int layers = 2;
  Strategy strategy = Strategy::neighborhood;
  int iterations = 1;
  std::optional<double> tol;
  std::optional<double> eps;
  /// Relative energy-norm threshold of the near-dependence filter.
  double filter = 1e-8;

  void validate() const;
};

/// Everything enrichment needs that does not change between iterations.
struct OnlineContext {
  const GridPair* grid = nullptr;
  const OperatorSet* ops = nullptr;
  const AuxBasis* aux = nullptr;
  const RegionSet* regions = nullptr;
  const IndicatorEngine* engine = nullptr;
  double tau = 0.0;
};

/// Right-hand side chi_i . r on the online patch (patch DOF order).
Vector online_rhs(const OnlineContext& ctx, const ConstrainedPatchSolver& solver, int region,
                  Family f, const Vector& r);

/// Online basis function of one region (global sparse column).
SparseMatrix build_online_column(const OnlineContext& ctx, int region, const Vector& r,
                                 int layers, Family f);

/// Relative residual of a(psi, v) + s(pi psi, pi v) = r(chi_i v) on the
/// online patch, assembled independently of the patch solver.
double online_residual(const OnlineContext& ctx, int region, const Vector& r, int layers,
                       Family f, const Vector& psi);

/// Keeps candidates whose energy norm after projection against the current
/// space and the previously kept candidates stays above `threshold` times
/// the original. Returns kept indices.
std::vector<int> filter_columns(const SparseMatrix& K, const SparseMatrix& R,
                                const std::vector<SparseMatrix>& candidates, double threshold);

struct EnrichmentStep {
  SolutionState state;       ///< re-solved state at level k+1 (unchanged if nothing added)
  IndicatorSet indicators;   ///< level-k indicators
  std::vector<int> selected_u;
  std::vector<int> selected_p;
  int added_u = 0;
  int added_p = 0;
};

/// One pass of the adaptive algorithm at time level n.
EnrichmentStep enrich_once(const OnlineContext& ctx, MultiscaleSpace& space,
                           const SolutionState& state, const Vector& u_prev,
                           const Vector& p_prev, const Vector& load, int n, int k,
                           const OnlineConfig& config);

struct LevelRecord {
  int n = 0;
  int k = 0;
  int dof_u = 0;
  int dof_p = 0;
  double eta = 0.0;
  Vector u;  ///< fine coordinates
  Vector p;
};

struct AdaptiveResult {
  SolutionState state;
  std::vector<LevelRecord> levels; ///< k = 0 .. number of performed iterations
};

/// Fixed number of iterations by default; with tol and eps set, runs
/// while |eta - tol| >= eps, breaking on stagnation |eta - eta'| <= eps,
/// and never more than `iterations` passes.
AdaptiveResult adaptive_loop(const OnlineContext& ctx, MultiscaleSpace& space,
                             const SolutionState& state, const Vector& u_prev,
                             const Vector& p_prev, const Vector& load, int n,
                             const OnlineConfig& config);

} // namespace cem
