#include "cemporo/online.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cemporo/parallel.hpp"

namespace cem {

std::string to_string(Strategy s) {
  return s == Strategy::neighborhood ? "neighborhood" : "element";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "neighborhood") return Strategy::neighborhood;
  if (s == "element") return Strategy::element;
  throw ConfigError("unknown online strategy '" + s + "' (expected neighborhood or element)");
}

ResidualSet compute_residuals(const OperatorSet& ops, const Vector& u, const Vector& p,
                              const Vector& u_prev, const Vector& p_prev, const Vector& load,
                              double tau, int n, int k) {
  if (u.size() != ops.n_u() || u_prev.size() != ops.n_u() || p.size() != ops.n_p() ||
      p_prev.size() != ops.n_p() || load.size() != ops.n_p())
    throw ConfigError("residual inputs must be fine-coordinate vectors");
  if (!(tau > 0.0)) throw ConfigError("time step must be positive");
  ResidualSet r;
  r.r1 = ops.D.transpose() * p - ops.A * u;
  r.r2 = load - ops.B * p - (ops.C * (p - p_prev)) / tau - (ops.D * (u - u_prev)) / tau;
  r.n = n;
  r.k = k;
  return r;
}

RegionSet::RegionSet(const GridPair& grid, const PartitionOfUnity& pou, Strategy strategy)
    : grid_(&grid), pou_(&pou), strategy_(strategy) {
  if (strategy == Strategy::neighborhood) {
    for (int i = 0; i < grid.num_coarse_nodes(); ++i)
      regions_.push_back(oversample_neighborhood(grid, i, 0));
  } else {
    for (int i = 0; i < grid.num_coarse_cells(); ++i)
      regions_.push_back(oversample_element(grid, i, 0));
  }
}

Patch RegionSet::online_patch(int i, int layers) const {
  return strategy_ == Strategy::neighborhood ? oversample_neighborhood(*grid_, i, layers)
                                             : oversample_element(*grid_, i, layers);
}

double RegionSet::weight(int i, int fine_node) const {
  if (strategy_ == Strategy::neighborhood) return pou_->at_node(i, fine_node);
  const auto [ix, iy] = grid_->fine_node_ij(fine_node);
  const auto [ci, cj] = grid_->coarse_cell_ij(i);
  const int r = grid_->refinement();
  const bool inside = ix > ci * r && ix < (ci + 1) * r && iy > cj * r && iy < (cj + 1) * r;
  return inside ? 1.0 : 0.0;
}

std::vector<int> descending_order(const std::vector<double>& values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  return order;
}

std::vector<int> select_regions(const std::vector<double>& eta, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("selection tolerance must lie in [0, 1)");
  const std::vector<int> order = descending_order(eta);
  const std::size_t n = order.size();
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t m = n; m-- > 0;) tail[m] = tail[m + 1] + eta[order[m]] * eta[order[m]];
  const double total = tail[0];
  std::vector<int> out;
  if (!(total > 0.0)) return out;
  if (theta == 0.0) {
    for (int i : order)
      if (eta[i] > 0.0) out.push_back(i);
    return out;
  }
  std::size_t m = 0;
  while (m < n && !(tail[m] < theta * total)) ++m;
  out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  return out;
}

struct IndicatorEngine::Local {
  std::vector<int> u, p;
  Eigen::SimplicialLDLT<SparseMatrix> A, B;
};

IndicatorEngine::IndicatorEngine(const GridPair& grid, const OperatorSet& ops,
                                 const RegionSet& regions)
    : ops_(&ops), regions_(&regions) {
  local_.resize(regions.size());
  parallel::parallel_for(local_.size(), [&](std::size_t i) {
    auto loc = std::make_unique<Local>();
    PatchDofs d = patch_dofs(grid, regions.region(static_cast<int>(i)));
    loc->u = std::move(d.u);
    loc->p = std::move(d.p);
    if (!loc->u.empty()) loc->A.compute(submatrix(ops.A, loc->u, loc->u));
    if (!loc->p.empty()) loc->B.compute(submatrix(ops.B, loc->p, loc->p));
    local_[i] = std::move(loc);
  });
  A_factor_.compute(ops.A);
  B_factor_.compute(ops.B);
  if (A_factor_.info() != Eigen::Success || B_factor_.info() != Eigen::Success)
    throw NumericalError("global stiffness factorization failed");
}

IndicatorEngine::~IndicatorEngine() = default;

const std::vector<int>& IndicatorEngine::region_dofs(Family f, int region) const {
  return f == Family::displacement ? local_[region]->u : local_[region]->p;
}

double IndicatorEngine::global_norm(Family f, const Vector& r) const {
  const Vector w = f == Family::displacement ? A_factor_.solve(r) : B_factor_.solve(r);
  return std::sqrt(std::max(0.0, r.dot(w)));
}

double IndicatorEngine::local_norm(Family f, int region, const Vector& r) const {
  const Local& loc = *local_[region];
  const auto& dofs = f == Family::displacement ? loc.u : loc.p;
  if (dofs.empty()) return 0.0;
  Vector rl(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t l = 0; l < dofs.size(); ++l) rl[static_cast<Eigen::Index>(l)] = r[dofs[l]];
  const Vector w = f == Family::displacement ? loc.A.solve(rl) : loc.B.solve(rl);
  return std::sqrt(std::max(0.0, rl.dot(w)));
}

IndicatorSet IndicatorEngine::compute(const ResidualSet& r) const {
  IndicatorSet s;
  s.strategy = regions_->strategy();
  const int n = regions_->size();
  s.eta_u.assign(n, 0.0);
  s.eta_p.assign(n, 0.0);
  parallel::parallel_for(n, [&](std::size_t i) {
    s.eta_u[i] = local_norm(Family::displacement, static_cast<int>(i), r.r1);
    s.eta_p[i] = local_norm(Family::pressure, static_cast<int>(i), r.r2);
  });
  s.order_u = descending_order(s.eta_u);
  s.order_p = descending_order(s.eta_p);
  s.global_u = global_norm(Family::displacement, r.r1);
  s.global_p = global_norm(Family::pressure, r.r2);
  return s;
}

void OnlineConfig::validate() const {
  if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("theta must lie in [0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (layers < 0) throw ConfigError("online oversampling layers must be >= 0");
  if (iterations < 0) throw ConfigError("online iterations must be >= 0");
  if (tol.has_value() != eps.has_value())
    throw ConfigError("tol and eps must be given together");
  if (tol && !(*tol > 0.0)) throw ConfigError("tol must be positive");
  if (eps && !(*eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(filter >= 0.0 && filter < 1.0)) throw ConfigError("filter threshold must lie in [0, 1)");
}

namespace {
int components(Family f) { return f == Family::displacement ? 2 : 1; }
} // namespace

Vector online_rhs(const OnlineContext& ctx, const ConstrainedPatchSolver& solver, int region,
                  Family f, const Vector& r) {
  const int ncomp = components(f);
  const auto& dofs = solver.dofs();
  Vector b(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t l = 0; l < dofs.size(); ++l) {
    const int node = ctx.grid->free_nodes()[dofs[l] / ncomp];
    b[static_cast<Eigen::Index>(l)] = ctx.regions->weight(region, node) * r[dofs[l]];
  }
  return b;
}

SparseMatrix build_online_column(const OnlineContext& ctx, int region, const Vector& r,
                                 int layers, Family f) {
  const Patch patch = ctx.regions->online_patch(region, layers);
  const ConstrainedPatchSolver solver(*ctx.grid, *ctx.ops, *ctx.aux, patch, f);
  const Vector x = solver.solve(online_rhs(ctx, solver, region, f, r));
  return solver.to_global(x, f == Family::displacement ? ctx.ops->n_u() : ctx.ops->n_p());
}

double online_residual(const OnlineContext& ctx, int region, const Vector& r, int layers,
                       Family f, const Vector& psi) {
  const int ncomp = components(f);
  const Patch patch = ctx.regions->online_patch(region, layers);
  const PatchDofs pd = patch_dofs(*ctx.grid, patch);
  const std::vector<int>& dofs = f == Family::displacement ? pd.u : pd.p;
  const SparseMatrix& K = f == Family::displacement ? ctx.ops->A : ctx.ops->B;
  const AuxBasis& aux = *ctx.aux;
  const Vector coeff = pi_coefficients(aux, f, to_broken(aux, *ctx.grid, f, psi));
  BrokenField weighted(aux.num_elements());
  const int J = aux.J(f);
  for (int e = 0; e < aux.num_elements(); ++e)
    weighted[e] = aux.element(e).svecs(f) * coeff.segment(e * J, J);
  const Vector lhs = K * psi + scatter_broken(aux, *ctx.grid, f, weighted);
  double rn = 0.0, bn = 0.0;
  for (int d : dofs) {
    const int node = ctx.grid->free_nodes()[d / ncomp];
    const double b = ctx.regions->weight(region, node) * r[d];
    rn += (lhs[d] - b) * (lhs[d] - b);
    bn += b * b;
  }
  return bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
}

std::vector<int> filter_columns(const SparseMatrix& K, const SparseMatrix& R,
                                const std::vector<SparseMatrix>& candidates, double threshold) {
  Matrix T;
  if (R.cols() > 0) T = energy_coordinates(Matrix(SparseMatrix(R.transpose()) * (K * R)));
  std::vector<Vector> kept_q;
  std::vector<int> kept;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    Vector x = Vector(candidates[c]);
    const double n0 = std::sqrt(std::max(0.0, x.dot(K * x)));
    if (!(n0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (T.cols() > 0) x -= R * (T * (T.transpose() * (R.transpose() * (K * x))));
      for (const Vector& q : kept_q) x -= q.dot(K * x) * q;
    }
    const double n1 = std::sqrt(std::max(0.0, x.dot(K * x)));
    if (n1 > threshold * n0) {
      kept.push_back(static_cast<int>(c));
      kept_q.push_back(x / n1);
    }
  }
  return kept;
}

EnrichmentStep enrich_once(const OnlineContext& ctx, MultiscaleSpace& space,
                           const SolutionState& state, const Vector& u_prev,
                           const Vector& p_prev, const Vector& load, int n, int k,
                           const OnlineConfig& config) {
  config.validate();
  if (state.tag.fine || state.tag.generation != space.generation)
    throw ConfigError("state does not belong to the current multiscale space");
  const Vector u = space.RV * state.u;
  const Vector p = space.RQ * state.p;
  const ResidualSet res = compute_residuals(*ctx.ops, u, p, u_prev, p_prev, load, ctx.tau, n, k);

  EnrichmentStep out;
  out.state = state;
  out.indicators = ctx.engine->compute(res);
  out.selected_u = select_regions(out.indicators.eta_u, config.theta);
  out.selected_p = select_regions(out.indicators.eta_p, config.gamma);

  auto build = [&](Family f, const std::vector<int>& selected) {
    std::vector<SparseMatrix> cols(selected.size());
    parallel::parallel_for(selected.size(), [&](std::size_t i) {
      cols[i] = build_online_column(ctx, selected[i], res.of(f), config.layers, f);
    });
    return cols;
  };
  const std::vector<SparseMatrix> cand_u = build(Family::displacement, out.selected_u);
  const std::vector<SparseMatrix> cand_p = build(Family::pressure, out.selected_p);

  auto append = [&](Family f, const std::vector<SparseMatrix>& cand,
                    const std::vector<int>& selected) {
    const SparseMatrix& K = f == Family::displacement ? ctx.ops->A : ctx.ops->B;
    const std::vector<int> keep = filter_columns(K, space.basis(f), cand, config.filter);
    std::vector<SparseMatrix> cols;
    std::vector<ColumnOrigin> origins;
    for (int c : keep) {
      cols.push_back(cand[c]);
      origins.push_back({ColumnOrigin::Kind::online, selected[c], 0, n, k});
    }
    append_columns(space, f, cols, origins);
    return static_cast<int>(cols.size());
  };
  out.added_u = append(Family::displacement, cand_u, out.selected_u);
  out.added_p = append(Family::pressure, cand_p, out.selected_p);

  if (out.added_u + out.added_p > 0) {
    const MultiscaleStepper stepper(*ctx.ops, space, ctx.tau);
    out.state = stepper.step(u_prev, p_prev, load, n);
  }
  return out;
}

namespace {

double global_eta(const OnlineContext& ctx, const MultiscaleSpace& space,
                  const SolutionState& s, const Vector& u_prev, const Vector& p_prev,
                  const Vector& load, int n, int k, Vector& u, Vector& p) {
  u = space.RV * s.u;
  p = space.RQ * s.p;
  const ResidualSet r = compute_residuals(*ctx.ops, u, p, u_prev, p_prev, load, ctx.tau, n, k);
  return ctx.engine->global_norm(Family::displacement, r.r1) +
         ctx.engine->global_norm(Family::pressure, r.r2);
}

} // namespace

AdaptiveResult adaptive_loop(const OnlineContext& ctx, MultiscaleSpace& space,
                             const SolutionState& state, const Vector& u_prev,
                             const Vector& p_prev, const Vector& load, int n,
                             const OnlineConfig& config) {
  config.validate();
  AdaptiveResult out;
  out.state = state;
  LevelRecord level;
  level.n = n;
  level.k = 0;
  level.dof_u = space.dof_u();
  level.dof_p = space.dof_p();
  level.eta = global_eta(ctx, space, state, u_prev, p_prev, load, n, 0, level.u, level.p);
  out.levels.push_back(level);

  double eta = level.eta;
  for (int k = 0; k < config.iterations; ++k) {
    if (config.tol && std::abs(eta - *config.tol) < *config.eps) break;
    EnrichmentStep step =
        enrich_once(ctx, space, out.state, u_prev, p_prev, load, n, k, config);
    out.state = std::move(step.state);
    LevelRecord next;
    next.n = n;
    next.k = k + 1;
    next.dof_u = space.dof_u();
    next.dof_p = space.dof_p();
    next.eta = global_eta(ctx, space, out.state, u_prev, p_prev, load, n, k + 1, next.u, next.p);
    out.levels.push_back(next);
    const double eta_new = next.eta;
    if (config.eps && std::abs(eta - eta_new) <= *config.eps) break;
    eta = eta_new;
  }
  return out;
}

} // namespace cem
