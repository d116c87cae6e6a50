#include "exmile/milestoning.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/SparseLU>

#include "exmile/errors.hpp"
#include "exmile/markov.hpp"

namespace exm {

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::OnePointPerMilestone: return "one-point";
    case InitMode::UniformOnMilestones: return "uniform";
    case InitMode::LowestEnergy: return "lowest-energy";
  }
  return "?";
}
std::string_view to_string(WeightsMode mode) { return mode == WeightsMode::Stationary ? "stationary" : "simple-power"; }
std::string_view to_string(StoppingRule rule) { return rule == StoppingRule::Consecutive ? "consecutive" : "single"; }
std::string_view to_string(EigenSolver solver) { return solver == EigenSolver::Power ? "power" : "direct"; }

InitMode parse_init_mode(std::string_view name) {
  if (name == "one-point") return InitMode::OnePointPerMilestone;
  if (name == "uniform") return InitMode::UniformOnMilestones;
  if (name == "lowest-energy") return InitMode::LowestEnergy;
  throw InvalidArgument("unknown init mode '" + std::string(name) + "' (one-point|uniform|lowest-energy)");
}
WeightsMode parse_weights_mode(std::string_view name) {
  if (name == "stationary" || name == "coarse") return WeightsMode::Stationary;
  if (name == "simple-power") return WeightsMode::SimplePower;
  throw InvalidArgument("unknown weights mode '" + std::string(name) + "' (stationary|simple-power)");
}
StoppingRule parse_stopping_rule(std::string_view name) {
  if (name == "consecutive") return StoppingRule::Consecutive;
  if (name == "single") return StoppingRule::Single;
  throw InvalidArgument("unknown stopping rule '" + std::string(name) + "' (consecutive|single)");
}
EigenSolver parse_eigen_solver(std::string_view name) {
  if (name == "power") return EigenSolver::Power;
  if (name == "direct") return EigenSolver::Direct;
  throw InvalidArgument("unknown eigen solver '" + std::string(name) + "' (power|direct)");
}

void refresh_coarse_weights(FluxEstimate& flux) {
  flux.coarse_weights = Eigen::VectorXd::Zero(flux.size());
  for (int i = 0; i < flux.size(); ++i) flux.coarse_weights(i) = flux.reservoirs[static_cast<std::size_t>(i)].total_weight();
  const double total = flux.coarse_weights.sum();
  if (total > 0.0) flux.coarse_weights /= total;
}

namespace {

// Point at arc-length fraction s of a milestone's segment chain.
Vec2 point_along(const Milestone& milestone, double s) {
  double total = 0.0;
  for (const auto& seg : milestone.segments) total += seg.length();
  double target = s * total;
  for (const auto& seg : milestone.segments) {
    const double len = seg.length();
    if (target <= len) return seg.at(len > 0.0 ? target / len : 0.0);
    target -= len;
  }
  return milestone.segments.back().b;
}

}  // namespace

FluxEstimate init_guess(const Partition& partition, InitMode mode, int points_per_milestone,
                        const PotentialSpec* spec) {
  if (mode == InitMode::UniformOnMilestones && points_per_milestone < 1) {
    throw InvalidArgument("init_guess: points_per_milestone must be >= 1");
  }
  if (mode == InitMode::LowestEnergy && spec == nullptr) {
    throw InvalidArgument("init_guess: lowest-energy needs a potential");
  }
  FluxEstimate flux;
  flux.reservoirs.reserve(static_cast<std::size_t>(partition.size()));
  for (int i = 0; i < partition.size(); ++i) {
    Reservoir r(i);
    if (mode == InitMode::OnePointPerMilestone) {
      r.add(partition.representative_point(i), 1.0);
    } else if (mode == InitMode::LowestEnergy) {
      // Grid scan; good enough to land in the channel the dynamics uses.
      constexpr int kScan = 2048;
      Vec2 best = point_along(partition.milestone(i), 0.5);
      double best_u = eval_potential(*spec, best);
      for (int k = 0; k < kScan; ++k) {
        const Vec2 x = point_along(partition.milestone(i), (k + 0.5) / kScan);
        const double u = eval_potential(*spec, x);
        if (u < best_u) {
          best_u = u;
          best = x;
        }
      }
      r.add(best, 1.0);
    } else {
      const double w = 1.0 / points_per_milestone;
      for (int k = 0; k < points_per_milestone; ++k) {
        r.add(point_along(partition.milestone(i), (k + 0.5) / points_per_milestone), w);
      }
    }
    flux.reservoirs.push_back(std::move(r));
  }
  refresh_coarse_weights(flux);
  return flux;
}

CoarseMatrix build_coarse_matrix(const std::vector<RowSample>& rows) {
  const auto m = static_cast<int>(rows.size());
  CoarseMatrix out;
  out.active.assign(rows.size(), false);
  std::vector<Eigen::Triplet<double>> entries;
  for (int i = 0; i < m; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.active || row.fragments.empty()) continue;
    out.active[static_cast<std::size_t>(i)] = true;
    const auto n = static_cast<double>(row.fragments.size());
    for (int j = 0; j < m; ++j) {
      const auto c = row.row_counts[static_cast<std::size_t>(j)];
      if (c > 0) entries.emplace_back(i, j, static_cast<double>(c) / n);
    }
  }
  out.A.resize(m, m);
  out.A.setFromTriplets(entries.begin(), entries.end());
  out.A.makeCompressed();
  return out;
}

StationaryWeights solve_stationary_weights(const CoarseMatrix& A, const StationaryOptions& options,
                                           const Eigen::VectorXd* warm_start) {
  const int m = A.size();
  if (A.A.rows() != m || A.A.cols() != m) throw InvalidArgument("coarse matrix shape does not match its row mask");
  for (int i = 0; i < m; ++i) {
    double sum = 0.0;
    for (SparseRowMatrix::InnerIterator it(A.A, i); it; ++it) {
      if (!(it.value() >= 0.0)) throw InvalidArgument("coarse matrix has a negative entry");
      sum += it.value();
    }
    const bool active = A.active[static_cast<std::size_t>(i)];
    if ((active && std::abs(sum - 1.0) > 1e-12) || (!active && sum != 0.0)) {
      throw InvalidArgument("coarse matrix row " + std::to_string(i) + " is not stochastic");
    }
  }

  // Drop rows whose mass leaves the active set entirely, until stable.
  std::vector<bool> used = A.active;
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < m; ++i) {
      if (!used[static_cast<std::size_t>(i)]) continue;
      double inside = 0.0;
      for (SparseRowMatrix::InnerIterator it(A.A, i); it; ++it) {
        if (used[static_cast<std::size_t>(it.col())]) inside += it.value();
      }
      if (!(inside > 0.0)) {
        used[static_cast<std::size_t>(i)] = false;
        changed = true;
      }
    }
  }
  std::vector<int> slot(static_cast<std::size_t>(m), -1), states;
  for (int i = 0; i < m; ++i) {
    if (used[static_cast<std::size_t>(i)]) {
      slot[static_cast<std::size_t>(i)] = static_cast<int>(states.size());
      states.push_back(i);
    }
  }
  const auto k = static_cast<int>(states.size());
  if (k == 0) throw InvalidArgument("coarse matrix has no usable rows");

  std::vector<Eigen::Triplet<double>> entries;
  for (int a = 0; a < k; ++a) {
    double inside = 0.0;
    for (SparseRowMatrix::InnerIterator it(A.A, states[static_cast<std::size_t>(a)]); it; ++it) {
      if (slot[static_cast<std::size_t>(it.col())] >= 0) inside += it.value();
    }
    for (SparseRowMatrix::InnerIterator it(A.A, states[static_cast<std::size_t>(a)]); it; ++it) {
      const int b = slot[static_cast<std::size_t>(it.col())];
      if (b >= 0) entries.emplace_back(a, b, it.value() / inside);
    }
  }
  SparseRowMatrix B(k, k);
  B.setFromTriplets(entries.begin(), entries.end());
  const SparseRowMatrix Bt = B.transpose();

  auto residual_of = [&](const Eigen::VectorXd& v) { return (Bt * v - v).lpNorm<1>(); };

  StationaryWeights out;
  out.used = used;
  Eigen::VectorXd v(k);

  const int r = options.reactant >= 0 && options.reactant < m ? slot[static_cast<std::size_t>(options.reactant)] : -1;
  const int p = options.product >= 0 && options.product < m ? slot[static_cast<std::size_t>(options.product)] : -1;
  // Without a usable reactant and product the visit formula does not apply;
  // the power iteration still finds a fixed vector (with w_P = 0).
  if (options.solver == EigenSolver::Direct && r >= 0 && p >= 0) {
    std::vector<Eigen::Triplet<double>> sys;
    sys.reserve(entries.size() + static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a) sys.emplace_back(a, a, 1.0);
    for (const auto& e : entries) {
      if (e.row() != p) sys.emplace_back(e.col(), e.row(), -e.value());  // (I - Bbar)^T
    }
    Eigen::SparseMatrix<double> system(k, k);
    system.setFromTriplets(sys.begin(), sys.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success) throw UnreachableProduct("direct stationary solve: I - Abar is singular");
    // Source: the restart law, i.e. the product row.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (SparseRowMatrix::InnerIterator it(B, p); it; ++it) rhs(it.col()) = it.value();
    v = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !v.allFinite()) throw UnreachableProduct("direct stationary solve failed");
    v = v.cwiseMax(0.0);
    v /= v.sum();
    out.residual = residual_of(v);
    out.iterations = 1;
  } else {
    v = Eigen::VectorXd::Constant(k, 1.0 / k);
    if (warm_start && warm_start->size() == m) {
      Eigen::VectorXd seed(k);
      for (int a = 0; a < k; ++a) seed(a) = std::max((*warm_start)(states[static_cast<std::size_t>(a)]), 0.0);
      if (seed.sum() > 0.0) v = seed / seed.sum();
    }
    int it = 0;
    double res = residual_of(v);
    while (res > options.tolerance) {
      if (it >= options.max_iterations) {
        throw NoConvergence("stationary weights: power iteration hit " + std::to_string(options.max_iterations) +
                                " iterations",
                            res);
      }
      v = 0.5 * (v + Bt * v);
      v /= v.sum();
      res = residual_of(v);
      ++it;
    }
    out.residual = res;
    out.iterations = it;
  }

  out.w = Eigen::VectorXd::Zero(m);
  for (int a = 0; a < k; ++a) out.w(states[static_cast<std::size_t>(a)]) = v(a);
  return out;
}

void MilestoningOptions::validate() const {
  if (fragments_per_milestone < 1) throw InvalidArgument("fragments_per_milestone must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (init == InitMode::UniformOnMilestones && init_points < 1) throw InvalidArgument("init_points must be >= 1");
  if (sampling.threads < 1) throw InvalidArgument("threads must be >= 1");
  if (reservoir_cap && *reservoir_cap < 1) throw InvalidArgument("reservoir_cap must be >= 1");
}

IterationOutput iterate(const FluxEstimate& flux, int n, const Partition& partition, const PotentialSpec& spec,
                        const IntegratorConfig& cfg, const MilestoningOptions& options,
                        std::optional<double> previous_T, std::int64_t force_evals_before) {
  const int m = partition.size();
  if (flux.size() != m) throw InvalidArgument("flux estimate does not match the partition");
  if (n < 1) throw InvalidArgument("iteration numbers start at 1");
  if (!flux.reservoirs[static_cast<std::size_t>(partition.reactant())].active()) {
    throw InvalidArgument("iterate: the reactant reservoir is empty");
  }
  const int L = options.fragments_per_milestone;

  // All rows go into one task list so the whole iteration shares the pool.
  std::vector<FragmentTask> tasks;
  std::vector<std::size_t> begin(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 0; i < m; ++i) {
    begin[static_cast<std::size_t>(i)] = tasks.size();
    const auto& reservoir = flux.reservoirs[static_cast<std::size_t>(i)];
    if (!reservoir.active()) continue;
    const std::uint64_t base = (static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(i)) *
                               static_cast<std::uint64_t>(L);
    auto row = plan_row(i, reservoir, L, options.seed, base);
    tasks.insert(tasks.end(), row.begin(), row.end());
  }
  begin[static_cast<std::size_t>(m)] = tasks.size();
  auto results = run_tasks(tasks, partition, spec, cfg, options.seed, options.sampling);

  IterationOutput out;
  out.rows.reserve(static_cast<std::size_t>(m));
  std::int64_t force_evals = 0;
  for (int i = 0; i < m; ++i) {
    const std::size_t lo = begin[static_cast<std::size_t>(i)], hi = begin[static_cast<std::size_t>(i) + 1];
    std::vector<Fragment> done;
    std::int64_t dropped = 0, wasted = 0;
    for (std::size_t t = lo; t < hi; ++t) {
      if (results.fragments[t]) {
        done.push_back(std::move(*results.fragments[t]));
      } else {
        ++dropped;
        wasted += cfg.max_steps_per_fragment;
      }
    }
    RowSample row = summarize_row(i, m, std::move(done), wasted, dropped);
    row.active = !row.fragments.empty();
    force_evals += row.force_evals;
    out.rows.push_back(std::move(row));
  }
  out.matrix = build_coarse_matrix(out.rows);

  IterationRecord& rec = out.record;
  rec.n = n;
  rec.mean_fpt = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const auto& row = out.rows[static_cast<std::size_t>(i)];
    rec.mean_fpt(i) = row.mean_fpt;
    rec.fragments += static_cast<std::int64_t>(row.fragments.size());
    rec.dropped += row.dropped;
    if (row.active) ++rec.active_rows;
  }
  rec.force_evals = force_evals;
  rec.force_evals_cumulative = force_evals_before + force_evals;

  Eigen::VectorXd w;
  if (options.weights == WeightsMode::Stationary) {
    StationaryOptions so;
    so.solver = options.solver;
    so.reactant = partition.reactant();
    so.product = partition.product();
    const auto sol = solve_stationary_weights(out.matrix, so, &flux.coarse_weights);
    w = sol.w;
    rec.eigen_residual = sol.residual;
    rec.eigen_iterations = sol.iterations;
  } else {
    w = flux.coarse_weights;
    for (int i = 0; i < m; ++i) {
      if (!out.matrix.active[static_cast<std::size_t>(i)]) w(i) = 0.0;
    }
    if (!(w.sum() > 0.0)) throw InvalidArgument("simple-power update: no weight on sampled rows");
    w /= w.sum();
  }
  rec.w = w;

  // New reservoir j: every fragment ending on j, carrying w_i / (row size).
  FluxEstimate next;
  next.iteration = n;
  next.reservoirs.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) next.reservoirs.emplace_back(j);
  for (int i = 0; i < m; ++i) {
    const auto& row = out.rows[static_cast<std::size_t>(i)];
    if (!row.active || !(w(i) > 0.0)) continue;
    const double share = w(i) / static_cast<double>(row.fragments.size());
    for (const auto& f : row.fragments) {
      next.reservoirs[static_cast<std::size_t>(f.end_milestone)].add(f.resume_point, share);
    }
  }
  Eigen::VectorXd totals(m);
  for (int j = 0; j < m; ++j) totals(j) = next.reservoirs[static_cast<std::size_t>(j)].total_weight();
  const Eigen::VectorXd expected = (w.transpose() * out.matrix.A).transpose();
  rec.flux_update_error = (totals - expected).cwiseAbs().maxCoeff();
  const double mass = totals.sum();
  if (!(mass > 0.0)) throw InvalidArgument("flux update produced no weight");
  for (auto& r : next.reservoirs) r.scale(1.0 / mass);
  if (options.reservoir_cap) {
    for (int j = 0; j < m; ++j) {
      RngStream rng(options.seed, make_stream_id(StreamDomain::Misc, static_cast<std::uint64_t>(n) * m + j));
      next.reservoirs[static_cast<std::size_t>(j)].cap(*options.reservoir_cap, rng);
    }
  }
  refresh_coarse_weights(next);
  rec.weights = next.coarse_weights;
  rec.weight_tv = total_variation(next.coarse_weights, flux.coarse_weights);

  const int p = partition.product();
  const double e_prev = flux.coarse_weights.dot(rec.mean_fpt);
  const double e_w = w.dot(rec.mean_fpt);
  if (w(p) > 0.0) {
    rec.T = e_prev / w(p);
    rec.T_w = e_w / w(p);
  }
  if (flux.coarse_weights(p) > 0.0) rec.T_prev = e_prev / flux.coarse_weights(p);
  if (rec.T && previous_T) rec.delta_T = std::abs(*rec.T - *previous_T);

  out.flux = std::move(next);
  return out;
}

MilestoningResult run_milestoning(const Partition& partition, const PotentialSpec& spec, const IntegratorConfig& cfg,
                                  const MilestoningOptions& options, const IterationObserver& observer) {
  options.validate();
  cfg.validate();
  MilestoningResult result;
  FluxEstimate flux = init_guess(partition, options.init, options.init_points, &spec);
  std::optional<double> previous_T;
  const int needed = options.stopping == StoppingRule::Consecutive ? 2 : 1;
  int small = 0;
  std::int64_t evals = 0;
  for (int n = 1; n <= options.max_iterations; ++n) {
    IterationOutput out = iterate(flux, n, partition, spec, cfg, options, previous_T, evals);
    if (observer) observer(out);
    evals = out.record.force_evals_cumulative;
    previous_T = out.record.T;
    small = out.record.delta_T && *out.record.delta_T < options.epsilon ? small + 1 : 0;
    result.mean_fpt = out.record.mean_fpt;
    result.T = out.record.T;
    result.iterations = n;
    result.history.push_back(std::move(out.record));
    flux = std::move(out.flux);
    if (small >= needed) {
      result.converged = true;
      break;
    }
  }
  result.flux = std::move(flux);
  result.force_evals = evals;
  return result;
}

ErrorReport error_report(const RunDigest& run_a, const RunDigest& run_b, const std::optional<Eigen::VectorXd>& reference) {
  if (run_a.comparison_key != run_b.comparison_key) {
    throw InvalidArgument("error report: runs differ in more than dt");
  }
  const auto m = run_a.weights.size();
  if (run_b.weights.size() != m || run_a.mean_fpt.size() != m || run_b.mean_fpt.size() != m ||
      (reference && reference->size() != m)) {
    throw InvalidArgument("error report: runs have different milestone counts");
  }
  if (run_a.product != run_b.product || run_a.product < 0 || run_a.product >= m) {
    throw InvalidArgument("error report: product index mismatch");
  }
  const int p = run_a.product;
  const double mu_p = run_b.weights(p);
  const double mu_tilde_p = run_a.weights(p);
  if (!(mu_p > 0.0) || !(mu_tilde_p > 0.0)) throw InvalidArgument("error report: zero product weight");

  ErrorReport rep;
  rep.c1 = run_b.weights.dot(run_b.mean_fpt);
  rep.c2_proxy = std::max(run_a.mean_fpt.maxCoeff(), run_b.mean_fpt.maxCoeff());
  rep.tv_against_reference = reference.has_value();
  rep.tv = total_variation(run_a.weights, reference ? *reference : run_b.weights);
  rep.phi = std::abs(run_a.weights.dot(run_b.mean_fpt - run_a.mean_fpt));
  rep.inverse_gap = std::abs(1.0 / mu_p - 1.0 / mu_tilde_p);
  rep.bound = rep.c1 * rep.inverse_gap + (rep.c2_proxy * rep.tv + rep.phi) / mu_tilde_p;
  rep.observed = std::abs(run_a.weights.dot(run_a.mean_fpt) / mu_tilde_p - rep.c1 / mu_p);
  if (run_a.T && run_b.T) rep.observed_T = std::abs(*run_a.T - *run_b.T);
  return rep;
}

}  // namespace exm
