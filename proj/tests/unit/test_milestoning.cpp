#include <doctest.h>

#include <cmath>

#include "exmile/errors.hpp"
#include "exmile/markov.hpp"
#include "exmile/milestoning.hpp"
#include "oracles/chains.hpp"
#include "oracles/kolmogorov.hpp"
#include "oracles/mimic.hpp"

using namespace exm;

namespace {

CoarseMatrix dense_to_coarse(const Eigen::MatrixXd& K, std::vector<bool> active = {}) {
  CoarseMatrix c;
  if (active.empty()) active.assign(static_cast<std::size_t>(K.rows()), true);
  c.active = active;
  Eigen::MatrixXd masked = K;
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    if (!active[static_cast<std::size_t>(i)]) masked.row(i).setZero();
  c.A = masked.sparseView();
  return c;
}

struct RowStats {
  double mean = 0.0;
  double se = 0.0;
};

RowStats fpt_stats(const RowSample& row) {
  RowStats s;
  const auto n = static_cast<double>(row.fragments.size());
  double sum = 0.0, sq = 0.0;
  for (const auto& f : row.fragments) {
    sum += f.fpt;
    sq += f.fpt * f.fpt;
  }
  s.mean = sum / n;
  s.se = std::sqrt(std::max(0.0, sq / n - s.mean * s.mean) / (n - 1.0));
  return s;
}

// Quadratic well of the mimic restricted to the x1 axis.
double mimic_u(double x) { return 0.5 * (x - 0.5) * (x - 0.5); }

}  // namespace

TEST_SUITE("milestoning") {

TEST_CASE("init guesses") {
  const auto levels = build_level_partition({0.0, 0.5, 1.0}, Box{-1, 2, -1, 1});
  const auto one = init_guess(levels, InitMode::OnePointPerMilestone);
  REQUIRE(one.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(one.reservoirs[static_cast<std::size_t>(i)].size() == 1);
    CHECK(one.coarse_weights(i) == doctest::Approx(1.0 / 3.0));
  }

  const auto grid = build_grid_partition(2, false);
  const auto uniform = init_guess(grid, InitMode::UniformOnMilestones, 4);
  REQUIRE(uniform.size() == grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const auto& r = uniform.reservoirs[static_cast<std::size_t>(i)];
    CHECK(r.size() == 4);
    CHECK(r.total_weight() == doctest::Approx(1.0));
    for (const auto& p : r.points()) CHECK(grid.distance_to(p.x, i) < 1e-12);
  }
  CHECK_THROWS_AS(init_guess(grid, InitMode::UniformOnMilestones, 0), InvalidArgument);
  CHECK_THROWS_AS(init_guess(grid, InitMode::LowestEnergy), InvalidArgument);

  // The minimum of the well along each vertical level sits at x2 = 0.3.
  const auto well = PotentialSpec::quadratic(Vec2(1.0, 1.0), Vec2(0.5, 0.3));
  const auto low = init_guess(levels, InitMode::LowestEnergy, 1, &well);
  for (int i = 0; i < 3; ++i) {
    const auto& pts = low.reservoirs[static_cast<std::size_t>(i)].points();
    REQUIRE(pts.size() == 1);
    CHECK(levels.distance_to(pts[0].x, i) < 1e-12);
    CHECK(std::abs(pts[0].x(1) - 0.3) < 2.0 / 2048);
  }

  for (auto mode : {InitMode::OnePointPerMilestone, InitMode::UniformOnMilestones, InitMode::LowestEnergy})
    CHECK(parse_init_mode(to_string(mode)) == mode);
  CHECK_THROWS_AS(parse_init_mode("random"), InvalidArgument);
}

TEST_CASE("stationary weights of known kernels") {
  Eigen::Matrix2d flip;
  flip << 0, 1, 1, 0;
  for (auto solver : {EigenSolver::Power, EigenSolver::Direct}) {
    StationaryOptions so;
    so.solver = solver;
    so.reactant = 0;
    so.product = 1;
    const auto two = solve_stationary_weights(dense_to_coarse(flip), so);
    CHECK(two.w(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two.w(1) == doctest::Approx(0.5).epsilon(1e-12));

    const auto chain = oracle::three_state_chain();
    so.product = 2;
    const auto three = solve_stationary_weights(dense_to_coarse(chain.kernel), so);
    CHECK((three.w - Eigen::Vector3d(0.4, 0.4, 0.2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(three.residual < 1e-12);
  }
}

TEST_CASE("power and direct solvers agree on random kernels") {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = oracle::random_chain(gen, 6 + trial);
    StationaryOptions so;
    so.reactant = static_cast<int>(c.reactant);
    so.product = static_cast<int>(c.product);
    const auto power = solve_stationary_weights(dense_to_coarse(c.kernel), so);
    so.solver = EigenSolver::Direct;
    const auto direct = solve_stationary_weights(dense_to_coarse(c.kernel), so);
    CHECK((power.w - direct.w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((direct.w - invariant_mu_visits(c)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("inactive rows get no weight") {
  // State 3 was never sampled; the mass sent to it stays out of the fixed vector.
  Eigen::Matrix4d K;
  K << 0.0, 0.8, 0.0, 0.2,
       0.5, 0.0, 0.5, 0.0,
       1.0, 0.0, 0.0, 0.0,
       0.0, 0.0, 0.0, 0.0;
  for (auto solver : {EigenSolver::Power, EigenSolver::Direct}) {
    StationaryOptions so;
    so.solver = solver;
    so.reactant = 0;
    so.product = 2;
    const auto sol = solve_stationary_weights(dense_to_coarse(K, {true, true, true, false}), so);
    CHECK(sol.w(3) == 0.0);
    CHECK_FALSE(sol.used[3]);
    CHECK(sol.w.sum() == doctest::Approx(1.0));
    // The active block renormalized over {0, 1, 2} is the three-state chain.
    CHECK(sol.w(0) == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(sol.w(2) == doctest::Approx(0.2).epsilon(1e-10));
  }
}

TEST_CASE("one iteration on the mimic geometry") {
  const oracle::Mimic mimic(1e-3);
  const auto options = mimic.options(10000, 5);
  const auto flux = init_guess(mimic.partition, InitMode::OnePointPerMilestone);
  const auto out = iterate(flux, 1, mimic.partition, mimic.potential, mimic.integrator, options);
  const Eigen::MatrixXd A(out.matrix.A);
  const auto K = oracle::three_state_chain().kernel;
  const double half_se = 3.0 * std::sqrt(0.25 / 10000);
  CHECK(A(0, 1) == 1.0);
  CHECK(std::abs(A(1, 0) - 0.5) < half_se);
  CHECK(A(1, 0) + A(1, 2) == doctest::Approx(1.0));
  CHECK(A(2, 0) == 1.0);
  CHECK(out.record.mean_fpt(2) == 0.0);
  CHECK((A - K).cwiseAbs().maxCoeff() < half_se);
  CHECK(out.record.flux_update_error < 1e-12);
  CHECK(out.flux.coarse_weights.sum() == doctest::Approx(1.0));
  CHECK(out.record.fragments == 30000);
  for (const auto& row : out.rows) {
    for (const auto& f : row.fragments) CHECK_MESSAGE(f.start_milestone != f.end_milestone, "self transition");
  }
}

TEST_CASE("mimic MFPT against the Kolmogorov oracle") {
  // Crossings on a dt grid are detected late; the classical correction moves
  // each absorbing wall outward by 0.5826 * sqrt(2 beta^-1 dt). The oracle
  // MFPT is T = (t0 + t1) / q with q = 1/2 by symmetry.
  const double dt = 1e-4;
  const oracle::Mimic mimic(dt);
  const int L = 4000;
  const auto flux = init_guess(mimic.partition, InitMode::OnePointPerMilestone);
  const auto out = iterate(flux, 1, mimic.partition, mimic.potential, mimic.integrator, mimic.options(L, 17));
  REQUIRE(out.record.T_w);

  const double shift = 0.5826 * std::sqrt(2.0 * dt);
  const double t0 = oracle::line_mfpt(mimic_u, 1.0, -5.0, 0.5 + shift, 20000, 0.0);
  const double t1 = oracle::line_mfpt(mimic_u, 1.0, 0.5, 1.0 + shift, 20000, 0.5);
  const double expected = 2.0 * (t0 + t1);

  const auto s0 = fpt_stats(out.rows[0]);
  const auto s1 = fpt_stats(out.rows[1]);
  const Eigen::MatrixXd A(out.matrix.A);
  const double q = A(1, 2);
  const double T = *out.record.T_w;
  CHECK(T == doctest::Approx((s0.mean + s1.mean) / q).epsilon(1e-10));
  const double rel_var = (s0.se * s0.se + s1.se * s1.se) / std::pow(s0.mean + s1.mean, 2) + q * (1 - q) / L / (q * q);
  const double se = T * std::sqrt(rel_var);
  INFO("T = ", T, " oracle = ", expected, " se = ", se);
  CHECK(std::abs(T - expected) < 3.0 * se);
}

TEST_CASE("stopping rule needs two small changes by default") {
  const oracle::Mimic mimic(1e-3);
  auto options = mimic.options(50, 3);
  options.epsilon = 1e300;
  options.max_iterations = 10;
  const auto consecutive = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  CHECK(consecutive.converged);
  CHECK(consecutive.iterations == 3);
  options.stopping = StoppingRule::Single;
  const auto single = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  CHECK(single.converged);
  CHECK(single.iterations == 2);

  options.epsilon = 1e-300;
  options.max_iterations = 4;
  const auto capped = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 4);
  CHECK(capped.history.size() == 4);
  CHECK_FALSE(capped.history[0].delta_T);
  CHECK(capped.history[1].delta_T);
}

TEST_CASE("same seed, same history") {
  const oracle::Mimic mimic(1e-3);
  auto options = mimic.options(200, 11);
  options.max_iterations = 3;
  options.epsilon = 1e-300;
  options.sampling.restart = RestartPoint::PostStep;
  const auto a = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  options.sampling.threads = 3;
  const auto b = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].T == b.history[k].T);
    CHECK(a.history[k].weights == b.history[k].weights);
    CHECK(a.history[k].force_evals == b.history[k].force_evals);
  }
  options.seed = 12;
  const auto c = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  CHECK(c.history.back().T != a.history.back().T);
}

TEST_CASE("simple-power weights and reservoir cap") {
  const oracle::Mimic mimic(1e-3);
  auto options = mimic.options(300, 2);
  options.weights = WeightsMode::SimplePower;
  options.max_iterations = 3;
  options.epsilon = 1e-300;
  options.reservoir_cap = 50;
  options.sampling.restart = RestartPoint::PostStep;
  const auto r = run_milestoning(mimic.partition, mimic.potential, mimic.integrator, options);
  for (const auto& res : r.flux.reservoirs) CHECK(res.size() <= 50);
  CHECK(r.flux.coarse_weights.sum() == doctest::Approx(1.0));
  // The first update pushes the uniform guess through A once.
  CHECK(r.history[0].w == Eigen::Vector3d::Constant(1.0 / 3.0));
  CHECK(r.history[0].weights(0) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("option validation") {
  MilestoningOptions o;
  CHECK_NOTHROW(o.validate());
  o.fragments_per_milestone = 0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = {};
  o.epsilon = 0.0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = {};
  o.reservoir_cap = 0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
}

TEST_CASE("error report of identical runs is zero") {
  RunDigest a;
  a.dt = 1e-3;
  a.comparison_key = "k";
  a.weights = Eigen::Vector3d(0.4, 0.4, 0.2);
  a.mean_fpt = Eigen::Vector3d(1.0, 1.0, 0.0);
  a.product = 2;
  a.T = 4.0;
  RunDigest b = a;
  b.dt = 5e-4;
  const auto rep = error_report(a, b);
  CHECK(rep.phi == 0.0);
  CHECK(rep.tv == 0.0);
  CHECK(rep.inverse_gap == 0.0);
  CHECK(rep.bound == 0.0);
  CHECK(rep.observed == 0.0);
  CHECK(rep.c1 == doctest::Approx(0.8));
  CHECK(rep.c2_proxy == 1.0);
  CHECK_FALSE(rep.tv_against_reference);

  const auto with_ref = error_report(a, b, Eigen::VectorXd(Eigen::Vector3d(0.5, 0.3, 0.2)));
  CHECK(with_ref.tv_against_reference);
  CHECK(with_ref.tv == doctest::Approx(0.1));

  b.comparison_key = "other";
  CHECK_THROWS_AS(error_report(a, b), InvalidArgument);
}

TEST_CASE("error report bound on a hand-made pair") {
  RunDigest a, b;
  a.dt = 2e-3;
  b.dt = 1e-3;
  a.comparison_key = b.comparison_key = "k";
  a.product = b.product = 2;
  a.weights = Eigen::Vector3d(0.38, 0.40, 0.22);
  b.weights = Eigen::Vector3d(0.40, 0.40, 0.20);
  a.mean_fpt = Eigen::Vector3d(0.9, 1.1, 0.0);
  b.mean_fpt = Eigen::Vector3d(1.0, 1.0, 0.0);
  const auto rep = error_report(a, b);
  const double ea = a.weights.dot(a.mean_fpt), eb = b.weights.dot(b.mean_fpt);
  CHECK(rep.observed == doctest::Approx(std::abs(ea / 0.22 - eb / 0.20)));
  CHECK(rep.phi == doctest::Approx(std::abs(a.weights.dot(b.mean_fpt - a.mean_fpt))));
  CHECK(rep.tv == doctest::Approx(0.02));
  CHECK(rep.bound == doctest::Approx(rep.c1 * rep.inverse_gap + (rep.c2_proxy * rep.tv + rep.phi) / 0.22));
  CHECK(rep.observed <= rep.bound * (1 + 1e-12));
}

}  // TEST_SUITE

namespace {

struct DriftLevels {
  Partition partition = build_level_partition({0.0, 0.5, 1.0}, Box{-5.0, 5.0, -1000.0, 1000.0});
  PotentialSpec potential = PotentialSpec::linear_drift(Vec2(-4.0, 0.0));

  RunDigest run(double dt, int L, std::uint64_t seed) const {
    IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.beta_inv = 1.0;
    MilestoningOptions o;
    o.fragments_per_milestone = L;
    o.max_iterations = 1;
    o.seed = seed;
    o.sampling.restart = RestartPoint::Crossing;
    const auto r = run_milestoning(partition, potential, cfg, o);
    RunDigest d;
    d.dt = dt;
    d.comparison_key = "drift-levels";
    d.T = r.T;
    d.weights = r.history.back().w;
    d.mean_fpt = r.mean_fpt;
    d.product = partition.product();
    return d;
  }
};

}  // namespace

TEST_SUITE("milestoning") {

TEST_CASE("phi shrinks like sqrt(dt)") {
  // Late crossing detection biases the local passage times by O(sqrt(dt)),
  // so successive phi values should shrink by about sqrt(2).
  const DriftLevels setup;
  const auto d1 = setup.run(2e-2, 20000, 1);
  const auto d2 = setup.run(1e-2, 20000, 2);
  const auto d3 = setup.run(5e-3, 20000, 3);
  const double ratio = error_report(d1, d2).phi / error_report(d2, d3).phi;
  INFO("phi ratio = ", ratio);
  CHECK(ratio >= 1.0);
  CHECK(ratio <= 2.1);
}

TEST_CASE("bound against the exact weights holds on most seeds") {
  // Exact kernel: R -> mid, mid -> P with q = 1 / (1 + e^{-2}), P -> R.
  const double q = 1.0 / (1.0 + std::exp(-2.0));
  const Eigen::VectorXd exact = Eigen::Vector3d(1.0, 1.0, q) / (2.0 + q);
  const DriftLevels setup;
  int held = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto rep = error_report(setup.run(2e-2, 2000, 100 + seed), setup.run(1e-2, 2000, 200 + seed), exact);
    held += rep.observed <= rep.bound;
  }
  CHECK(held >= 19);
}

}  // TEST_SUITE
