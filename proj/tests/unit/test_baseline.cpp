#include <doctest.h>

#include <cmath>

#include "exmile/baseline.hpp"
#include "exmile/errors.hpp"
#include "oracles/kolmogorov.hpp"
#include "oracles/mimic.hpp"

using namespace exm;

TEST_SUITE("baseline") {

TEST_CASE("zero budget gives no events") {
  const oracle::Mimic mimic(1e-3);
  const auto r = run_long(mimic.partition, mimic.potential, mimic.integrator, LongRunOptions{});
  CHECK(r.events.empty());
  CHECK_FALSE(r.mfpt);
  CHECK(r.force_evals == 0);
}

TEST_CASE("constant drift MFPT against the Kolmogorov oracle") {
  const double dt = 1e-4;
  const auto partition = build_level_partition({0.0, 0.5, 1.0}, Box{-5.0, 5.0, -1000.0, 1000.0});
  const auto drift = PotentialSpec::linear_drift(Vec2(-1.0, 0.0));
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.beta_inv = 1.0;
  LongRunOptions o;
  o.budget_force_evals = 8'000'000;
  o.replicas = 4;
  o.seed = 19;
  const auto r = run_long(partition, drift, cfg, o);
  REQUIRE(r.mfpt);
  CHECK(r.events.size() >= 300);
  CHECK(r.force_evals <= o.budget_force_evals);

  // The far wall stands in for the open half line; the drift makes it invisible.
  const double shift = 0.5826 * std::sqrt(2.0 * dt);
  const double oracle = oracle::line_mfpt([](double x) { return -x; }, 1.0, -20.0, 1.0 + shift, 40000, 0.0);
  CHECK(oracle == doctest::Approx(1.0 + shift).epsilon(1e-3));
  INFO("mfpt = ", *r.mfpt, " +- ", r.mfpt_std_error, " oracle = ", oracle);
  CHECK(std::abs(*r.mfpt - oracle) < 0.1 * oracle);
  CHECK(std::abs(*r.mfpt - oracle) < 3.0 * r.mfpt_std_error);
}

TEST_CASE("visit weights on the mimic geometry") {
  // Every reactant visit is followed by a middle visit and the middle is only
  // entered from the reactant, so the first two counts agree exactly.
  const oracle::Mimic mimic(1e-3);
  LongRunOptions o;
  o.budget_force_evals = 3'000'000;
  o.replicas = 2;
  o.threads = 2;
  o.seed = 4;
  const auto r = run_long(mimic.partition, mimic.potential, mimic.integrator, o);
  REQUIRE(r.events.size() >= 300);
  REQUIRE(r.visits.size() == 3);
  CHECK(r.visits[0] == r.visits[1]);
  CHECK(r.visits[2] == static_cast<std::int64_t>(r.events.size()));
  const double n = static_cast<double>(r.events.size());
  // Visits per cycle are 1 + 2G with G geometric of mean 2: relative sd sqrt(8) / 5.
  const double se = 0.2 * (std::sqrt(8.0) / 5.0) / std::sqrt(n);
  CHECK(std::abs(r.weights(2) - 0.2) < 3.0 * se);
  CHECK(r.mean_local_fpt(2) == 0.0);

  std::int64_t crossings = 0;
  for (const auto& e : r.events) crossings += e.crossings;
  CHECK(crossings == r.visits[0] + r.visits[1] + r.visits[2] - static_cast<std::int64_t>(r.events.size()));
}

TEST_CASE("long run is deterministic across thread counts") {
  const oracle::Mimic mimic(1e-3);
  LongRunOptions o;
  o.budget_force_evals = 400'000;
  o.replicas = 3;
  o.seed = 8;
  const auto a = run_long(mimic.partition, mimic.potential, mimic.integrator, o);
  o.threads = 3;
  const auto b = run_long(mimic.partition, mimic.potential, mimic.integrator, o);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    CHECK(a.events[k].passage_time == b.events[k].passage_time);
    CHECK(a.events[k].replica == b.events[k].replica);
  }
  CHECK(a.force_evals == b.force_evals);
}

}  // TEST_SUITE
