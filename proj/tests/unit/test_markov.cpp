#include <doctest.h>

#include <random>

#include "../oracles/chains.hpp"
#include "exmile/errors.hpp"
#include "exmile/markov.hpp"

using namespace exm;

TEST_SUITE("markov") {

TEST_CASE("two-state chain") {
  Chain c;
  c.kernel.resize(2, 2);
  c.kernel << 0, 1, 1, 0;
  c.reactant = 0;
  c.product = 1;
  c.rho = Eigen::Vector2d(1, 0);
  c.jump_time_means = Eigen::Vector2d(1, 0);
  const auto mu = invariant_mu_visits(c);
  CHECK(mu(0) == doctest::Approx(0.5));
  CHECK(mu(1) == doctest::Approx(0.5));
  const auto m = mfpt_check(c);
  CHECK(m.direct == doctest::Approx(1.0));
  CHECK(m.milestoning == doctest::Approx(1.0));
}

TEST_CASE("three-state golden values") {
  const auto c = oracle::three_state_chain();
  const auto mu = invariant_mu_visits(c);
  CHECK(std::abs(mu(0) - 0.4) < 1e-12);
  CHECK(std::abs(mu(1) - 0.4) < 1e-12);
  CHECK(std::abs(mu(2) - 0.2) < 1e-12);
  const auto nu = expected_visits(c);
  CHECK(nu.sum() == doctest::Approx(5.0));

  const auto m = mfpt_check(c);
  CHECK(std::abs(m.direct - 4.0) < 1e-12);
  CHECK(std::abs(m.milestoning - 4.0) < 1e-12);
  CHECK(std::abs(m.mu_product - 0.2) < 1e-12);

  const auto n1 = neumann_partial(c, 1);
  CHECK(n1.partial(0) == doctest::Approx(0.2));
  CHECK(n1.partial(1) == 0.0);
  CHECK(n1.partial(2) == 0.0);
  for (int n = 1; n <= 50; ++n) {
    const auto r = neumann_partial(c, n);
    CHECK(r.tv_error <= r.bound + 1e-14);
  }

  CHECK(aperiodicity_gcd(c, 40) == 1);

  const auto occ = semi_markov_occupancy(c);
  CHECK(occ(0) == doctest::Approx(0.5));
  CHECK(occ(1) == doctest::Approx(0.5));
  CHECK(occ(2) == 0.0);
}

TEST_CASE("neumann error decreases on random chains") {
  std::mt19937_64 gen(3);
  for (int k = 0; k < 10; ++k) {
    const auto c = oracle::random_chain(gen, 3 + k % 6);
    double last = 2.0;
    for (int n = 1; n <= 50; ++n) {
      const auto r = neumann_partial(c, n);
      // The partial sum sits below mu entrywise, so the tail mass is the TV
      // error itself; only cancellation separates the two numbers.
      CHECK(r.tv_error <= r.bound + 1e-14);
      CHECK(std::abs(r.tv_error - r.bound) < 1e-14);
      CHECK(r.tv_error <= last + 1e-15);
      last = r.tv_error;
    }
  }
}

TEST_CASE("random chains: identity and invariance") {
  std::mt19937_64 gen(11);
  for (int k = 0; k < 20; ++k) {
    const auto c = oracle::random_chain(gen, 2 + k % 7);
    CHECK_NOTHROW(c.validate());
    const auto m = mfpt_check(c);
    CHECK(std::abs(m.direct - m.milestoning) <= 1e-10 * std::abs(m.direct));
    const Eigen::VectorXd mu = invariant_mu_visits(c);
    CHECK((c.kernel.transpose() * mu - mu).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("parity of nearest-neighbor chains") {
  for (int m = 3; m <= 9; ++m) {
    CAPTURE(m);
    CHECK(aperiodicity_gcd(nearest_neighbor_chain(m), 4 * m + 20) == (m % 2 == 1 ? 1 : 2));
  }
}

TEST_CASE("geometric certificate") {
  const auto c = oracle::three_state_chain();
  CHECK(certificate_horizon(c, 20) == 6);
  const auto cert = geometric_bound_certificate(c, 6, 60);
  REQUIRE(cert.hypothesis_satisfied);
  CHECK(cert.lambda > 0.0);
  for (int n = 0; n <= 60; ++n) CHECK(cert.empirical[n] <= cert.bound[n]);
  // N = 1 would need J_0 in P from every start.
  CHECK_FALSE(geometric_bound_certificate(c, 1, 10).hypothesis_satisfied);

  const auto periodic = nearest_neighbor_chain(4);
  for (int N = 1; N <= 20; ++N) {
    const auto g = geometric_bound_certificate(periodic, N, 5);
    CHECK_FALSE(g.hypothesis_satisfied);
    CHECK(g.lambda == 0.0);
  }
  CHECK_FALSE(certificate_horizon(periodic, 20).has_value());
}

TEST_CASE("cesaro averages") {
  const auto c = oracle::three_state_chain();
  RngStream rng(5, make_stream_id(StreamDomain::ChainPath, 0));
  const auto one = cesaro_average(c, Eigen::VectorXd::Ones(3), 1000, rng);
  CHECK(one.mean == 1.0);

  const auto ind = cesaro_average(c, Eigen::Vector3d(1, 0, 0), 1000000, rng);
  CHECK(std::abs(ind.mean - 0.4) <= 3 * ind.std_error);
  CHECK(ind.cycles > 100000);

  const auto periodic = nearest_neighbor_chain(4);
  const double mu_p = invariant_mu_visits(periodic)(3);
  const auto p = cesaro_average(periodic, Eigen::Vector4d(0, 0, 0, 1), 1000000, rng);
  CHECK(std::abs(p.mean - mu_p) <= 3 * p.std_error);
}

TEST_CASE("semi-markov occupancy") {
  auto c = oracle::three_state_chain();
  const auto base = semi_markov_occupancy(c);
  c.jump_time_means *= 7.5;
  CHECK((semi_markov_occupancy(c) - base).norm() < 1e-14);
  c.jump_time_means = Eigen::Vector3d(0, 2, 0);
  CHECK(semi_markov_occupancy(c)(1) == 1.0);
  c.jump_time_means.setZero();
  CHECK_THROWS_AS(semi_markov_occupancy(c), DegenerateTime);
}

TEST_CASE("validation") {
  auto c = oracle::three_state_chain();
  c.kernel(0, 1) = 0.9;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = oracle::three_state_chain();
  c.kernel.row(1) << 0.0, 1.0, 0.0;  // state 1 never leaves {0, 1}
  c.kernel.row(0) << 0.0, 1.0, 0.0;
  CHECK_THROWS_AS(c.validate(), UnreachableProduct);
  c = oracle::three_state_chain();
  c.jump_time_means(2) = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = oracle::three_state_chain();
  c.kernel.row(2) << 0.5, 0.5, 0.0;  // product row differs from rho
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("total variation") {
  CHECK(total_variation(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)) == 1.0);
  CHECK(total_variation(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.2));
  CHECK(total_variation(Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.0, 0.0)) == 0.5);
}

}
