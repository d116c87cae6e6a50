// Continuous geometry whose milestone chain is exactly the three-state oracle
// chain: a quadratic well centred on the middle level x1 = 1/2 of the levels
// {0, 1/2, 1}. From x1 = 0 the only reachable milestone is the middle one, from
// the middle both sides are equally likely, and the product restarts at x1 = 0.
// Restarting on the crossing point keeps every row a single start state.
#ifndef EXMILE_TESTS_MIMIC_HPP
#define EXMILE_TESTS_MIMIC_HPP

#include "exmile/geometry.hpp"
#include "exmile/milestoning.hpp"
#include "exmile/potentials.hpp"

namespace exm::oracle {

struct Mimic {
  Partition partition = build_level_partition({0.0, 0.5, 1.0}, Box{-5.0, 5.0, -1000.0, 1000.0});
  PotentialSpec potential = PotentialSpec::quadratic(Vec2(1.0, 1.0), Vec2(0.5, 0.0));
  IntegratorConfig integrator{};

  explicit Mimic(double dt = 1e-4) {
    integrator.dt = dt;
    integrator.beta_inv = 1.0;
    integrator.max_steps_per_fragment = 100'000'000;
  }

  MilestoningOptions options(int L, std::uint64_t seed) const {
    MilestoningOptions o;
    o.fragments_per_milestone = L;
    o.seed = seed;
    o.sampling.restart = RestartPoint::Crossing;
    return o;
  }
};

}  // namespace exm::oracle

#endif  // EXMILE_TESTS_MIMIC_HPP
