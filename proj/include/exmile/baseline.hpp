#ifndef EXMILE_BASELINE_HPP
#define EXMILE_BASELINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "exmile/fragments.hpp"
#include "exmile/geometry.hpp"
#include "exmile/potentials.hpp"
#include "exmile/sde.hpp"

namespace exm {

struct PassageEvent {
  int replica = 0;
  std::int64_t event_index = 0;  // within the replica
  double passage_time = 0.0;     // steps * dt over the cycle
  std::int64_t crossings = 0;    // sigma_P
  std::int64_t force_evals = 0;
};

struct LongRunOptions {
  std::int64_t budget_force_evals = 0;
  int replicas = 1;
  int threads = 1;
  std::uint64_t seed = 0;
  std::size_t points_per_milestone = 10000;  // reservoir cap for the crossing points
};

struct LongRunResult {
  std::vector<PassageEvent> events;  // ordered by (replica, event_index)
  std::optional<double> mfpt;
  double mfpt_std_error = 0.0;
  std::vector<std::int64_t> visits;  // J_0..J_{sigma_P} of completed cycles
  Eigen::VectorXd weights;           // visits normalized (zero when no event completed)
  Eigen::VectorXd mean_local_fpt;    // mean time from a visit to the next crossing (0 on P)
  std::vector<Reservoir> reservoirs; // crossing points of completed cycles, equal weights
  std::int64_t force_evals = 0;      // every step taken, including the unfinished cycle
};

/// Long trajectories with restart at rho on reaching the product. The budget
/// is split evenly over the replicas; each replica stops when its share is
/// spent and drops its unfinished cycle.
LongRunResult run_long(const Partition& partition, const PotentialSpec& spec, const IntegratorConfig& cfg,
                       const LongRunOptions& options);

}  // namespace exm

#endif  // EXMILE_BASELINE_HPP
