#ifndef EXMILE_FRAGMENTS_HPP
#define EXMILE_FRAGMENTS_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "exmile/geometry.hpp"
#include "exmile/potentials.hpp"
#include "exmile/rng.hpp"
#include "exmile/sde.hpp"

namespace exm {

/// Where the next fragment starts after a crossing. PostStep keeps the
/// discrete state after the crossing step, so chained fragments reproduce the
/// long discretized trajectory exactly; Crossing restarts on the milestone.
enum class RestartPoint { PostStep, Crossing };

enum class CensorPolicy { Abort, Drop };

std::string_view to_string(RestartPoint mode);
RestartPoint parse_restart_point(std::string_view name);
std::string_view to_string(CensorPolicy policy);
CensorPolicy parse_censor_policy(std::string_view name);

struct Fragment {
  int start_milestone = -1;
  Vec2 start_point = Vec2::Zero();
  int end_milestone = -1;
  Vec2 end_point = Vec2::Zero();     // crossing point, on end_milestone
  Vec2 resume_point = Vec2::Zero();  // state the dynamics continue from
  double fpt = 0.0;                  // steps * dt
  std::int64_t steps = 0;
  std::int64_t force_evals = 0;
  std::uint64_t stream_id = 0;
};

struct ReservoirPoint {
  Vec2 x;
  double weight;
};

/// Weighted empirical representation of the flux restricted to one milestone.
class Reservoir {
 public:
  explicit Reservoir(int milestone_index = -1) : milestone_(milestone_index) {}

  void add(const Vec2& x, double weight);
  int milestone_index() const { return milestone_; }
  std::size_t size() const { return points_.size(); }
  bool active() const { return !points_.empty() && total_weight_ > 0.0; }
  double total_weight() const { return total_weight_; }
  const std::vector<ReservoirPoint>& points() const { return points_; }

  /// Overwrites the position of point i, keeping its weight.
  void replace(std::size_t i, const Vec2& x) { points_.at(i).x = x; }

  /// Multiplies every weight by `factor`.
  void scale(double factor);

  /// Keeps a uniformly random subset of `capacity` points, rescaling the
  /// survivors so the total weight is unchanged.
  void cap(std::size_t capacity, RngStream& rng);

  /// Draws `count` indices i.i.d. proportional to weight.
  std::vector<std::size_t> draw(std::size_t count, RngStream& rng) const;

 private:
  int milestone_;
  std::vector<ReservoirPoint> points_;
  double total_weight_ = 0.0;
};

/// Integrates from x0 until the first crossing of a milestone other than
/// `start_milestone`. A fragment started on the product is the instantaneous
/// restart: it ends on the reactant at a rho sample with zero time and steps.
Fragment run_fragment(const Vec2& x0, int start_milestone, const Partition& partition, const PotentialSpec& spec,
                      const IntegratorConfig& cfg, RngStream& rng, RestartPoint restart = RestartPoint::PostStep);

struct SamplingOptions {
  RestartPoint restart = RestartPoint::PostStep;
  CensorPolicy censor = CensorPolicy::Abort;
  int threads = 1;
};

struct FragmentTask {
  int start_milestone = -1;
  Vec2 start = Vec2::Zero();
  std::uint64_t stream_id = 0;
};

/// Start points for one row: `count` i.i.d. weighted draws from the reservoir
/// (using the resample stream `base_stream`), fragment streams
/// make_stream_id(Fragment, base_stream + l).
std::vector<FragmentTask> plan_row(int milestone, const Reservoir& reservoir, int count, std::uint64_t seed,
                                   std::uint64_t base_stream);

struct TaskResults {
  std::vector<std::optional<Fragment>> fragments;  // nullopt: dropped after censoring
  std::int64_t censored = 0;
  std::int64_t censored_force_evals = 0;
};

/// Runs the tasks in parallel; rethrows the first failure in task order.
TaskResults run_tasks(const std::vector<FragmentTask>& tasks, const Partition& partition, const PotentialSpec& spec,
                      const IntegratorConfig& cfg, std::uint64_t seed, const SamplingOptions& options);

struct RowSample {
  int milestone = -1;
  bool active = false;
  std::vector<Fragment> fragments;
  std::vector<std::int64_t> row_counts;  // per destination milestone
  double mean_fpt = 0.0;
  std::int64_t force_evals = 0;  // includes censored fragments
  std::int64_t dropped = 0;
};

/// Aggregates a row; `fragments` must be in stream order.
RowSample summarize_row(int milestone, int milestone_count, std::vector<Fragment> fragments,
                        std::int64_t wasted_force_evals = 0, std::int64_t dropped = 0);

/// Samples L fragments from milestone i. Returns an inactive row (no
/// fragments, active == false) if the reservoir is empty.
RowSample sample_row(int i, const Reservoir& reservoir, int L, const Partition& partition, const PotentialSpec& spec,
                     const IntegratorConfig& cfg, std::uint64_t seed, std::uint64_t base_stream,
                     const SamplingOptions& options = {});

}  // namespace exm

#endif  // EXMILE_FRAGMENTS_HPP
