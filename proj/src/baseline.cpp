#include "exmile/baseline.hpp"

#include <cmath>

#include "exmile/errors.hpp"
#include "exmile/parallel.hpp"

namespace exm {

namespace {

struct ReplicaOutput {
  std::vector<PassageEvent> events;
  std::vector<std::int64_t> visits;
  std::vector<Reservoir> reservoirs;
  std::vector<std::int64_t> seen;  // crossing points offered to each reservoir
  std::vector<std::int64_t> local_steps;  // steps from each visit to the next crossing
  std::int64_t force_evals = 0;
};

struct CyclePoint {
  int milestone;
  Vec2 x;
  std::int64_t step;
};

ReplicaOutput run_replica(int replica, std::int64_t budget, const Partition& partition, const PotentialSpec& spec,
                          const IntegratorConfig& cfg, const LongRunOptions& options) {
  const int m = partition.size();
  const auto cap = options.points_per_milestone;
  ReplicaOutput out;
  out.visits.assign(static_cast<std::size_t>(m), 0);
  out.seen.assign(static_cast<std::size_t>(m), 0);
  out.local_steps.assign(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) out.reservoirs.emplace_back(i);

  RngStream rng(options.seed, make_stream_id(StreamDomain::LongTrajectory, static_cast<std::uint64_t>(replica)));
  RngStream keep(options.seed, make_stream_id(StreamDomain::Misc, (1ull << 40) + static_cast<std::uint64_t>(replica)));
  Integrator integrator(spec, cfg);
  const bool torus = cfg.domain == Domain::Torus;

  std::vector<CyclePoint> cycle;
  Vec2 x;
  int current = partition.reactant();
  std::int64_t steps = 0, cycle_start = 0;
  auto restart = [&]() {
    x = partition.sample_rho(rng);
    if (torus) x = wrap_torus(x);
    current = partition.reactant();
    cycle.clear();
    cycle.push_back({current, x, steps});  // the restart landing on R is J_0
  };
  restart();

  while (steps < budget) {
    const StepResult next = integrator.step(x, rng);
    ++steps;
    if (const auto crossing = partition.detect_crossing(x, next.unwrapped, current)) {
      current = crossing->milestone_index;
      cycle.push_back({current, torus ? wrap_torus(crossing->point) : crossing->point, steps});
      if (current == partition.product()) {
        PassageEvent e;
        e.replica = replica;
        e.event_index = static_cast<std::int64_t>(out.events.size());
        e.force_evals = steps - cycle_start;
        e.passage_time = static_cast<double>(e.force_evals) * cfg.dt;
        e.crossings = static_cast<std::int64_t>(cycle.size()) - 1;
        out.events.push_back(e);
        for (std::size_t k = 0; k < cycle.size(); ++k) {
          const auto& c = cycle[k];
          const auto i = static_cast<std::size_t>(c.milestone);
          if (k + 1 < cycle.size()) out.local_steps[i] += cycle[k + 1].step - c.step;
          ++out.visits[i];
          auto& seen = out.seen[i];
          ++seen;
          // Reservoir sampling keeps a uniform subset of the crossing points.
          if (out.reservoirs[i].size() < cap) {
            out.reservoirs[i].add(c.x, 1.0);
          } else if (cap > 0) {
            const auto slot = keep.uniform_index(static_cast<std::uint64_t>(seen));
            if (slot < cap) out.reservoirs[i].replace(static_cast<std::size_t>(slot), c.x);
          }
        }
        cycle_start = steps;
        restart();
        continue;
      }
    }
    x = next.position;
  }
  out.force_evals = integrator.force_evals();
  return out;
}

}  // namespace

LongRunResult run_long(const Partition& partition, const PotentialSpec& spec, const IntegratorConfig& cfg,
                       const LongRunOptions& options) {
  if (options.budget_force_evals < 0) throw InvalidArgument("long run: budget must be >= 0");
  if (options.replicas < 1) throw InvalidArgument("long run: replicas must be >= 1");
  cfg.validate();
  const int m = partition.size();
  const auto R = static_cast<std::int64_t>(options.replicas);

  std::vector<ReplicaOutput> parts(static_cast<std::size_t>(options.replicas));
  std::vector<std::exception_ptr> errors(parts.size());
  parallel_for(parts.size(), options.threads, [&](std::size_t r) {
    const std::int64_t share = options.budget_force_evals / R + (static_cast<std::int64_t>(r) < options.budget_force_evals % R ? 1 : 0);
    try {
      parts[r] = run_replica(static_cast<int>(r), share, partition, spec, cfg, options);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  LongRunResult result;
  result.visits.assign(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) result.reservoirs.emplace_back(i);
  std::vector<std::int64_t> seen(static_cast<std::size_t>(m), 0), local(static_cast<std::size_t>(m), 0);
  for (auto& part : parts) {
    result.events.insert(result.events.end(), part.events.begin(), part.events.end());
    result.force_evals += part.force_evals;
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      result.visits[s] += part.visits[s];
      seen[s] += part.seen[s];
      local[s] += part.local_steps[s];
    }
  }
  // Each stored point stands for seen / stored crossings of its replica.
  for (auto& part : parts) {
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const auto& res = part.reservoirs[s];
      if (res.size() == 0) continue;
      const double w = static_cast<double>(part.seen[s]) / static_cast<double>(res.size());
      for (const auto& p : res.points()) result.reservoirs[s].add(p.x, w);
    }
  }

  result.weights = Eigen::VectorXd::Zero(m);
  result.mean_local_fpt = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (result.visits[s] > 0) result.mean_local_fpt(i) = static_cast<double>(local[s]) * cfg.dt / static_cast<double>(result.visits[s]);
  }
  std::int64_t total = 0;
  for (auto v : result.visits) total += v;
  if (total > 0) {
    for (int i = 0; i < m; ++i) result.weights(i) = static_cast<double>(result.visits[static_cast<std::size_t>(i)]) / total;
    for (auto& r : result.reservoirs) r.scale(1.0 / static_cast<double>(total));
  }

  const auto n = result.events.size();
  if (n > 0) {
    double sum = 0.0;
    for (const auto& e : result.events) sum += e.passage_time;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& e : result.events) ss += (e.passage_time - mean) * (e.passage_time - mean);
    result.mfpt = mean;
    result.mfpt_std_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : INFINITY;
  }
  return result;
}

}  // namespace exm
