#include "exmile/fragments.hpp"

#include <algorithm>
#include <exception>
#include <iostream>
#include <numeric>

#include "exmile/errors.hpp"
#include "exmile/parallel.hpp"

namespace exm {

std::string_view to_string(RestartPoint mode) { return mode == RestartPoint::PostStep ? "post-step" : "crossing"; }

RestartPoint parse_restart_point(std::string_view name) {
  if (name == "post-step") return RestartPoint::PostStep;
  if (name == "crossing") return RestartPoint::Crossing;
  throw InvalidArgument("unknown restart point '" + std::string(name) + "'");
}

std::string_view to_string(CensorPolicy policy) { return policy == CensorPolicy::Abort ? "abort" : "drop"; }

CensorPolicy parse_censor_policy(std::string_view name) {
  if (name == "abort") return CensorPolicy::Abort;
  if (name == "drop") return CensorPolicy::Drop;
  throw InvalidArgument("unknown censor policy '" + std::string(name) + "'");
}

void Reservoir::add(const Vec2& x, double weight) {
  if (!(weight >= 0.0)) throw InvalidArgument("reservoir weights must be nonnegative");
  points_.push_back({x, weight});
  total_weight_ += weight;
}

void Reservoir::scale(double factor) {
  total_weight_ = 0.0;
  for (auto& p : points_) {
    p.weight *= factor;
    total_weight_ += p.weight;
  }
}

void Reservoir::cap(std::size_t capacity, RngStream& rng) {
  if (points_.size() <= capacity) return;
  const double before = total_weight_;
  for (std::size_t i = 0; i < capacity; ++i) {
    const std::size_t j = i + rng.uniform_index(points_.size() - i);
    std::swap(points_[i], points_[j]);
  }
  points_.resize(capacity);
  double kept = 0.0;
  for (const auto& p : points_) kept += p.weight;
  total_weight_ = kept;
  if (kept > 0.0) scale(before / kept);
}

std::vector<std::size_t> Reservoir::draw(std::size_t count, RngStream& rng) const {
  if (!active()) throw InvalidArgument("cannot draw from an inactive reservoir");
  std::vector<double> cumulative(points_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    acc += points_[i].weight;
    cumulative[i] = acc;
  }
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double target = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    // Skip zero-weight points sitting on the same cumulative value.
    std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    while (points_[idx].weight == 0.0 && idx + 1 < points_.size()) ++idx;
    out.push_back(idx);
  }
  return out;
}

Fragment run_fragment(const Vec2& x0, int start_milestone, const Partition& partition, const PotentialSpec& spec,
                      const IntegratorConfig& cfg, RngStream& rng, RestartPoint restart) {
  Fragment f;
  f.start_milestone = start_milestone;
  f.start_point = x0;
  f.stream_id = rng.stream_id();

  if (start_milestone == partition.product()) {
    f.end_milestone = partition.reactant();
    f.end_point = partition.sample_rho(rng);
    f.resume_point = f.end_point;
    return f;
  }

  Integrator integrator(spec, cfg);
  const bool torus = cfg.domain == Domain::Torus;
  Vec2 x = torus ? wrap_torus(x0) : x0;
  for (std::int64_t step = 1; step <= cfg.max_steps_per_fragment; ++step) {
    const StepResult next = integrator.step(x, rng);
    if (const auto crossing = partition.detect_crossing(x, next.unwrapped, start_milestone)) {
      f.end_milestone = crossing->milestone_index;
      f.end_point = torus ? wrap_torus(crossing->point) : crossing->point;
      f.resume_point = restart == RestartPoint::PostStep ? next.position : f.end_point;
      f.steps = step;
      f.force_evals = integrator.force_evals();
      f.fpt = static_cast<double>(step) * cfg.dt;
      return f;
    }
    x = next.position;
  }
  throw CensoredFragment(cfg.max_steps_per_fragment, f.stream_id);
}

std::vector<FragmentTask> plan_row(int milestone, const Reservoir& reservoir, int count, std::uint64_t seed,
                                   std::uint64_t base_stream) {
  if (count < 1) throw InvalidArgument("fragments per milestone must be >= 1");
  RngStream rng(seed, make_stream_id(StreamDomain::Resample, base_stream));
  const auto picks = reservoir.draw(static_cast<std::size_t>(count), rng);
  std::vector<FragmentTask> tasks;
  tasks.reserve(picks.size());
  for (std::size_t l = 0; l < picks.size(); ++l) {
    tasks.push_back({milestone, reservoir.points()[picks[l]].x, make_stream_id(StreamDomain::Fragment, base_stream + l)});
  }
  return tasks;
}

TaskResults run_tasks(const std::vector<FragmentTask>& tasks, const Partition& partition, const PotentialSpec& spec,
                      const IntegratorConfig& cfg, std::uint64_t seed, const SamplingOptions& options) {
  TaskResults out;
  out.fragments.resize(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::vector<std::int64_t> censored_steps(tasks.size(), 0);

  parallel_for(tasks.size(), options.threads, [&](std::size_t k) {
    const auto& task = tasks[k];
    RngStream rng(seed, task.stream_id);
    try {
      out.fragments[k] = run_fragment(task.start, task.start_milestone, partition, spec, cfg, rng, options.restart);
    } catch (const CensoredFragment& c) {
      if (options.censor == CensorPolicy::Abort) {
        errors[k] = std::current_exception();
      } else {
        censored_steps[k] = c.steps();
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  });

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!out.fragments[k]) {
      ++out.censored;
      out.censored_force_evals += censored_steps[k];
    }
  }
  if (out.censored > 0) {
    std::cerr << "warning: dropped " << out.censored << " censored fragment(s)\n";
  }
  return out;
}

RowSample summarize_row(int milestone, int milestone_count, std::vector<Fragment> fragments,
                        std::int64_t wasted_force_evals, std::int64_t dropped) {
  RowSample row;
  row.milestone = milestone;
  row.active = true;
  row.dropped = dropped;
  row.row_counts.assign(static_cast<std::size_t>(milestone_count), 0);
  row.force_evals = wasted_force_evals;
  double total_fpt = 0.0;
  for (const auto& f : fragments) {
    ++row.row_counts[static_cast<std::size_t>(f.end_milestone)];
    total_fpt += f.fpt;
    row.force_evals += f.force_evals;
  }
  row.mean_fpt = fragments.empty() ? 0.0 : total_fpt / static_cast<double>(fragments.size());
  row.fragments = std::move(fragments);
  return row;
}

RowSample sample_row(int i, const Reservoir& reservoir, int L, const Partition& partition, const PotentialSpec& spec,
                     const IntegratorConfig& cfg, std::uint64_t seed, std::uint64_t base_stream,
                     const SamplingOptions& options) {
  if (!reservoir.active()) {
    RowSample inactive;
    inactive.milestone = i;
    inactive.row_counts.assign(static_cast<std::size_t>(partition.size()), 0);
    return inactive;
  }
  const auto tasks = plan_row(i, reservoir, L, seed, base_stream);
  auto results = run_tasks(tasks, partition, spec, cfg, seed, options);
  std::vector<Fragment> done;
  done.reserve(results.fragments.size());
  for (auto& f : results.fragments) {
    if (f) done.push_back(std::move(*f));
  }
  return summarize_row(i, partition.size(), std::move(done), results.censored_force_evals, results.censored);
}

}  // namespace exm
