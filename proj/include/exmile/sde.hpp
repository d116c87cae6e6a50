#ifndef EXMILE_SDE_HPP
#define EXMILE_SDE_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

#include "exmile/potentials.hpp"
#include "exmile/rng.hpp"
#include "exmile/types.hpp"

namespace exm {

enum class Domain { Plane, Torus };

std::string_view to_string(Domain domain);
Domain parse_domain(std::string_view name);

struct IntegratorConfig {
  double dt = 1e-5;
  double beta_inv = 1.0;
  Domain domain = Domain::Plane;
  std::int64_t max_steps_per_fragment = 100'000'000;

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;
};

/// Result of one Euler-Maruyama step. `unwrapped` is the raw endpoint x + dx,
/// which crossing detection needs; `position` is the state carried forward
/// (equal to `unwrapped` on the plane, reduced to [0,1)^2 on the torus).
struct StepResult {
  Vec2 position;
  Vec2 unwrapped;
};

/// Componentwise x mod 1 into [0, 1)^2.
inline Vec2 wrap_torus(const Vec2& x) {
  auto wrap = [](double v) {
    double w = v - std::floor(v);
    return w >= 1.0 ? 0.0 : w;  // v slightly below an integer can round up to 1
  };
  return {wrap(x.x()), wrap(x.y())};
}

/// x - grad U(x) dt + sqrt(2 beta_inv dt) * gauss. One force evaluation.
StepResult em_step(const Vec2& x, const PotentialSpec& spec, const IntegratorConfig& cfg, const Vec2& gauss);

/// Counts force evaluations alongside an RngStream-driven trajectory.
class Integrator {
 public:
  Integrator(const PotentialSpec& spec, const IntegratorConfig& cfg)
      : spec_(&spec), cfg_(&cfg), noise_scale_(std::sqrt(2.0 * cfg.beta_inv * cfg.dt)) {}

  StepResult step(const Vec2& x, RngStream& rng) {
    ++force_evals_;
    return advance(x, rng.normal2());
  }

  std::int64_t force_evals() const { return force_evals_; }
  const IntegratorConfig& config() const { return *cfg_; }
  const PotentialSpec& potential() const { return *spec_; }

 private:
  StepResult advance(const Vec2& x, const Vec2& gauss) const;

  const PotentialSpec* spec_;
  const IntegratorConfig* cfg_;
  double noise_scale_;
  std::int64_t force_evals_ = 0;
};

}  // namespace exm

#endif  // EXMILE_SDE_HPP
