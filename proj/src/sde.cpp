#include "exmile/sde.hpp"

#include <sstream>

#include "exmile/errors.hpp"

namespace exm {

namespace {

StepResult finish(const Vec2& x, const Vec2& next, Domain domain) {
  if (!next.allFinite()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "Euler-Maruyama step from (" << x.x() << ", " << x.y() << ") produced a non-finite position";
    throw NumericalBlowup(msg.str());
  }
  return {domain == Domain::Torus ? wrap_torus(next) : next, next};
}

}  // namespace

std::string_view to_string(Domain domain) { return domain == Domain::Torus ? "torus" : "plane"; }

Domain parse_domain(std::string_view name) {
  if (name == "plane") return Domain::Plane;
  if (name == "torus") return Domain::Torus;
  throw InvalidArgument("unknown domain '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("integrator.dt must be > 0");
  if (!(beta_inv > 0.0) || !std::isfinite(beta_inv)) throw InvalidArgument("integrator.beta_inv must be > 0");
  if (max_steps_per_fragment < 1) throw InvalidArgument("integrator.max_steps_per_fragment must be >= 1");
}

StepResult em_step(const Vec2& x, const PotentialSpec& spec, const IntegratorConfig& cfg, const Vec2& gauss) {
  const Vec2 next = x - eval_gradient(spec, x) * cfg.dt + std::sqrt(2.0 * cfg.beta_inv * cfg.dt) * gauss;
  return finish(x, next, cfg.domain);
}

StepResult Integrator::advance(const Vec2& x, const Vec2& gauss) const {
  const Vec2 next = x - eval_gradient(*spec_, x) * cfg_->dt + noise_scale_ * gauss;
  return finish(x, next, cfg_->domain);
}

}  // namespace exm
