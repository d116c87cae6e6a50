#include "exmile/potentials.hpp"

#include <array>
#include <complex>
#include <numbers>

#include "exmile/errors.hpp"
#include "exmile/rng.hpp"

namespace exm {

namespace {

void require_finite(const Vec2& x) {
  if (!std::isfinite(x.x()) || !std::isfinite(x.y())) {
    throw InvalidArgument("potential evaluated at a non-finite position");
  }
}

double wrap_unit(double v) { return v - std::floor(v); }

// Accumulates U and grad U of the Fourier sum by separating the two
// coordinates: exp(2 pi i k.x) = e1^k1 e2^k2.
void rough_energy_gradient(const PotentialSpec& spec, const Vec2& x, double* energy, Vec2* gradient) {
  using cplx = std::complex<double>;
  const int n = spec.order();
  const int width = 2 * n + 1;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const double x1 = wrap_unit(x.x());
  const double x2 = wrap_unit(x.y());

  std::array<cplx, 2 * kMaxRoughOrder + 1> p1, p2;
  const cplx w1 = std::polar(1.0, two_pi * x1);
  const cplx w2 = std::polar(1.0, two_pi * x2);
  p1[n] = p2[n] = cplx(1.0, 0.0);
  for (int k = 1; k <= n; ++k) {
    p1[n + k] = p1[n + k - 1] * w1;
    p2[n + k] = p2[n + k - 1] * w2;
    p1[n - k] = std::conj(p1[n + k]);
    p2[n - k] = std::conj(p2[n + k]);
  }

  const auto& coeffs = spec.coefficients();
  cplx u(0.0), d1(0.0), d2(0.0);
  for (int i = 0; i < width; ++i) {
    cplx s0(0.0), s2(0.0);
    const RoughCoefficient* row = coeffs.data() + static_cast<std::ptrdiff_t>(i) * width;
    for (int j = 0; j < width; ++j) {
      const cplx term = cplx(row[j].a, row[j].b) * p2[j];
      s0 += term;
      s2 += static_cast<double>(j - n) * term;
    }
    const cplx e = p1[i];
    u += e * s0;
    d1 += static_cast<double>(i - n) * e * s0;
    d2 += e * s2;
  }
  if (energy) *energy = u.real();
  if (gradient) {
    // d/dx Re(z e^{i 2 pi k x}) = Re(i 2 pi k z e^{...}) = -2 pi k Im(z e^{...})
    *gradient = Vec2(-two_pi * d1.imag(), -two_pi * d2.imag());
  }
}

}  // namespace

std::string_view to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::MuellerBrown: return "mueller-brown";
    case PotentialKind::RoughLandscape: return "rough";
    case PotentialKind::Quadratic: return "quadratic";
    case PotentialKind::Flat: return "flat";
    case PotentialKind::LinearDrift: return "linear-drift";
  }
  return "unknown";
}

PotentialKind parse_potential_kind(std::string_view name) {
  if (name == "mueller-brown" || name == "muller-brown") return PotentialKind::MuellerBrown;
  if (name == "rough") return PotentialKind::RoughLandscape;
  if (name == "quadratic") return PotentialKind::Quadratic;
  if (name == "flat") return PotentialKind::Flat;
  if (name == "linear-drift") return PotentialKind::LinearDrift;
  throw InvalidArgument("unknown potential kind '" + std::string(name) + "'");
}

PotentialSpec PotentialSpec::mueller_brown() { return PotentialSpec(PotentialKind::MuellerBrown); }

PotentialSpec PotentialSpec::flat() { return PotentialSpec(PotentialKind::Flat); }

PotentialSpec PotentialSpec::quadratic(const Vec2& stiffness, const Vec2& center) {
  if (!stiffness.allFinite() || !center.allFinite()) throw InvalidArgument("quadratic: non-finite parameters");
  PotentialSpec spec(PotentialKind::Quadratic);
  spec.stiffness_ = stiffness;
  spec.center_ = center;
  return spec;
}

PotentialSpec PotentialSpec::linear_drift(const Vec2& gradient) {
  if (!gradient.allFinite()) throw InvalidArgument("linear-drift: non-finite gradient");
  PotentialSpec spec(PotentialKind::LinearDrift);
  spec.gradient_ = gradient;
  return spec;
}

PotentialSpec PotentialSpec::rough_landscape(int order, std::vector<RoughCoefficient> coefficients) {
  if (order < 0 || order > kMaxRoughOrder) {
    throw InvalidArgument("rough landscape: order must be in [0, " + std::to_string(kMaxRoughOrder) + "]");
  }
  const std::size_t width = 2 * static_cast<std::size_t>(order) + 1;
  if (coefficients.size() != width * width) {
    throw InvalidArgument("rough landscape: expected " + std::to_string(width * width) + " coefficients, got " +
                          std::to_string(coefficients.size()));
  }
  std::vector<RoughCoefficient> table(width * width);
  std::vector<bool> seen(width * width, false);
  for (const auto& c : coefficients) {
    if (std::abs(c.k1) > order || std::abs(c.k2) > order) {
      throw InvalidArgument("rough landscape: mode index out of range");
    }
    if (!std::isfinite(c.a) || !std::isfinite(c.b)) throw InvalidArgument("rough landscape: non-finite coefficient");
    const std::size_t slot = static_cast<std::size_t>(c.k1 + order) * width + static_cast<std::size_t>(c.k2 + order);
    if (seen[slot]) throw InvalidArgument("rough landscape: duplicate mode");
    seen[slot] = true;
    table[slot] = c;
  }
  PotentialSpec spec(PotentialKind::RoughLandscape);
  spec.order_ = order;
  spec.coefficients_ = std::move(table);
  return spec;
}

const RoughCoefficient& PotentialSpec::coefficient(int k1, int k2) const {
  if (kind_ != PotentialKind::RoughLandscape || std::abs(k1) > order_ || std::abs(k2) > order_) {
    throw InvalidArgument("coefficient: no such mode");
  }
  const int width = 2 * order_ + 1;
  return coefficients_[static_cast<std::size_t>((k1 + order_) * width + (k2 + order_))];
}

PotentialSpec make_rough_landscape(int order, std::uint64_t seed) {
  if (order < 0) throw InvalidArgument("make_rough_landscape: order must be >= 0");
  RngStream rng(seed, make_stream_id(StreamDomain::Landscape, 0));
  auto draw = [&rng]() { return rng.bernoulli(0.5) ? rng.uniform_open(-1.0, 1.0) : 0.0; };
  std::vector<RoughCoefficient> coeffs;
  coeffs.reserve(static_cast<std::size_t>((2 * order + 1) * (2 * order + 1)));
  for (int k1 = -order; k1 <= order; ++k1) {
    for (int k2 = -order; k2 <= order; ++k2) {
      const double a = draw();
      const double b = draw();
      coeffs.push_back({k1, k2, a, b});
    }
  }
  return PotentialSpec::rough_landscape(order, std::move(coeffs));
}

double eval_potential(const PotentialSpec& spec, const Vec2& x) {
  require_finite(x);
  switch (spec.kind()) {
    case PotentialKind::MuellerBrown: return closed_form::mueller_brown(x);
    case PotentialKind::Flat: return 0.0;
    case PotentialKind::LinearDrift: return spec.drift_gradient().dot(x);
    case PotentialKind::Quadratic: {
      const Vec2 d = x - spec.center();
      return 0.5 * (spec.stiffness().array() * d.array().square()).sum();
    }
    case PotentialKind::RoughLandscape: {
      double u = 0.0;
      rough_energy_gradient(spec, x, &u, nullptr);
      return u;
    }
  }
  return 0.0;
}

Vec2 eval_gradient(const PotentialSpec& spec, const Vec2& x) {
  require_finite(x);
  switch (spec.kind()) {
    case PotentialKind::MuellerBrown: return closed_form::mueller_brown_gradient(x);
    case PotentialKind::Flat: return Vec2::Zero();
    case PotentialKind::LinearDrift: return spec.drift_gradient();
    case PotentialKind::Quadratic: return (spec.stiffness().array() * (x - spec.center()).array()).matrix();
    case PotentialKind::RoughLandscape: {
      Vec2 g;
      rough_energy_gradient(spec, x, nullptr, &g);
      return g;
    }
  }
  return Vec2::Zero();
}

}  // namespace exm
