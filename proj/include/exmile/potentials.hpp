#ifndef EXMILE_POTENTIALS_HPP
#define EXMILE_POTENTIALS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "exmile/types.hpp"

namespace exm {

enum class PotentialKind { MuellerBrown, RoughLandscape, Quadratic, Flat, LinearDrift };

std::string_view to_string(PotentialKind kind);
PotentialKind parse_potential_kind(std::string_view name);

namespace closed_form {

// One term A exp(a dx^2 + b dx dy + c dy^2) with dx = x1 - x0, dy = x2 - y0.
struct GaussianTerm {
  double amplitude, a, b, c, x0, y0;
};

// Mueller-Brown constants, transcribed once from the four-exponential formula.
inline constexpr std::array<GaussianTerm, 4> kMuellerBrown{{
    {-200.0, -1.0, 0.0, -10.0, 1.0, 0.0},
    {-100.0, -1.0, 0.0, -10.0, 0.0, 0.5},
    {-170.0, -6.5, 11.0, -6.5, -0.5, 1.5},
    {15.0, 0.7, 0.6, 0.7, -1.0, 1.0},
}};

template <typename Scalar>
Scalar mueller_brown(const Point2<Scalar>& x) {
  using std::exp;
  Scalar u(0);
  for (const auto& t : kMuellerBrown) {
    const Scalar dx = x.x() - Scalar(t.x0);
    const Scalar dy = x.y() - Scalar(t.y0);
    u += Scalar(t.amplitude) * exp(Scalar(t.a) * dx * dx + Scalar(t.b) * dx * dy + Scalar(t.c) * dy * dy);
  }
  return u;
}

template <typename Scalar>
Point2<Scalar> mueller_brown_gradient(const Point2<Scalar>& x) {
  using std::exp;
  Point2<Scalar> g = Point2<Scalar>::Zero();
  for (const auto& t : kMuellerBrown) {
    const Scalar dx = x.x() - Scalar(t.x0);
    const Scalar dy = x.y() - Scalar(t.y0);
    const Scalar e = Scalar(t.amplitude) *
                     exp(Scalar(t.a) * dx * dx + Scalar(t.b) * dx * dy + Scalar(t.c) * dy * dy);
    g.x() += e * (Scalar(2 * t.a) * dx + Scalar(t.b) * dy);
    g.y() += e * (Scalar(t.b) * dx + Scalar(2 * t.c) * dy);
  }
  return g;
}

}  // namespace closed_form

inline constexpr int kMaxRoughOrder = 64;

/// Fourier coefficient z = a + i b of mode (k1, k2).
struct RoughCoefficient {
  int k1 = 0;
  int k2 = 0;
  double a = 0.0;
  double b = 0.0;
};

/// Immutable description of a two-dimensional energy landscape.
///
/// RoughLandscape is U(x) = Re sum_{k1,k2=-N..N} z_{k1,k2} exp(2 pi i (k1 x1 + k2 x2)),
/// 1-periodic in both coordinates; its inputs are reduced modulo 1 before
/// evaluation. Quadratic is 1/2 sum_i k_i (x_i - c_i)^2 and LinearDrift is g . x.
class PotentialSpec {
 public:
  static PotentialSpec mueller_brown();
  static PotentialSpec flat();
  static PotentialSpec quadratic(const Vec2& stiffness = Vec2(1.0, 1.0), const Vec2& center = Vec2::Zero());
  static PotentialSpec linear_drift(const Vec2& gradient);
  /// Coefficients must cover every (k1, k2) in [-order, order]^2 exactly once.
  static PotentialSpec rough_landscape(int order, std::vector<RoughCoefficient> coefficients);

  PotentialKind kind() const { return kind_; }
  int order() const { return order_; }
  const std::vector<RoughCoefficient>& coefficients() const { return coefficients_; }
  const Vec2& stiffness() const { return stiffness_; }
  const Vec2& center() const { return center_; }
  const Vec2& drift_gradient() const { return gradient_; }

  /// Coefficient of mode (k1, k2) for a rough landscape.
  const RoughCoefficient& coefficient(int k1, int k2) const;

 private:
  explicit PotentialSpec(PotentialKind kind) : kind_(kind) {}

  PotentialKind kind_;
  int order_ = 0;
  std::vector<RoughCoefficient> coefficients_;  // k1-major, k2-minor
  Vec2 stiffness_ = Vec2(1.0, 1.0);
  Vec2 center_ = Vec2::Zero();
  Vec2 gradient_ = Vec2::Zero();
};

/// Draws the (2N+1)^2 rough-landscape coefficients; a and b are zero with
/// probability 1/2 each, independently, and otherwise uniform on (-1, 1).
PotentialSpec make_rough_landscape(int order, std::uint64_t seed);

double eval_potential(const PotentialSpec& spec, const Vec2& x);
Vec2 eval_gradient(const PotentialSpec& spec, const Vec2& x);

}  // namespace exm

#endif  // EXMILE_POTENTIALS_HPP
