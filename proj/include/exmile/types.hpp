#ifndef EXMILE_TYPES_HPP
#define EXMILE_TYPES_HPP

#include <Eigen/Core>

namespace exm {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

using Vec2 = Point2<double>;

// Axis-aligned rectangle [x1_min, x1_max] x [x2_min, x2_max].
struct Box {
  double x1_min = 0.0;
  double x1_max = 1.0;
  double x2_min = 0.0;
  double x2_max = 1.0;

  bool contains(const Vec2& x) const {
    return x.x() >= x1_min && x.x() <= x1_max && x.y() >= x2_min && x.y() <= x2_max;
  }
};

}  // namespace exm

#endif  // EXMILE_TYPES_HPP
