#ifndef EXMILE_GEOMETRY_HPP
#define EXMILE_GEOMETRY_HPP

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "exmile/rng.hpp"
#include "exmile/sde.hpp"
#include "exmile/types.hpp"

namespace exm {

struct Segment {
  Vec2 a;
  Vec2 b;

  double length() const { return (b - a).norm(); }
  Vec2 midpoint() const { return 0.5 * (a + b); }
  Vec2 at(double s) const { return a + s * (b - a); }
};

/// Parameter t on [p, q] of the intersection with `seg`, if the two closed
/// segments meet in a single point. Parallel pairs never intersect.
std::optional<double> intersect_segments(const Vec2& p, const Vec2& q, const Segment& seg);

/// Euclidean distance from x to the closed segment.
double distance_to_segment(const Vec2& x, const Segment& seg);

enum class MilestoneRole { Interior, Reactant, Product };

inline constexpr int kNoCell = -1;

struct Milestone {
  int index = 0;
  std::vector<Segment> segments;
  MilestoneRole role = MilestoneRole::Interior;
  // The two cells this milestone separates (kNoCell for the outside).
  // Milestones are adjacent when they bound a common cell.
  std::array<int, 2> cells{kNoCell, kNoCell};
};

struct Crossing {
  int milestone_index = -1;
  Vec2 point = Vec2::Zero();
  double segment_parameter = 0.0;
};

struct ReactantDistribution {
  enum class Kind { PointMass, UniformOnSegments };
  Kind kind = Kind::PointMass;
  std::optional<Vec2> point;  // PointMass location; defaults to the reactant midpoint
};

std::string_view to_string(ReactantDistribution::Kind kind);

/// The milestone set with reactant/product roles, the restart law rho and a
/// bucket index for crossing queries. Immutable once built.
class Partition {
 public:
  Partition(std::vector<Milestone> milestones, int reactant, int product, ReactantDistribution rho,
            Domain domain);

  int size() const { return static_cast<int>(milestones_.size()); }
  const Milestone& milestone(int i) const { return milestones_.at(static_cast<std::size_t>(i)); }
  const std::vector<Milestone>& milestones() const { return milestones_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_.at(static_cast<std::size_t>(i)); }
  bool adjacent(int i, int j) const;
  int reactant() const { return reactant_; }
  int product() const { return product_; }
  Domain domain() const { return domain_; }
  const ReactantDistribution& rho() const { return rho_; }

  /// Midpoint of the milestone's longest segment.
  Vec2 representative_point(int i) const;
  /// Distance from x to milestone i (on the torus, to the nearest periodic image).
  double distance_to(const Vec2& x, int i) const;
  /// True when no two segments of different milestones overlap along a line.
  bool intersections_negligible() const;

  Vec2 sample_rho(RngStream& rng) const;

  /// First crossing (smallest parameter along [from, to], ties to the lowest
  /// index) of any milestone other than `current`. On the torus `to` must be
  /// the unwrapped endpoint.
  std::optional<Crossing> detect_crossing(const Vec2& from, const Vec2& to, int current) const;

 private:
  struct Entry {
    Segment segment;
    int milestone;
  };

  void build_index();
  template <typename Visit>
  void for_each_bucket(const Vec2& lo, const Vec2& hi, Visit&& visit) const;

  std::vector<Milestone> milestones_;
  std::vector<std::vector<int>> adjacency_;
  int reactant_;
  int product_;
  ReactantDistribution rho_;
  Domain domain_;

  // Uniform bucket grid over [origin, origin + extent]; on the torus the unit cell.
  Vec2 origin_ = Vec2::Zero();
  Vec2 cell_size_ = Vec2::Ones();
  int grid_ = 1;
  std::vector<std::vector<Entry>> buckets_;
};

inline std::optional<Crossing> detect_crossing(const Vec2& x_prev, const Vec2& x_next, int current_milestone,
                                               const Partition& partition) {
  return partition.detect_crossing(x_prev, x_next, current_milestone);
}

/// Reactant/product designation for a Voronoi partition: the milestone shared
/// by each named pair of centers.
struct VoronoiRoles {
  std::array<int, 2> reactant{0, 1};
  std::array<int, 2> product{0, 1};
};

/// Milestones are the Voronoi edges between adjacent cells, clipped to bbox.
/// Unless `roles` is given, reactant is the first edge and product the last.
Partition build_voronoi_partition(const std::vector<Vec2>& centers, const Box& bbox,
                                  std::optional<VoronoiRoles> roles = std::nullopt,
                                  ReactantDistribution rho = {});

enum class CellSide { Bottom, Top, Left, Right };
CellSide parse_cell_side(std::string_view name);

struct GridEdge {
  int i = 0;  // column
  int j = 0;  // row
  CellSide side = CellSide::Bottom;
};

struct GridRoles {
  GridEdge reactant;
  GridEdge product;
};

/// n x n mesh of squares over the unit square. On the torus the 2 n^2 cell
/// edges; on the plane the 2 n (n+1) edges including the outer boundary.
/// Horizontal edges come first: bottom edge of cell (i, j) has index j n + i.
/// Default roles: bottom of cell (n/4, n/4) and top of cell (3n/4, 3n/4).
Partition build_grid_partition(int n, bool torus, std::optional<GridRoles> roles = std::nullopt,
                               ReactantDistribution rho = {});

/// Milestone index of a grid edge (throws ConfigError if it is not an edge).
int grid_edge_index(int n, bool torus, const GridEdge& edge);

/// Vertical level sets x1 = level spanning bbox's x2 range; M_1 is the
/// reactant, M_m the product.
Partition build_level_partition(const std::vector<double>& levels, const Box& bbox, ReactantDistribution rho = {});

}  // namespace exm

#endif  // EXMILE_GEOMETRY_HPP
