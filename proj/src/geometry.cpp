#include "exmile/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "exmile/errors.hpp"

namespace exm {

namespace {

constexpr double kIndexPad = 1e-9;

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long positive_mod(long a, long b) { return a - b * floor_div(a, b); }

}  // namespace

std::optional<double> intersect_segments(const Vec2& p, const Vec2& q, const Segment& seg) {
  const Vec2 r = q - p;
  const Vec2 s = seg.b - seg.a;
  const double denom = cross(r, s);
  if (denom == 0.0) return std::nullopt;
  const Vec2 ap = seg.a - p;
  const double t = cross(ap, s) / denom;
  const double u = cross(ap, r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double distance_to_segment(const Vec2& x, const Segment& seg) {
  const Vec2 d = seg.b - seg.a;
  const double len2 = d.squaredNorm();
  double s = len2 > 0.0 ? (x - seg.a).dot(d) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (x - seg.at(s)).norm();
}

std::string_view to_string(ReactantDistribution::Kind kind) {
  return kind == ReactantDistribution::Kind::PointMass ? "point-mass" : "uniform";
}

Partition::Partition(std::vector<Milestone> milestones, int reactant, int product, ReactantDistribution rho,
                     Domain domain)
    : milestones_(std::move(milestones)), reactant_(reactant), product_(product), rho_(rho), domain_(domain) {
  const int m = size();
  if (m < 2) throw InvalidArgument("partition needs at least two milestones");
  if (reactant_ < 0 || reactant_ >= m || product_ < 0 || product_ >= m) {
    throw InvalidArgument("partition: reactant/product index out of range");
  }
  if (reactant_ == product_) throw InvalidArgument("partition: reactant and product must differ");
  for (int i = 0; i < m; ++i) {
    auto& ms = milestones_[static_cast<std::size_t>(i)];
    ms.index = i;
    if (ms.segments.empty()) throw InvalidArgument("milestone " + std::to_string(i) + " has no segments");
    for (const auto& seg : ms.segments) {
      if (!seg.a.allFinite() || !seg.b.allFinite() || !(seg.length() > 0.0)) {
        throw InvalidArgument("milestone " + std::to_string(i) + " has a degenerate segment");
      }
    }
    ms.role = i == reactant_ ? MilestoneRole::Reactant
              : i == product_ ? MilestoneRole::Product
                              : MilestoneRole::Interior;
  }

  // Adjacency: milestones bounding a common cell.
  std::vector<std::pair<int, int>> incidence;
  for (const auto& ms : milestones_) {
    for (int c : std::set<int>(ms.cells.begin(), ms.cells.end())) {
      if (c != kNoCell) incidence.emplace_back(c, ms.index);
    }
  }
  std::sort(incidence.begin(), incidence.end());
  std::vector<std::set<int>> adj(static_cast<std::size_t>(m));
  for (std::size_t lo = 0; lo < incidence.size();) {
    std::size_t hi = lo;
    while (hi < incidence.size() && incidence[hi].first == incidence[lo].first) ++hi;
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::size_t b = lo; b < hi; ++b) {
        if (incidence[a].second != incidence[b].second) {
          adj[static_cast<std::size_t>(incidence[a].second)].insert(incidence[b].second);
        }
      }
    }
    lo = hi;
  }
  adjacency_.reserve(adj.size());
  for (const auto& s : adj) adjacency_.emplace_back(s.begin(), s.end());

  if (rho_.kind == ReactantDistribution::Kind::PointMass) {
    if (!rho_.point) rho_.point = representative_point(reactant_);
    if (distance_to(*rho_.point, reactant_) > 1e-9) {
      throw ConfigError("reactant point mass does not lie on the reactant milestone");
    }
  }
  build_index();
}

bool Partition::adjacent(int i, int j) const {
  const auto& n = neighbors(i);
  return std::binary_search(n.begin(), n.end(), j);
}

Vec2 Partition::representative_point(int i) const {
  const auto& segs = milestone(i).segments;
  const auto longest =
      std::max_element(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.length() < b.length(); });
  return longest->midpoint();
}

double Partition::distance_to(const Vec2& x, int i) const {
  double best = std::numeric_limits<double>::infinity();
  const Vec2 base = domain_ == Domain::Torus ? wrap_torus(x) : x;
  for (const auto& seg : milestone(i).segments) {
    if (domain_ == Domain::Torus) {
      for (int sx = -1; sx <= 1; ++sx) {
        for (int sy = -1; sy <= 1; ++sy) {
          best = std::min(best, distance_to_segment(base + Vec2(sx, sy), seg));
        }
      }
    } else {
      best = std::min(best, distance_to_segment(base, seg));
    }
  }
  return best;
}

bool Partition::intersections_negligible() const {
  // Collinear overlap with positive length is the only way two segments can
  // share more than finitely many points.
  for (std::size_t i = 0; i < milestones_.size(); ++i) {
    for (std::size_t j = i + 1; j < milestones_.size(); ++j) {
      for (const auto& s1 : milestones_[i].segments) {
        for (const auto& s2 : milestones_[j].segments) {
          const Vec2 d1 = s1.b - s1.a;
          const double scale = d1.norm();
          if (std::abs(cross(d1, s2.b - s2.a)) > 1e-12 * scale * s2.length()) continue;
          if (std::abs(cross(d1, s2.a - s1.a)) > 1e-12 * scale) continue;
          const Vec2 u = d1 / scale;
          const double lo = std::max(0.0, std::min(u.dot(s2.a - s1.a), u.dot(s2.b - s1.a)));
          const double hi = std::min(scale, std::max(u.dot(s2.a - s1.a), u.dot(s2.b - s1.a)));
          if (hi - lo > 1e-12) return false;
        }
      }
    }
  }
  return true;
}

Vec2 Partition::sample_rho(RngStream& rng) const {
  if (rho_.kind == ReactantDistribution::Kind::PointMass) return *rho_.point;
  const auto& segs = milestone(reactant_).segments;
  double total = 0.0;
  for (const auto& s : segs) total += s.length();
  const double pick = rng.uniform() * total;
  double acc = 0.0;
  const Segment* chosen = &segs.back();
  for (const auto& s : segs) {
    acc += s.length();
    if (pick < acc) {
      chosen = &s;
      break;
    }
  }
  return chosen->at(rng.uniform());
}

void Partition::build_index() {
  std::size_t total = 0;
  for (const auto& ms : milestones_) total += ms.segments.size();
  grid_ = std::clamp(static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(total)))), 1, 512);

  if (domain_ == Domain::Torus) {
    origin_ = Vec2::Zero();
    cell_size_ = Vec2::Constant(1.0 / grid_);
  } else {
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& ms : milestones_) {
      for (const auto& s : ms.segments) {
        lo = lo.cwiseMin(s.a).cwiseMin(s.b);
        hi = hi.cwiseMax(s.a).cwiseMax(s.b);
      }
    }
    const Vec2 extent = (hi - lo).cwiseMax(Vec2::Constant(1e-6));
    origin_ = lo - 1e-6 * extent;
    cell_size_ = (extent * (1.0 + 2e-6)) / grid_;
  }
  buckets_.assign(static_cast<std::size_t>(grid_) * static_cast<std::size_t>(grid_), {});

  for (const auto& ms : milestones_) {
    for (const auto& s : ms.segments) {
      const Vec2 lo = s.a.cwiseMin(s.b) - Vec2::Constant(kIndexPad);
      const Vec2 hi = s.a.cwiseMax(s.b) + Vec2::Constant(kIndexPad);
      const long cx0 = static_cast<long>(std::floor((lo.x() - origin_.x()) / cell_size_.x()));
      const long cx1 = static_cast<long>(std::floor((hi.x() - origin_.x()) / cell_size_.x()));
      const long cy0 = static_cast<long>(std::floor((lo.y() - origin_.y()) / cell_size_.y()));
      const long cy1 = static_cast<long>(std::floor((hi.y() - origin_.y()) / cell_size_.y()));
      std::set<std::pair<long, long>> cells;
      for (long cx = cx0; cx <= cx1; ++cx) {
        for (long cy = cy0; cy <= cy1; ++cy) {
          if (domain_ == Domain::Torus) {
            cells.emplace(positive_mod(cx, grid_), positive_mod(cy, grid_));
          } else if (cx >= 0 && cx < grid_ && cy >= 0 && cy < grid_) {
            cells.emplace(cx, cy);
          }
        }
      }
      for (const auto& [cx, cy] : cells) {
        buckets_[static_cast<std::size_t>(cy * grid_ + cx)].push_back({s, ms.index});
      }
    }
  }
}

template <typename Visit>
void Partition::for_each_bucket(const Vec2& lo, const Vec2& hi, Visit&& visit) const {
  auto cell_of = [](double v, double origin, double size) {
    return static_cast<long>(std::floor((v - origin) / size));
  };
  long cx0 = cell_of(lo.x(), origin_.x(), cell_size_.x());
  long cx1 = cell_of(hi.x(), origin_.x(), cell_size_.x());
  long cy0 = cell_of(lo.y(), origin_.y(), cell_size_.y());
  long cy1 = cell_of(hi.y(), origin_.y(), cell_size_.y());
  if (domain_ == Domain::Plane) {
    cx0 = std::max(cx0, 0L);
    cy0 = std::max(cy0, 0L);
    cx1 = std::min(cx1, static_cast<long>(grid_) - 1);
    cy1 = std::min(cy1, static_cast<long>(grid_) - 1);
    for (long cx = cx0; cx <= cx1; ++cx) {
      for (long cy = cy0; cy <= cy1; ++cy) visit(buckets_[static_cast<std::size_t>(cy * grid_ + cx)], Vec2::Zero());
    }
    return;
  }
  for (long cx = cx0; cx <= cx1; ++cx) {
    for (long cy = cy0; cy <= cy1; ++cy) {
      const Vec2 shift(static_cast<double>(floor_div(cx, grid_)), static_cast<double>(floor_div(cy, grid_)));
      visit(buckets_[static_cast<std::size_t>(positive_mod(cy, grid_) * grid_ + positive_mod(cx, grid_))], shift);
    }
  }
}

std::optional<Crossing> Partition::detect_crossing(const Vec2& from, const Vec2& to, int current) const {
  const Vec2 lo = from.cwiseMin(to) - Vec2::Constant(kIndexPad);
  const Vec2 hi = from.cwiseMax(to) + Vec2::Constant(kIndexPad);
  double best_t = std::numeric_limits<double>::infinity();
  int best = -1;
  for_each_bucket(lo, hi, [&](const std::vector<Entry>& bucket, const Vec2& shift) {
    const Vec2 p = from - shift;
    const Vec2 q = to - shift;
    for (const auto& e : bucket) {
      if (e.milestone == current) continue;
      const auto t = intersect_segments(p, q, e.segment);
      if (!t) continue;
      if (*t < best_t || (*t == best_t && e.milestone < best)) {
        best_t = *t;
        best = e.milestone;
      }
    }
  });
  if (best < 0) return std::nullopt;
  return Crossing{best, from + best_t * (to - from), best_t};
}

Partition build_voronoi_partition(const std::vector<Vec2>& centers, const Box& bbox, std::optional<VoronoiRoles> roles,
                                  ReactantDistribution rho) {
  const int k = static_cast<int>(centers.size());
  if (k < 2) throw InvalidArgument("voronoi partition needs at least two centers");
  for (int i = 0; i < k; ++i) {
    if (!centers[static_cast<std::size_t>(i)].allFinite() || !bbox.contains(centers[static_cast<std::size_t>(i)])) {
      throw InvalidArgument("voronoi center " + std::to_string(i) + " lies outside the bounding box");
    }
    for (int j = 0; j < i; ++j) {
      if (centers[static_cast<std::size_t>(i)] == centers[static_cast<std::size_t>(j)]) {
        throw InvalidArgument("duplicate voronoi centers " + std::to_string(j) + " and " + std::to_string(i));
      }
    }
  }
  const double scale = std::max(bbox.x1_max - bbox.x1_min, bbox.x2_max - bbox.x2_min);

  std::vector<Milestone> milestones;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const Vec2& ci = centers[static_cast<std::size_t>(i)];
      const Vec2& cj = centers[static_cast<std::size_t>(j)];
      const Vec2 mid = 0.5 * (ci + cj);
      const Vec2 dir = Vec2(-(cj - ci).y(), (cj - ci).x()).normalized();
      double s_lo = -std::numeric_limits<double>::infinity();
      double s_hi = std::numeric_limits<double>::infinity();
      auto clip = [&](double alpha, double beta) {  // alpha * s <= beta
        if (alpha > 0.0) {
          s_hi = std::min(s_hi, beta / alpha);
        } else if (alpha < 0.0) {
          s_lo = std::max(s_lo, beta / alpha);
        } else if (beta < 0.0) {
          s_hi = -std::numeric_limits<double>::infinity();
        }
      };
      clip(dir.x(), bbox.x1_max - mid.x());
      clip(-dir.x(), mid.x() - bbox.x1_min);
      clip(dir.y(), bbox.x2_max - mid.y());
      clip(-dir.y(), mid.y() - bbox.x2_min);
      for (int o = 0; o < k && s_lo < s_hi; ++o) {
        if (o == i || o == j) continue;
        const Vec2& co = centers[static_cast<std::size_t>(o)];
        const Vec2 diff = co - ci;
        clip(2.0 * dir.dot(diff), co.squaredNorm() - ci.squaredNorm() - 2.0 * mid.dot(diff));
      }
      if (!(s_hi - s_lo > 1e-12 * scale)) continue;
      Milestone ms;
      ms.segments.push_back({mid + s_lo * dir, mid + s_hi * dir});
      ms.cells = {i, j};
      milestones.push_back(std::move(ms));
    }
  }
  if (milestones.size() < 2) throw InvalidArgument("voronoi partition has fewer than two edges inside the box");

  auto find_edge = [&](const std::array<int, 2>& pair, const char* role) {
    for (std::size_t e = 0; e < milestones.size(); ++e) {
      const auto& c = milestones[e].cells;
      if ((c[0] == pair[0] && c[1] == pair[1]) || (c[0] == pair[1] && c[1] == pair[0])) return static_cast<int>(e);
    }
    throw ConfigError(std::string(role) + " edge between centers " + std::to_string(pair[0]) + " and " +
                      std::to_string(pair[1]) + " does not exist");
  };
  int reactant = 0;
  int product = static_cast<int>(milestones.size()) - 1;
  if (roles) {
    reactant = find_edge(roles->reactant, "reactant");
    product = find_edge(roles->product, "product");
  }
  return Partition(std::move(milestones), reactant, product, rho, Domain::Plane);
}

CellSide parse_cell_side(std::string_view name) {
  if (name == "bottom") return CellSide::Bottom;
  if (name == "top") return CellSide::Top;
  if (name == "left") return CellSide::Left;
  if (name == "right") return CellSide::Right;
  throw ConfigError("unknown cell side '" + std::string(name) + "'");
}

int grid_edge_index(int n, bool torus, const GridEdge& edge) {
  if (edge.i < 0 || edge.i >= n || edge.j < 0 || edge.j >= n) {
    throw ConfigError("grid cell (" + std::to_string(edge.i) + ", " + std::to_string(edge.j) + ") out of range");
  }
  const int horizontal = torus ? n * n : n * (n + 1);
  auto h = [&](int i, int j) { return (torus ? (j % n) : j) * n + i; };
  auto v = [&](int i, int j) { return horizontal + (torus ? j * n + (i % n) : j * (n + 1) + i); };
  switch (edge.side) {
    case CellSide::Bottom: return h(edge.i, edge.j);
    case CellSide::Top: return h(edge.i, edge.j + 1);
    case CellSide::Left: return v(edge.i, edge.j);
    case CellSide::Right: return v(edge.i + 1, edge.j);
  }
  return 0;
}

Partition build_grid_partition(int n, bool torus, std::optional<GridRoles> roles, ReactantDistribution rho) {
  if (n < 2) throw InvalidArgument("grid partition needs n >= 2");
  const double h = 1.0 / n;
  auto cell = [&](int i, int j) -> int {
    if (torus) return ((j + n) % n) * n + ((i + n) % n);
    if (i < 0 || i >= n || j < 0 || j >= n) return kNoCell;
    return j * n + i;
  };
  std::vector<Milestone> milestones;
  const int rows = torus ? n : n + 1;
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) {
      Milestone ms;
      ms.segments.push_back({Vec2(i * h, j * h), Vec2((i + 1) * h, j * h)});
      ms.cells = {cell(i, j), cell(i, j - 1)};
      milestones.push_back(std::move(ms));
    }
  }
  const int columns = torus ? n : n + 1;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < columns; ++i) {
      Milestone ms;
      ms.segments.push_back({Vec2(i * h, j * h), Vec2(i * h, (j + 1) * h)});
      ms.cells = {cell(i, j), cell(i - 1, j)};
      milestones.push_back(std::move(ms));
    }
  }
  const GridRoles r = roles.value_or(GridRoles{{n / 4, n / 4, CellSide::Bottom}, {(3 * n) / 4, (3 * n) / 4, CellSide::Top}});
  return Partition(std::move(milestones), grid_edge_index(n, torus, r.reactant), grid_edge_index(n, torus, r.product),
                   rho, torus ? Domain::Torus : Domain::Plane);
}

Partition build_level_partition(const std::vector<double>& levels, const Box& bbox, ReactantDistribution rho) {
  const int m = static_cast<int>(levels.size());
  if (m < 2) throw InvalidArgument("level partition needs at least two levels");
  for (int i = 1; i < m; ++i) {
    if (!(levels[static_cast<std::size_t>(i)] > levels[static_cast<std::size_t>(i - 1)])) {
      throw InvalidArgument("levels must be strictly ascending");
    }
  }
  if (!(bbox.x2_max > bbox.x2_min)) throw InvalidArgument("level partition: empty x2 range");
  std::vector<Milestone> milestones;
  for (int i = 0; i < m; ++i) {
    const double x1 = levels[static_cast<std::size_t>(i)];
    Milestone ms;
    ms.segments.push_back({Vec2(x1, bbox.x2_min), Vec2(x1, bbox.x2_max)});
    // Region r lies between levels r-1 and r; regions 0 and m are outside.
    ms.cells = {i == 0 ? kNoCell : i, i + 1 == m ? kNoCell : i + 1};
    milestones.push_back(std::move(ms));
  }
  return Partition(std::move(milestones), 0, m - 1, rho, Domain::Plane);
}

}  // namespace exm
