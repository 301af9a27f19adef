#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gelfand/error.hpp"

namespace gelfand {

using Point = Eigen::Vector2d;

struct UnitDisk {};

struct Ellipse {
  double a = 1.0;  // semi-axis along x
  double b = 1.0;  // semi-axis along y
};

struct Polygon {
  std::vector<Point> vertices;
};

/// Simply connected planar domain. The boundary is sampled into a closed
/// polyline whose spacing follows the target element size.
struct DomainSpec {
  std::variant<UnitDisk, Ellipse, Polygon> shape = UnitDisk{};
  /// Multiplies the boundary sampling density (1 = spacing equal to h_max).
  double boundary_refinement = 1.0;
};

struct Singularity {
  Point location;
  double alpha = 0.0;
};

struct SingularitySpec {
  std::vector<Singularity> points;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

namespace geom {

inline double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double orient(const Point& a, const Point& b, const Point& c) { return cross(b - a, c - a); }

inline double signed_area(const std::vector<Point>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    s += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * s;
}

inline double segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double distance_to_polyline(const Point& p, const std::vector<Point>& poly) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    d = std::min(d, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  }
  return d;
}

/// Even-odd rule; points on the boundary are classified arbitrarily.
inline bool inside_polygon(const Point& p, const std::vector<Point>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

inline bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

inline bool is_simple(const std::vector<Point>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

}  // namespace geom

/// Closed, counter-clockwise boundary polyline with spacing close to `h`.
inline std::vector<Point> sample_boundary(const DomainSpec& domain, double h) {
  if (!(h > 0.0)) throw InvalidDomain("boundary spacing must be positive");
  const double spacing = h / std::max(domain.boundary_refinement, 1e-6);
  std::vector<Point> out;

  if (std::holds_alternative<UnitDisk>(domain.shape)) {
    const int n = std::max(12, static_cast<int>(std::ceil(2.0 * std::numbers::pi / spacing)));
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * std::numbers::pi * k / n;
      out.emplace_back(std::cos(t), std::sin(t));
    }
  } else if (const auto* e = std::get_if<Ellipse>(&domain.shape)) {
    if (!(e->a > 0.0) || !(e->b > 0.0)) throw InvalidDomain("ellipse semi-axes must be positive");
    // Equal arc-length parametrisation from a fine cumulative table.
    const int fine = 20000;
    std::vector<double> arc(fine + 1, 0.0);
    for (int k = 1; k <= fine; ++k) {
      const double t0 = 2.0 * std::numbers::pi * (k - 1) / fine;
      const double t1 = 2.0 * std::numbers::pi * k / fine;
      const Point p0(e->a * std::cos(t0), e->b * std::sin(t0));
      const Point p1(e->a * std::cos(t1), e->b * std::sin(t1));
      arc[k] = arc[k - 1] + (p1 - p0).norm();
    }
    const double perimeter = arc.back();
    const int n = std::max(12, static_cast<int>(std::ceil(perimeter / spacing)));
    int idx = 0;
    for (int k = 0; k < n; ++k) {
      const double target = perimeter * k / n;
      while (idx < fine && arc[idx + 1] < target) ++idx;
      const double frac = (target - arc[idx]) / (arc[idx + 1] - arc[idx]);
      const double t = 2.0 * std::numbers::pi * (idx + frac) / fine;
      out.emplace_back(e->a * std::cos(t), e->b * std::sin(t));
    }
  } else {
    auto verts = std::get<Polygon>(domain.shape).vertices;
    if (verts.size() < 3) throw InvalidDomain("polygon needs at least three vertices");
    const double area = geom::signed_area(verts);
    if (std::abs(area) < 1e-14) throw InvalidDomain("polygon has zero area");
    if (area < 0.0) std::reverse(verts.begin(), verts.end());
    if (!geom::is_simple(verts)) throw InvalidDomain("polygon boundary self-intersects");
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const Point& a = verts[i];
      const Point& b = verts[(i + 1) % verts.size()];
      const int m = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
      for (int k = 0; k < m; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / m));
    }
  }
  return out;
}

/// Membership test against the exact (not sampled) boundary.
inline bool strictly_inside(const DomainSpec& domain, const Point& p) {
  if (std::holds_alternative<UnitDisk>(domain.shape)) return p.squaredNorm() < 1.0;
  if (const auto* e = std::get_if<Ellipse>(&domain.shape)) {
    const double x = p.x() / e->a;
    const double y = p.y() / e->b;
    return x * x + y * y < 1.0;
  }
  const auto& verts = std::get<Polygon>(domain.shape).vertices;
  return geom::inside_polygon(p, verts) && geom::distance_to_polyline(p, verts) > 0.0;
}

inline double exact_area(const DomainSpec& domain) {
  if (std::holds_alternative<UnitDisk>(domain.shape)) return std::numbers::pi;
  if (const auto* e = std::get_if<Ellipse>(&domain.shape)) return std::numbers::pi * e->a * e->b;
  return std::abs(geom::signed_area(std::get<Polygon>(domain.shape).vertices));
}

inline void validate(const DomainSpec& domain, const SingularitySpec& sing) {
  for (std::size_t j = 0; j < sing.size(); ++j) {
    const auto& s = sing.points[j];
    if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) {
      throw InvalidSingularity("singularity order must be a positive real");
    }
    if (!s.location.allFinite() || !strictly_inside(domain, s.location)) {
      throw InvalidSingularity("singular point lies on or outside the boundary");
    }
    for (std::size_t k = 0; k < j; ++k) {
      if ((sing.points[k].location - s.location).norm() < 1e-12) {
        throw InvalidSingularity("singular points must be pairwise distinct");
      }
    }
  }
}

}  // namespace gelfand
