#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <utility>
#include <vector>

#include "gelfand/delaunay.hpp"
#include "gelfand/error.hpp"
#include "gelfand/geometry.hpp"

namespace gelfand {

/// Extra graded refinement around a point that carries no singular weight.
/// Rings of `ring_points` vertices shrink geometrically so that elements stay
/// roughly isotropic; `levels` rings are placed. Counts are rounded up to 12,
/// 16 or at least 32, the values whose taper keeps the angle bound.
struct RefinePoint {
  Point location;
  int levels = 4;
  int ring_points = 12;
};

struct MeshOptions {
  std::vector<RefinePoint> refine;
  int ring_points = 12;
  int smoothing_passes = 3;
  double min_angle_deg = 20.0;
};

/// Conforming P1 triangulation. Every singular point is a vertex and the
/// mesh is geometrically graded toward it.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<char> on_boundary;
  std::vector<int> boundary_loop;   // ordered CCW boundary vertex indices
  std::vector<double> grading;      // mean incident edge length / h_max
  std::vector<int> singular_vertex;  // one entry per singularity, same order
  double h_max = 0.0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const {
    const auto& v = triangles[t];
    return 0.5 * geom::orient(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
  }

  double area() const {
    double a = 0.0;
    for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
    return a;
  }

  std::vector<Point> boundary_polygon() const {
    std::vector<Point> poly;
    poly.reserve(boundary_loop.size());
    for (int i : boundary_loop) poly.push_back(vertices[i]);
    return poly;
  }

  double min_angle_deg() const {
    double best = 180.0;
    for (const auto& tri : triangles) {
      for (int k = 0; k < 3; ++k) {
        const Point a = vertices[tri[(k + 1) % 3]] - vertices[tri[k]];
        const Point b = vertices[tri[(k + 2) % 3]] - vertices[tri[k]];
        const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
        best = std::min(best, std::acos(c) * 180.0 / std::numbers::pi);
      }
    }
    return best;
  }

  double triangle_diameter(int t) const {
    const auto& v = triangles[t];
    return std::max({(vertices[v[0]] - vertices[v[1]]).norm(), (vertices[v[1]] - vertices[v[2]]).norm(),
                     (vertices[v[2]] - vertices[v[0]]).norm()});
  }
};

namespace detail {

struct GradedZone {
  Point centre;
  int levels;
  double outer_radius;
  int ring_points;
  double ratio;
};

inline std::set<std::pair<int, int>> edge_set(const std::vector<delaunay::Triangle>& tris) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : tris) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return edges;
}

}  // namespace detail

/// Number of geometric grading levels used around a singularity of order alpha.
inline int supported_ring_count(int m) {
  if (m <= 12) return 12;
  if (m <= 16) return 16;
  return std::max(m, 32);
}

inline int grading_levels(double alpha) { return static_cast<int>(std::ceil(4.0 + 2.0 * alpha)); }

inline Mesh build_mesh(const DomainSpec& domain, const SingularitySpec& sing, double h_max,
                       const MeshOptions& options = {}) {
  if (!(h_max > 0.0) || !std::isfinite(h_max)) throw MeshFailure("h_max must be positive");
  validate(domain, sing);

  std::vector<Point> boundary = sample_boundary(domain, h_max);
  for (const auto& s : sing.points) {
    if (!geom::inside_polygon(s.location, boundary) ||
        geom::distance_to_polyline(s.location, boundary) < 1e-3 * h_max) {
      throw InvalidSingularity("singular point is not interior to the discretised boundary");
    }
  }

  std::vector<detail::GradedZone> zones;
  for (const auto& s : sing.points) {
    zones.push_back({s.location, grading_levels(s.alpha), 2.0 * h_max, supported_ring_count(options.ring_points), 0.5});
  }
  for (const auto& r : options.refine) {
    if (!geom::inside_polygon(r.location, boundary)) throw MeshFailure("refinement point outside domain");
    const int m = supported_ring_count(std::max(options.ring_points, r.ring_points));
    const double ratio = std::max(0.5, 1.0 - 2.0 * std::numbers::pi / m);
    zones.push_back({r.location, std::max(1, r.levels), m * h_max / (2.0 * std::numbers::pi), m, ratio});
  }

  // Anchors and graded rings.
  std::vector<Point> fixed;
  for (const auto& z : zones) fixed.push_back(z.centre);
  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    const auto& z = zones[zi];
    // Ring radii and point counts; dense rings taper to 12 points near the
    // centre so the innermost fan keeps reasonable angles.
    std::vector<std::pair<double, int>> rings;
    double radius = z.outer_radius;
    for (int k = 0; k < z.levels; ++k, radius *= z.ratio) rings.emplace_back(radius, z.ring_points);
    for (int m = z.ring_points - 8; m >= 12 && z.ring_points > 12; m -= 8) {
      radius *= std::max(0.5, 1.0 - 2.0 * std::numbers::pi / m);
      rings.emplace_back(radius, m);
    }
    for (std::size_t k = 0; k < rings.size(); ++k) {
      const auto [r, m] = rings[k];
      const double spacing = 2.0 * std::numbers::pi * r / m;
      const double offset = (k % 2) * std::numbers::pi / m;
      for (int i = 0; i < m; ++i) {
        const double t = offset + 2.0 * std::numbers::pi * i / m;
        const Point q = z.centre + r * Point(std::cos(t), std::sin(t));
        if (!geom::inside_polygon(q, boundary)) continue;
        if (geom::distance_to_polyline(q, boundary) < 0.45 * spacing) continue;
        bool own = true;
        for (std::size_t zj = 0; zj < zones.size(); ++zj) {
          if (zj != zi && (q - zones[zj].centre).norm() < r + 0.25 * spacing) own = false;
        }
        if (own) fixed.push_back(q);
      }
    }
  }

  // Hexagonal background lattice.
  std::vector<Point> lattice;
  {
    Point lo = boundary[0];
    Point hi = boundary[0];
    for (const auto& p : boundary) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double dy = h_max * std::sqrt(3.0) / 2.0;
    int row = 0;
    for (double y = lo.y() + 0.5 * dy; y < hi.y(); y += dy, ++row) {
      for (double x = lo.x() + ((row % 2) ? 0.5 * h_max : 0.0); x < hi.x(); x += h_max) {
        const Point q(x, y);
        if (!geom::inside_polygon(q, boundary)) continue;
        if (geom::distance_to_polyline(q, boundary) < 0.6 * h_max) continue;
        bool clear = true;
        for (const auto& z : zones) {
          if ((q - z.centre).norm() < z.outer_radius + 0.55 * h_max) clear = false;
        }
        if (clear) lattice.push_back(q);
      }
    }
  }

  // Point order: boundary, anchors, rings, lattice.
  auto assemble = [&] {
    std::vector<Point> pts = boundary;
    pts.insert(pts.end(), fixed.begin(), fixed.end());
    pts.insert(pts.end(), lattice.begin(), lattice.end());
    return pts;
  };

  // Delaunay triangulation restricted to the domain; boundary segments
  // missing from it are split at their midpoints until all are present.
  auto triangulate_domain = [&](const std::vector<Point>& pts, std::vector<int>& missing) {
    std::vector<delaunay::Triangle> kept;
    for (const auto& t : delaunay::triangulate(pts)) {
      const Point c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
      if (geom::inside_polygon(c, boundary)) kept.push_back(t);
    }
    const auto edges = detail::edge_set(kept);
    const int nb = static_cast<int>(boundary.size());
    missing.clear();
    for (int i = 0; i < nb; ++i) {
      const int j = (i + 1) % nb;
      if (!edges.count({std::min(i, j), std::max(i, j)})) missing.push_back(i);
    }
    return kept;
  };

  std::vector<Point> pts;
  std::vector<delaunay::Triangle> tris;
  std::vector<int> missing;
  for (int pass = 0, recoveries = 0;;) {
    pts = assemble();
    tris = triangulate_domain(pts, missing);
    if (!missing.empty()) {
      if (++recoveries > 12) throw MeshFailure("could not recover the boundary in the triangulation");
      std::vector<Point> refined;
      std::size_t next = 0;
      for (std::size_t i = 0; i < boundary.size(); ++i) {
        refined.push_back(boundary[i]);
        if (next < missing.size() && missing[next] == static_cast<int>(i)) {
          refined.push_back(0.5 * (boundary[i] + boundary[(i + 1) % boundary.size()]));
          ++next;
        }
      }
      boundary = std::move(refined);
      std::erase_if(lattice, [&](const Point& q) { return geom::distance_to_polyline(q, boundary) < 0.4 * h_max; });
      continue;
    }
    if (pass++ >= options.smoothing_passes) break;

    // Laplacian smoothing of the free lattice points.
    std::vector<Point> sum(pts.size(), Point::Zero());
    std::vector<int> count(pts.size(), 0);
    for (const auto& [a, b] : detail::edge_set(tris)) {
      sum[a] += pts[b];
      sum[b] += pts[a];
      ++count[a];
      ++count[b];
    }
    const std::size_t first_lattice = boundary.size() + fixed.size();
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      const std::size_t gi = first_lattice + i;
      if (count[gi] == 0) continue;
      const Point q = sum[gi] / count[gi];
      if (!geom::inside_polygon(q, boundary) || geom::distance_to_polyline(q, boundary) < 0.45 * h_max) continue;
      bool clear = true;
      for (const auto& z : zones) {
        if ((q - z.centre).norm() < z.outer_radius + 0.45 * h_max) clear = false;
      }
      if (clear) lattice[i] = q;
    }
  }

  Mesh mesh;
  mesh.h_max = h_max;
  // Compact: drop points not referenced by any kept triangle.
  std::vector<int> remap(pts.size(), -1);
  for (const auto& t : tris) {
    for (int v : t) remap[v] = 0;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (remap[i] == 0) {
      remap[i] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(pts[i]);
    }
  }
  for (auto t : tris) {
    for (int& v : t) v = remap[v];
    mesh.triangles.push_back(t);
  }
  mesh.on_boundary.assign(mesh.vertices.size(), 0);
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    if (remap[i] < 0) throw MeshFailure("boundary point dropped from the triangulation");
    mesh.boundary_loop.push_back(remap[i]);
    mesh.on_boundary[remap[i]] = 1;
  }
  for (std::size_t j = 0; j < sing.size(); ++j) {
    const int v = remap[boundary.size() + j];
    if (v < 0) throw MeshFailure("singular point dropped from the triangulation");
    mesh.singular_vertex.push_back(v);
  }

  // Validation.
  const auto edges = detail::edge_set(mesh.triangles);
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t open_edges = 0;
  for (const auto& [e, c] : uses) {
    if (c > 2) throw MeshFailure("non-manifold edge in triangulation");
    if (c == 1) {
      ++open_edges;
      if (!mesh.on_boundary[e.first] || !mesh.on_boundary[e.second]) throw MeshFailure("hole in triangulation");
    }
  }
  if (open_edges != mesh.boundary_loop.size()) throw MeshFailure("boundary does not close");
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.triangle_area(t) > 0.0)) throw MeshFailure("inverted or degenerate triangle");
  }
  const double poly_area = std::abs(geom::signed_area(mesh.boundary_polygon()));
  if (std::abs(mesh.area() - poly_area) > 1e-10 * poly_area) throw MeshFailure("triangulation does not tile the domain");
  if (mesh.min_angle_deg() < options.min_angle_deg) throw MeshFailure("minimum angle below threshold");

  mesh.grading.assign(mesh.vertices.size(), 0.0);
  std::vector<int> deg(mesh.vertices.size(), 0);
  for (const auto& [a, b] : edges) {
    const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
    mesh.grading[a] += len;
    mesh.grading[b] += len;
    ++deg[a];
    ++deg[b];
  }
  for (std::size_t i = 0; i < mesh.grading.size(); ++i) mesh.grading[i] /= std::max(1, deg[i]) * h_max;
  return mesh;
}

/// Plain-text export: "<n>\n<i> <x> <y> <boundary>" lines, then
/// "<m>\n<t> <a> <b> <c>" element lines.
inline void write_mesh_text(const Mesh& mesh, std::ostream& nodes, std::ostream& elements) {
  nodes.precision(17);
  nodes << mesh.num_vertices() << '\n';
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    nodes << i << ' ' << mesh.vertices[i].x() << ' ' << mesh.vertices[i].y() << ' '
          << static_cast<int>(mesh.on_boundary[i]) << '\n';
  }
  elements << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles[t];
    elements << t << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  }
}

}  // namespace gelfand
