#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "gelfand/error.hpp"
#include "gelfand/geometry.hpp"

namespace gelfand::delaunay {

using Triangle = std::array<int, 3>;

namespace detail {

struct Face {
  std::array<int, 3> v;
  std::array<int, 3> nb;  // nb[i] lies across the edge opposite v[i]
  bool alive = true;
};

inline long double orient(const Point& a, const Point& b, const Point& c) {
  return (static_cast<long double>(b.x()) - a.x()) * (static_cast<long double>(c.y()) - a.y()) -
         (static_cast<long double>(b.y()) - a.y()) * (static_cast<long double>(c.x()) - a.x());
}

// Positive when d lies strictly inside the circumcircle of the CCW triangle abc.
inline long double incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const long double adx = static_cast<long double>(a.x()) - d.x();
  const long double ady = static_cast<long double>(a.y()) - d.y();
  const long double bdx = static_cast<long double>(b.x()) - d.x();
  const long double bdy = static_cast<long double>(b.y()) - d.y();
  const long double cdx = static_cast<long double>(c.x()) - d.x();
  const long double cdy = static_cast<long double>(c.y()) - d.y();
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

}  // namespace detail

/// Bowyer-Watson triangulation of a point cloud. Returns CCW triangles
/// covering the convex hull of `points`.
inline std::vector<Triangle> triangulate(const std::vector<Point>& input) {
  using detail::Face;
  const int n = static_cast<int>(input.size());
  if (n < 3) throw MeshFailure("triangulation needs at least three points");

  Point lo = input[0];
  Point hi = input[0];
  for (const auto& p : input) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Point centre = 0.5 * (lo + hi);
  const double extent = std::max((hi - lo).maxCoeff(), 1e-12);

  std::vector<Point> pts = input;
  pts.emplace_back(centre.x() - 40.0 * extent, centre.y() - 30.0 * extent);
  pts.emplace_back(centre.x() + 40.0 * extent, centre.y() - 30.0 * extent);
  pts.emplace_back(centre.x(), centre.y() + 40.0 * extent);

  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(8 * n + 16));
  faces.push_back(Face{{n, n + 1, n + 2}, {-1, -1, -1}, true});

  // Snake order over a coarse grid keeps consecutive insertions local.
  const int cells = std::max(1, static_cast<int>(std::sqrt(n / 4.0)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](int i) {
    const int cy = std::min(cells - 1, static_cast<int>((input[i].y() - lo.y()) / extent * cells));
    return std::pair<int, double>(cy, (cy % 2 == 0) ? input[i].x() : -input[i].x());
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });

  int last = 0;
  std::vector<int> cavity;
  std::vector<char> in_cavity;
  std::vector<int> stack;

  for (int pi : order) {
    const Point& p = pts[pi];

    // Visibility walk to a face containing p.
    int t = last;
    if (!faces[t].alive) {
      for (t = static_cast<int>(faces.size()) - 1; t >= 0 && !faces[t].alive; --t) {
      }
    }
    for (int steps = 0;; ++steps) {
      if (steps > 4 * static_cast<int>(faces.size()) + 100) throw MeshFailure("point location failed");
      const Face& f = faces[t];
      int next = -1;
      for (int i = 0; i < 3; ++i) {
        const int a = f.v[(i + 1) % 3];
        const int b = f.v[(i + 2) % 3];
        if (detail::orient(pts[a], pts[b], p) < 0.0L) {
          next = f.nb[i];
          break;
        }
      }
      if (next < 0) break;
      t = next;
    }

    // Cavity of faces whose circumcircle strictly contains p.
    if (in_cavity.size() < faces.size()) in_cavity.resize(faces.size() * 2, 0);
    cavity.clear();
    stack.assign(1, t);
    in_cavity[t] = 1;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      cavity.push_back(c);
      for (int i = 0; i < 3; ++i) {
        const int nb = faces[c].nb[i];
        if (nb < 0 || in_cavity[nb]) continue;
        const Face& g = faces[nb];
        if (detail::incircle(pts[g.v[0]], pts[g.v[1]], pts[g.v[2]], p) > 0.0L) {
          in_cavity[nb] = 1;
          stack.push_back(nb);
        }
      }
    }

    // Re-triangulate the cavity as a fan around p.
    struct NewFace {
      int id, a, b;
    };
    std::vector<NewFace> created;
    for (int c : cavity) {
      for (int i = 0; i < 3; ++i) {
        const int nb = faces[c].nb[i];
        if (nb >= 0 && in_cavity[nb]) continue;
        const int a = faces[c].v[(i + 1) % 3];
        const int b = faces[c].v[(i + 2) % 3];
        if (detail::orient(pts[a], pts[b], p) <= 0.0L) {
          throw MeshFailure("degenerate cavity during triangulation");
        }
        const int id = static_cast<int>(faces.size());
        faces.push_back(Face{{a, b, pi}, {-1, -1, nb}, true});
        if (nb >= 0) {
          for (int k = 0; k < 3; ++k) {
            if (faces[nb].nb[k] == c) faces[nb].nb[k] = id;
          }
        }
        created.push_back({id, a, b});
      }
    }
    for (const auto& f : created) {
      for (const auto& g : created) {
        if (g.a == f.b) faces[f.id].nb[0] = g.id;  // edge (b, p)
        if (g.b == f.a) faces[f.id].nb[1] = g.id;  // edge (p, a)
      }
    }
    for (int c : cavity) {
      faces[c].alive = false;
      in_cavity[c] = 0;
    }
    last = created.back().id;
  }

  std::vector<Triangle> out;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    if (f.v[0] >= n || f.v[1] >= n || f.v[2] >= n) continue;
    out.push_back(f.v);
  }
  return out;
}

}  // namespace gelfand::delaunay
