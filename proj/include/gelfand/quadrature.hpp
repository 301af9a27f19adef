#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gelfand/weight.hpp"

namespace gelfand {

/// Nodes and weights on [0, 1].
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Jacobi rule for ∫_0^1 s^β f(s) ds (Golub-Welsch), exact for
/// polynomial f of degree ≤ 2n - 1.
inline Rule1D gauss_jacobi(int n, double beta) {
  const double a = 0.0;
  const double b = beta;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + a + b;
    jac(k, k) = k == 0 ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (k + 1 < n) {
      const double m = k + 1.0;
      const double t = 2.0 * m + a + b;
      const double off = std::sqrt(4.0 * m * (m + a) * (m + b) * (m + a + b) / (t * t * (t + 1.0) * (t - 1.0)));
      jac(k, k + 1) = off;
      jac(k + 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
  Rule1D r;
  for (int k = 0; k < n; ++k) {
    const double x = eig.eigenvalues()[k];
    const double v = eig.eigenvectors()(0, k);
    r.nodes.push_back(0.5 * (1.0 + x));
    r.weights.push_back(mu0 * v * v * std::pow(2.0, -b - 1.0));
  }
  return r;
}

inline Rule1D gauss_legendre(int n) { return gauss_jacobi(n, 0.0); }

/// Rule on the reference triangle in barycentric form; weights sum to 1.
struct TriangleRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
  int degree = 0;
};

/// Symmetric 6-point rule, exact for degree 4.
inline const TriangleRule& symmetric_rule_degree4() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.degree = 4;
    const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
    for (auto [a, b, w] : {std::tuple{a1, b1, w1}, std::tuple{a2, b2, w2}}) {
      r.bary.push_back({b, a, a});
      r.bary.push_back({a, b, a});
      r.bary.push_back({a, a, b});
      for (int k = 0; k < 3; ++k) r.weights.push_back(w);
    }
    return r;
  }();
  return rule;
}

/// Collapsed (Duffy) tensor rule with apex at local vertex 0, exact for
/// polynomials of degree ≤ 2n - 1.
inline TriangleRule collapsed_rule(int n) {
  const Rule1D rs = gauss_jacobi(n, 1.0);
  const Rule1D rt = gauss_legendre(n);
  TriangleRule r;
  r.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double s = rs.nodes[i];
      const double t = rt.nodes[k];
      r.bary.push_back({1.0 - s, s * (1.0 - t), s * t});
      r.weights.push_back(2.0 * rs.weights[i] * rt.weights[k]);
    }
  }
  return r;
}

/// One integration point. `w_plain` integrates smooth integrands, `w_weight`
/// integrates h times smooth integrands; `w` is the weight for h_n = h + floor.
struct QuadraturePoint {
  int tri;
  std::array<double, 3> bary;
  Point x;
  double w_plain;
  double w_weight;
  double w;
  double h;  // h_n at the point
};

/// Integration points over a mesh for a given singular weight. Triangles
/// incident to a singular vertex carry two point sets: a Gauss-Jacobi polar
/// rule resolving |x - p|^{2α} exactly, and a plain collapsed rule.
struct Quadrature {
  std::vector<QuadraturePoint> points;
  std::vector<int> offsets;  // points of triangle t: [offsets[t], offsets[t+1])
  std::vector<char> polar;   // triangle uses the polar rule
  double floor = 0.0;

  int size() const { return static_cast<int>(points.size()); }

  /// Barycentric interpolation of a P1 vertex field at every point.
  Vector interpolate(const Mesh& mesh, const Vector& field) const {
    Vector out(size());
    for (int q = 0; q < size(); ++q) {
      const auto& p = points[q];
      const auto& v = mesh.triangles[p.tri];
      out[q] = p.bary[0] * field[v[0]] + p.bary[1] * field[v[1]] + p.bary[2] * field[v[2]];
    }
    return out;
  }

  double integrate_weighted(const Vector& f) const {
    double s = 0.0;
    for (int q = 0; q < size(); ++q) s += points[q].w * f[q];
    return s;
  }

  double integrate_plain(const Vector& f) const {
    double s = 0.0;
    for (int q = 0; q < size(); ++q) s += points[q].w_plain * f[q];
    return s;
  }

  double weighted_mass() const {
    double s = 0.0;
    for (const auto& p : points) s += p.w;
    return s;
  }
};

struct QuadratureOptions {
  int polar_order = 8;
  int near_order = 8;
  double near_factor = 3.0;  // near-field if a centre is within this many diameters
};

inline Quadrature build_quadrature(const Mesh& mesh, const WeightField& weight, const QuadratureOptions& opt = {}) {
  Quadrature quad;
  quad.floor = weight.floor;
  quad.offsets.reserve(mesh.triangles.size() + 1);
  quad.polar.assign(mesh.triangles.size(), 0);
  const TriangleRule& far = symmetric_rule_degree4();
  const TriangleRule near = collapsed_rule(opt.near_order);
  const TriangleRule plain_polar = collapsed_rule(opt.polar_order);
  const Rule1D rt = gauss_legendre(opt.polar_order);

  auto push = [&](int t, std::array<double, 3> bary, double wp, double ww, double h) {
    const auto& v = mesh.triangles[t];
    const Point x = bary[0] * mesh.vertices[v[0]] + bary[1] * mesh.vertices[v[1]] + bary[2] * mesh.vertices[v[2]];
    quad.points.push_back({t, bary, x, wp, ww, ww + weight.floor * wp, h + weight.floor});
  };

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    quad.offsets.push_back(quad.size());
    const auto& v = mesh.triangles[t];
    const double area = mesh.triangle_area(t);

    int apex_local = -1;
    int centre = -1;
    for (std::size_t j = 0; j < weight.singular_vertex.size(); ++j) {
      for (int k = 0; k < 3; ++k) {
        if (v[k] == weight.singular_vertex[j]) {
          apex_local = k;
          centre = static_cast<int>(j);
        }
      }
    }

    if (apex_local >= 0) {
      quad.polar[t] = 1;
      // Rotate so the singular vertex is local vertex 0.
      const int i0 = apex_local, i1 = (apex_local + 1) % 3, i2 = (apex_local + 2) % 3;
      auto to_bary = [&](double l0, double l1, double l2) {
        std::array<double, 3> b{};
        b[i0] = l0;
        b[i1] = l1;
        b[i2] = l2;
        return b;
      };
      const Point p = mesh.vertices[v[i0]];
      const Point e1 = mesh.vertices[v[i1]] - p;
      const Point e2 = mesh.vertices[v[i2]] - p;
      const double expo = weight.exponents[centre];
      const Rule1D rs = gauss_jacobi(opt.polar_order, expo + 1.0);
      for (std::size_t i = 0; i < rs.nodes.size(); ++i) {
        for (std::size_t k = 0; k < rt.nodes.size(); ++k) {
          const double s = rs.nodes[i];
          const double tt = rt.nodes[k];
          const auto bary = to_bary(1.0 - s, s * (1.0 - tt), s * tt);
          const Point dir = e1 + tt * (e2 - e1);
          const Point x = p + s * dir;
          const double ls = bary[0] * weight.log_smooth[v[0]] + bary[1] * weight.log_smooth[v[1]] +
                            bary[2] * weight.log_smooth[v[2]];
          const double regular = std::pow(dir.norm(), expo) * weight.singular_factor(x, centre) * std::exp(ls);
          const double ww = 2.0 * area * rs.weights[i] * rt.weights[k] * regular;
          push(t, bary, 0.0, ww, std::pow(s, expo) * regular);
        }
      }
      for (std::size_t q = 0; q < plain_polar.bary.size(); ++q) {
        const auto& lb = plain_polar.bary[q];
        const auto bary = to_bary(lb[0], lb[1], lb[2]);
        push(t, bary, area * plain_polar.weights[q], 0.0, weight.evaluate(mesh, t, bary));
      }
      continue;
    }

    bool is_near = false;
    if (weight.is_singular()) {
      const Point c = (mesh.vertices[v[0]] + mesh.vertices[v[1]] + mesh.vertices[v[2]]) / 3.0;
      const double diam = mesh.triangle_diameter(t);
      for (const auto& pc : weight.centres) is_near = is_near || (c - pc).norm() < opt.near_factor * diam;
    }
    const TriangleRule& rule = is_near ? near : far;
    for (std::size_t q = 0; q < rule.bary.size(); ++q) {
      const double h = weight.evaluate(mesh, t, rule.bary[q]);
      const double wp = area * rule.weights[q];
      push(t, rule.bary[q], wp, wp * h, h);
    }
  }
  quad.offsets.push_back(quad.size());
  return quad;
}

/// ∫ w f φ_i φ_j with f given at the quadrature points (f = 1 if empty).
inline SparseMatrix assemble_weighted_mass(const Mesh& mesh, const Quadrature& quad, const Vector& f = Vector()) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    for (int q = quad.offsets[t]; q < quad.offsets[t + 1]; ++q) {
      const auto& p = quad.points[q];
      const double c = p.w * (f.size() ? f[q] : 1.0);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) local(i, j) += c * p.bary[i] * p.bary[j];
      }
    }
    const auto& v = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(v[i], v[j], local(i, j));
    }
  }
  SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

/// Weighted mass of a weight field; rejects negative weights.
inline SparseMatrix assemble_weighted_mass(const Mesh& mesh, const WeightField& weight) {
  if (weight.values.size() != mesh.num_vertices()) throw InvalidWeight("weight field does not match the mesh");
  for (int i = 0; i < weight.values.size(); ++i) {
    if (weight.values[i] < 0.0 || !std::isfinite(weight.values[i])) throw InvalidWeight("negative weight detected");
  }
  const Quadrature quad = build_quadrature(mesh, weight);
  for (const auto& p : quad.points) {
    if (p.w < 0.0 || !std::isfinite(p.w)) throw InvalidWeight("negative weight detected");
  }
  return assemble_weighted_mass(mesh, quad);
}

/// ∫ w f φ_i with f given at the quadrature points.
inline Vector assemble_weighted_load(const Mesh& mesh, const Quadrature& quad, const Vector& f) {
  Vector b = Vector::Zero(mesh.num_vertices());
  for (int q = 0; q < quad.size(); ++q) {
    const auto& p = quad.points[q];
    const auto& v = mesh.triangles[p.tri];
    const double c = p.w * f[q];
    for (int i = 0; i < 3; ++i) b[v[i]] += c * p.bary[i];
  }
  return b;
}

}  // namespace gelfand
