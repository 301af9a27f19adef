#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gelfand/fem.hpp"

namespace gelfand {

/// Dirichlet Green function split as G_p = -(1/2π) log|x - p| + H_p, with
/// H_p the discrete harmonic extension of the logarithm's boundary trace.
struct GreenFunction {
  Point pole;
  int pole_vertex = -1;
  Vector regular;  // H_p at the vertices

  double singular_part(const Point& x) const { return -std::log((x - pole).norm()) / (2.0 * std::numbers::pi); }

  /// Vertex values; +inf at the pole.
  Vector nodal(const Mesh& mesh) const {
    Vector g(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      g[i] = i == pole_vertex ? std::numeric_limits<double>::infinity() : singular_part(mesh.vertices[i]) + regular[i];
    }
    return g;
  }
};

inline GreenFunction green_function(const Mesh& mesh, const DirichletSolver& solver, int pole_vertex) {
  if (pole_vertex < 0 || pole_vertex >= mesh.num_vertices() || mesh.on_boundary[pole_vertex]) {
    throw InvalidSingularity("Green function pole must be an interior vertex");
  }
  GreenFunction g;
  g.pole = mesh.vertices[pole_vertex];
  g.pole_vertex = pole_vertex;
  Vector trace = Vector::Zero(mesh.num_vertices());
  for (int i : mesh.boundary_loop) trace[i] = std::log((mesh.vertices[i] - g.pole).norm()) / (2.0 * std::numbers::pi);
  g.regular = solver.harmonic_extension(trace);
  return g;
}

inline GreenFunction green_function(const Mesh& mesh, const DirichletSolver& solver, const Point& p) {
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if ((mesh.vertices[i] - p).norm() < 1e-12) return green_function(mesh, solver, i);
  }
  throw InvalidSingularity("Green function pole is not a mesh vertex");
}

/// Singular weight h = Π_j |x - p_j|^{2α_j} · exp(-4π Σ_j α_j H_{p_j}(x)),
/// optionally raised by a uniform floor (the approximant h_n = h + 1/n).
struct WeightField {
  std::vector<Point> centres;
  std::vector<double> exponents;      // 2α_j
  std::vector<int> singular_vertex;
  std::vector<double> local_coefficient;  // h(x) ≈ c_j |x - p_j|^{2α_j} near p_j
  Vector log_smooth;                  // -4π Σ α_j H_j at the vertices, interpolated linearly
  Vector values;                      // h (plus floor) at the vertices
  double floor = 0.0;

  bool is_singular() const { return !centres.empty(); }

  /// Product of the local singular factors at x, skipping centre `skip`.
  double singular_factor(const Point& x, int skip = -1) const {
    double f = 1.0;
    for (std::size_t j = 0; j < centres.size(); ++j) {
      if (static_cast<int>(j) == skip) continue;
      f *= std::pow((x - centres[j]).norm(), exponents[j]);
    }
    return f;
  }

  /// h without the floor, at barycentric coordinates of a triangle.
  double evaluate(const Mesh& mesh, int tri, const std::array<double, 3>& bary) const {
    const auto& v = mesh.triangles[tri];
    const Point x = bary[0] * mesh.vertices[v[0]] + bary[1] * mesh.vertices[v[1]] + bary[2] * mesh.vertices[v[2]];
    const double ls = bary[0] * log_smooth[v[0]] + bary[1] * log_smooth[v[1]] + bary[2] * log_smooth[v[2]];
    return singular_factor(x) * std::exp(ls);
  }

  /// Copy with floor 1/n.
  WeightField approximant(double n) const {
    if (!(n > 0.0)) throw InvalidWeight("approximation index must be positive");
    WeightField w = *this;
    w.values.array() += 1.0 / n - floor;
    w.floor = 1.0 / n;
    return w;
  }

  double sup_norm() const { return values.maxCoeff(); }
};

inline WeightField build_weight(const Mesh& mesh, const SingularitySpec& sing, const std::vector<GreenFunction>& greens) {
  if (greens.size() != sing.size()) throw InvalidWeight("one Green function is required per singularity");
  WeightField w;
  w.log_smooth = Vector::Zero(mesh.num_vertices());
  for (std::size_t j = 0; j < sing.size(); ++j) {
    const double alpha = sing.points[j].alpha;
    w.centres.push_back(greens[j].pole);
    w.exponents.push_back(2.0 * alpha);
    w.singular_vertex.push_back(greens[j].pole_vertex);
    w.log_smooth -= 4.0 * std::numbers::pi * alpha * greens[j].regular;
  }
  w.values.resize(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) w.values[i] = w.singular_factor(mesh.vertices[i]) * std::exp(w.log_smooth[i]);
  for (std::size_t j = 0; j < w.centres.size(); ++j) {
    const int v = w.singular_vertex[j];
    w.values[v] = 0.0;
    w.local_coefficient.push_back(std::exp(w.log_smooth[v]) * w.singular_factor(w.centres[j], static_cast<int>(j)));
  }
  return w;
}

/// Green functions for every singularity plus the resulting weight.
inline WeightField build_weight(const Mesh& mesh, const SingularitySpec& sing, const DirichletSolver& solver) {
  std::vector<GreenFunction> greens;
  for (std::size_t j = 0; j < sing.size(); ++j) greens.push_back(green_function(mesh, solver, mesh.singular_vertex.at(j)));
  return build_weight(mesh, sing, greens);
}

}  // namespace gelfand
