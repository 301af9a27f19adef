#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "gelfand/error.hpp"
#include "gelfand/mesh.hpp"

namespace gelfand {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vector = Eigen::VectorXd;

/// Gradient-gradient matrix of the three hat functions on one triangle.
inline Eigen::Matrix3d local_stiffness(const Point& a, const Point& b, const Point& c) {
  const double twice_area = geom::orient(a, b, c);
  // Rows: (y_j - y_k, x_k - x_j) for the edge opposite each vertex.
  Eigen::Matrix<double, 3, 2> g;
  g << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
  return (g * g.transpose()) / (2.0 * twice_area);
}

/// Gradients of the three hat functions, constant on the triangle.
inline Eigen::Matrix<double, 3, 2> hat_gradients(const Point& a, const Point& b, const Point& c) {
  const double twice_area = geom::orient(a, b, c);
  Eigen::Matrix<double, 3, 2> g;
  g << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
  return g / twice_area;
}

/// P1 stiffness matrix on all vertices (no boundary condition applied).
inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const auto k = local_stiffness(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], k(i, j));
    }
  }
  SparseMatrix a(mesh.num_vertices(), mesh.num_vertices());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

/// Consistent (unweighted) P1 mass matrix, exact per triangle.
inline SparseMatrix assemble_mass(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.triangle_area(t);
    const auto& v = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(v[i], v[j], area * (i == j ? 2.0 : 1.0) / 12.0);
    }
  }
  SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

inline double max_asymmetry(const SparseMatrix& a) {
  const SparseMatrix d = a - SparseMatrix(a.transpose());
  double worst = 0.0;
  for (int k = 0; k < d.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

/// Numbering of the interior (Dirichlet-free) vertices.
class DofMap {
 public:
  explicit DofMap(const Mesh& mesh) : full_(mesh.num_vertices(), -1) {
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      if (!mesh.on_boundary[i]) {
        full_[i] = static_cast<int>(interior_.size());
        interior_.push_back(i);
      }
    }
  }

  int num_interior() const { return static_cast<int>(interior_.size()); }
  int num_vertices() const { return static_cast<int>(full_.size()); }
  int interior_index(int vertex) const { return full_[vertex]; }
  int vertex(int interior) const { return interior_[interior]; }

  Vector restrict(const Vector& full) const {
    Vector out(num_interior());
    for (int i = 0; i < num_interior(); ++i) out[i] = full[interior_[i]];
    return out;
  }

  /// Interior values to a full vertex field, zero on the boundary.
  Vector extend(const Vector& interior) const {
    Vector out = Vector::Zero(num_vertices());
    for (int i = 0; i < num_interior(); ++i) out[interior_[i]] = interior[i];
    return out;
  }

  SparseMatrix restrict(const SparseMatrix& a) const {
    std::vector<Triplet> trip;
    trip.reserve(a.nonZeros());
    for (int k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        const int r = full_[it.row()];
        const int c = full_[it.col()];
        if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
      }
    }
    SparseMatrix out(num_interior(), num_interior());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  }

 private:
  std::vector<int> full_;
  std::vector<int> interior_;
};

/// Factorised Dirichlet Laplacian, reused across many right-hand sides.
class DirichletSolver {
 public:
  DirichletSolver(const Mesh& mesh, const SparseMatrix& stiffness)
      : dofs_(mesh), interior_(dofs_.restrict(stiffness)), full_(stiffness) {
    llt_.compute(interior_);
    if (llt_.info() != Eigen::Success) throw SolverError("Dirichlet stiffness factorisation failed");
  }

  explicit DirichletSolver(const Mesh& mesh) : DirichletSolver(mesh, assemble_stiffness(mesh)) {}

  const DofMap& dofs() const { return dofs_; }
  const SparseMatrix& interior_matrix() const { return interior_; }
  const SparseMatrix& stiffness() const { return full_; }

  /// Solves A_II x = b for an interior right-hand side.
  Vector solve_interior(const Vector& rhs) const {
    Vector x = llt_.solve(rhs);
    if (llt_.info() != Eigen::Success || !x.allFinite()) throw SolverError("Dirichlet solve failed");
    const double scale = std::max(rhs.norm(), 1e-300);
    const double res = (interior_ * x - rhs).norm() / scale;
    if (res > 1e-10) {
      // One step of iterative refinement.
      x += llt_.solve(rhs - interior_ * x);
      if ((interior_ * x - rhs).norm() / scale > 1e-10) throw SolverError("Dirichlet solve residual too large");
    }
    return x;
  }

  /// Solves with zero Dirichlet data; `load` is a full vertex vector of
  /// integrals against the hat functions. Boundary entries are ignored.
  Vector solve(const Vector& load) const { return dofs_.extend(solve_interior(dofs_.restrict(load))); }

  /// Discrete harmonic extension of boundary values.
  Vector harmonic_extension(const Vector& boundary_values) const {
    Vector g = Vector::Zero(dofs_.num_vertices());
    for (int i = 0; i < dofs_.num_vertices(); ++i) {
      if (dofs_.interior_index(i) < 0) g[i] = boundary_values[i];
    }
    const Vector rhs = -dofs_.restrict(Vector(full_ * g));
    Vector out = dofs_.extend(solve_interior(rhs));
    for (int i = 0; i < dofs_.num_vertices(); ++i) {
      if (dofs_.interior_index(i) < 0) out[i] = boundary_values[i];
    }
    return out;
  }

 private:
  DofMap dofs_;
  SparseMatrix interior_;
  SparseMatrix full_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
};

/// Solves -Δu = f with u = 0 on the boundary given the full load vector.
inline Vector solve_dirichlet(const Mesh& mesh, const SparseMatrix& stiffness, const Vector& load) {
  return DirichletSolver(mesh, stiffness).solve(load);
}

inline double dirichlet_energy(const SparseMatrix& stiffness, const Vector& u) { return 0.5 * u.dot(stiffness * u); }

/// Coordinate-format dump, one "i j value" triple per line.
inline void write_coordinate(const SparseMatrix& a, std::ostream& out) {
  out.precision(17);
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  }
}

}  // namespace gelfand
