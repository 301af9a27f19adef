#pragma once

#include <memory>
#include <vector>

#include "gelfand/quadrature.hpp"

namespace gelfand {

/// Everything fixed by (Ω, α) and the discretisation: mesh, factorised
/// Dirichlet Laplacian, weight and quadrature. Immutable once built.
struct Problem {
  DomainSpec domain;
  SingularitySpec singularities;
  Mesh mesh;
  SparseMatrix stiffness;  // all vertices
  std::shared_ptr<const DirichletSolver> solver;
  WeightField weight;
  Quadrature quad;
  SparseMatrix interp;           // quadrature points × vertices
  SparseMatrix interp_interior;  // quadrature points × interior vertices
  Vector w;                      // effective weights (h_n folded in)

  const DofMap& dofs() const { return solver->dofs(); }
  const SparseMatrix& a_interior() const { return solver->interior_matrix(); }
  int num_interior() const { return dofs().num_interior(); }

  /// ∫ h_n over Ω.
  double weight_mass() const { return w.sum(); }

  /// Same discretisation with the weight replaced by h + 1/n.
  Problem approximant(double n) const {
    Problem p = *this;
    p.weight = weight.approximant(n);
    p.rebuild_quadrature();
    return p;
  }

  void rebuild_quadrature(const QuadratureOptions& opt = {}) {
    quad = build_quadrature(mesh, weight, opt);
    std::vector<Triplet> full;
    std::vector<Triplet> interior;
    full.reserve(3 * quad.size());
    interior.reserve(3 * quad.size());
    w.resize(quad.size());
    for (int q = 0; q < quad.size(); ++q) {
      const auto& p = quad.points[q];
      w[q] = p.w;
      const auto& v = mesh.triangles[p.tri];
      for (int k = 0; k < 3; ++k) {
        full.emplace_back(q, v[k], p.bary[k]);
        const int i = dofs().interior_index(v[k]);
        if (i >= 0) interior.emplace_back(q, i, p.bary[k]);
      }
    }
    interp.resize(quad.size(), mesh.num_vertices());
    interp.setFromTriplets(full.begin(), full.end());
    interp_interior.resize(quad.size(), num_interior());
    interp_interior.setFromTriplets(interior.begin(), interior.end());
  }

  /// Σ_q c_q φ_i φ_j over interior vertices.
  SparseMatrix interior_mass(const Vector& c) const {
    return SparseMatrix(interp_interior.transpose() * c.asDiagonal() * interp_interior);
  }

  /// Σ_q c_q φ_i φ_j over all vertices.
  SparseMatrix full_mass(const Vector& c) const { return SparseMatrix(interp.transpose() * c.asDiagonal() * interp); }
};

inline Problem make_problem(Mesh mesh, const DomainSpec& domain, const SingularitySpec& sing,
                            const QuadratureOptions& qopt = {}) {
  Problem p;
  p.domain = domain;
  p.singularities = sing;
  p.mesh = std::move(mesh);
  p.stiffness = assemble_stiffness(p.mesh);
  p.solver = std::make_shared<const DirichletSolver>(p.mesh, p.stiffness);
  p.weight = build_weight(p.mesh, sing, *p.solver);
  p.rebuild_quadrature(qopt);
  return p;
}

inline Problem make_problem(const DomainSpec& domain, const SingularitySpec& sing, double h_max,
                            const MeshOptions& mopt = {}, const QuadratureOptions& qopt = {}) {
  return make_problem(build_mesh(domain, sing, h_max, mopt), domain, sing, qopt);
}

}  // namespace gelfand
