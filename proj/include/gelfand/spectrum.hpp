#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

#include "gelfand/lanczos.hpp"
#include "gelfand/mean_field.hpp"

namespace gelfand {

/// Matrices of the linearisation at a solved state on the interior vertices:
/// A, M_ρ = ∫ρφ_iφ_j and r_i = ∫ρφ_i, so that the mean-free mass is
/// M̂ = M_ρ - r rᵀ and L = A - λM̂.
struct Linearization {
  double lambda = 0.0;
  SparseMatrix a;
  SparseMatrix m_rho;
  Vector r;

  Vector mhat(const Vector& x) const { return m_rho * x - r * r.dot(x); }
  Vector apply(const Vector& x) const { return a * x - lambda * mhat(x); }
};

inline Linearization linearization(const Problem& prob, const MeanFieldState& s) {
  Linearization l;
  l.lambda = s.lambda;
  l.a = prob.a_interior();
  const Vector c = prob.w.cwiseProduct(s.rho.at_points);
  l.m_rho = prob.interior_mass(c);
  l.r = prob.interp_interior.transpose() * c;
  return l;
}

struct SpectrumReport {
  Vector sigmas;                  // ascending
  std::vector<Vector> eigenfields;  // vertex fields, zero on the boundary
  Vector means;                   // ⟨φ_j⟩ in the ρ pairing
  double tau1 = 0.0;
  double poincare = 0.0;
  double orthonormality_error = 0.0;  // max |φ̂_jᵀ M̂ φ̂_k - δ_jk|
  double mass_condition = 1.0;        // 1 / min(xᵀM̂x / xᵀM_ρx)
  double max_residual = 0.0;
};

namespace detail {

/// 1 - rᵀM_ρ⁻¹r, the smallest ratio of mean-free to full weighted mass.
inline double mean_free_floor(const Linearization& l) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(l.m_rho);
  if (ldlt.info() != Eigen::Success) throw DegenerateWeight("weighted mass is singular");
  return 1.0 - l.r.dot(ldlt.solve(l.r));
}

}  // namespace detail

/// Smallest k eigenvalues σ of (A - λM̂)φ = σM̂φ on the Dirichlet space.
inline SpectrumReport weighted_eigs(const Problem& prob, const MeanFieldState& s, int k = 10,
                                    const LanczosOptions& opt = {}) {
  const Linearization l = linearization(prob, s);
  const int n = prob.num_interior();
  SpectrumReport rep;
  const double floor = detail::mean_free_floor(l);
  if (!(floor > 1e-12)) throw DegenerateWeight("mean-free weighted mass is numerically rank deficient");
  rep.mass_condition = 1.0 / floor;

  // A φ = ν M̂ φ with ν = σ + λ; A⁻¹M̂ is self-adjoint in the A inner product.
  const DirichletSolver& solver = *prob.solver;
  auto apply = [&](const Vector& x) { return solver.solve_interior(l.mhat(x)); };
  auto inner = [&](const Vector& x) { return Vector(l.a * x); };
  const LanczosResult lr = lanczos_largest(n, k, apply, inner, {}, opt);
  rep.max_residual = lr.max_residual;

  rep.sigmas.resize(k);
  rep.means.resize(k);
  Eigen::MatrixXd phis(n, k);
  for (int j = 0; j < k; ++j) {
    if (!(lr.values[j] > 0.0)) throw DegenerateWeight("non-positive mean-free mass direction");
    rep.sigmas[j] = 1.0 / lr.values[j] - s.lambda;
    Vector phi = lr.vectors.col(j);
    phi /= std::sqrt(phi.dot(l.mhat(phi)));
    // Deterministic sign: positive weighted mean of the first nonzero entry.
    const double mean = l.r.dot(phi);
    if (mean < 0.0 || (mean == 0.0 && phi[0] < 0.0)) phi = -phi;
    phis.col(j) = phi;
    rep.means[j] = l.r.dot(phi);
    rep.eigenfields.push_back(prob.dofs().extend(phi));
  }
  for (int i = 0; i < k; ++i) {
    const Vector mi = l.mhat(phis.col(i));
    for (int j = 0; j < k; ++j) {
      rep.orthonormality_error = std::max(rep.orthonormality_error, std::abs(mi.dot(phis.col(j)) - (i == j ? 1.0 : 0.0)));
    }
  }
  return rep;
}

/// Smallest τ of (A - λM̂)φ = τM_ρφ on the Dirichlet space.
inline double standard_tau1(const Problem& prob, const MeanFieldState& s, const LanczosOptions& opt = {}) {
  const Linearization l = linearization(prob, s);
  const int n = prob.num_interior();
  // K + cM_ρ = A + (c - λ)M_ρ + λ r rᵀ is positive definite for c = max(λ, 0) + 1.
  const double c = std::max(s.lambda, 0.0) + 1.0;
  const SparseMatrix b0 = l.a + (c - s.lambda) * l.m_rho;
  Eigen::SimplicialLLT<SparseMatrix> llt(b0);
  if (llt.info() != Eigen::Success) throw SolverError("shifted operator factorisation failed");
  const Vector wr = llt.solve(l.r);
  const double denom = 1.0 + s.lambda * l.r.dot(wr);
  if (!(denom > 0.0)) throw SolverError("shifted operator is not positive definite");
  auto shifted_solve = [&](const Vector& x) {
    const Vector y = llt.solve(x);
    return Vector(y - (s.lambda * l.r.dot(y) / denom) * wr);
  };
  auto apply = [&](const Vector& x) { return shifted_solve(l.m_rho * x); };
  auto inner = [&](const Vector& x) { return Vector(l.m_rho * x); };
  const LanczosResult lr = lanczos_largest(n, 1, apply, inner, {}, opt);
  return 1.0 / lr.values[0] - c;
}

/// Smallest nonzero eigenvalue of the Neumann stiffness against the ρ-weighted
/// mass, i.e. the best constant in ∫|∇φ|² ≥ C_P ∫φ̂²ρ over H¹(Ω).
inline double poincare_constant(const Problem& prob, const MeanFieldState& s, const LanczosOptions& opt = {}) {
  const Vector c = prob.w.cwiseProduct(s.rho.at_points);
  const SparseMatrix m = prob.full_mass(c);
  const SparseMatrix shifted = prob.stiffness + m;
  Eigen::SimplicialLLT<SparseMatrix> llt(shifted);
  if (llt.info() != Eigen::Success) throw SolverError("Neumann operator factorisation failed");
  const int n = prob.mesh.num_vertices();
  // The constant is an eigenvector with eigenvalue 0; its mass is ∫ρ.
  Vector one = Vector::Ones(n);
  one /= std::sqrt(one.dot(m * one));
  auto apply = [&](const Vector& x) { return Vector(llt.solve(m * x)); };
  auto inner = [&](const Vector& x) { return Vector(m * x); };
  const LanczosResult lr = lanczos_largest(n, 1, apply, inner, {one}, opt);
  return 1.0 / lr.values[0] - 1.0;
}

struct ModeCoefficients {
  Vector a;
  Vector b;
  double max_relation_error = 0.0;  // max_j |σ_j b_j - a_j| / max(|a_j|, tiny)
};

/// a_j = ∫ψ̂φ̂_jρ and b_j = ∫η̂φ̂_jρ.
inline ModeCoefficients expand_modes(const Problem& prob, const MeanFieldState& s, const Vector& eta,
                                     const SpectrumReport& rep) {
  const Linearization l = linearization(prob, s);
  const Vector psi = prob.dofs().restrict(s.psi);
  const Vector et = prob.dofs().restrict(eta);
  const Vector mpsi = l.mhat(psi);
  const Vector meta = l.mhat(et);
  const int k = static_cast<int>(rep.eigenfields.size());
  ModeCoefficients mc;
  mc.a.resize(k);
  mc.b.resize(k);
  double scale = 0.0;
  for (int j = 0; j < k; ++j) {
    const Vector phi = prob.dofs().restrict(rep.eigenfields[j]);
    mc.a[j] = phi.dot(mpsi);
    mc.b[j] = phi.dot(meta);
    scale = std::max(scale, std::abs(mc.a[j]));
  }
  for (int j = 0; j < k; ++j) {
    const double ref = std::max(std::abs(mc.a[j]), 1e-12 * std::max(scale, 1e-300));
    mc.max_relation_error = std::max(mc.max_relation_error, std::abs(rep.sigmas[j] * mc.b[j] - mc.a[j]) / ref);
  }
  return mc;
}

}  // namespace gelfand
