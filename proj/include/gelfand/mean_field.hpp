#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/SparseLU>

#include "gelfand/problem.hpp"

namespace gelfand {

/// ρ = h e^{λψ} / ∫h e^{λψ}, held at the quadrature points and the vertices.
struct Density {
  Vector at_points;    // ρ at quadrature points
  Vector at_vertices;  // ρ at the vertices (h_n times the exponential)
  double log_z = 0.0;  // log ∫ h e^{λψ}
};

inline Density rho_of(const Problem& prob, const Vector& psi, double lambda) {
  const Vector t = lambda * (prob.interp * psi);
  const double shift = t.maxCoeff();
  if (!std::isfinite(shift)) throw OverflowGuard("non-finite exponent in the density");
  Density d;
  d.at_points = (t.array() - shift).exp();
  const double s = prob.w.dot(d.at_points);
  if (!(s > 0.0) || !std::isfinite(s)) throw OverflowGuard("weighted exponential integral is not positive and finite");
  d.at_points /= s;
  d.log_z = shift + std::log(s);
  if (!std::isfinite(d.log_z)) throw OverflowGuard("log partition function overflow");
  d.at_vertices = prob.weight.values.array() * (lambda * psi.array() - d.log_z).exp();
  return d;
}

/// ⟨f⟩ with f given at the quadrature points.
inline double average_points(const Problem& prob, const Density& rho, const Vector& f_points) {
  return (prob.w.array() * rho.at_points.array() * f_points.array()).sum();
}

/// ⟨f⟩ for a P1 vertex field.
inline double average(const Problem& prob, const Density& rho, const Vector& f) {
  return average_points(prob, rho, prob.interp * f);
}

struct MeanFieldState {
  double lambda = 0.0;
  Vector psi;  // vertices, zero on the boundary
  double mu = 0.0;
  Vector u;    // λψ
  Density rho;
  double energy = 0.0;            // ½⟨ψ⟩
  double energy_dirichlet = 0.0;  // ½∫|∇ψ|²
  double mass_check = 0.0;        // ∫ρ
  double residual = 0.0;          // dual norm of -Δψ - ρ
  int iterations = 0;

  double sup_psi() const { return psi.cwiseAbs().maxCoeff(); }
};

struct AverageDecomposition {
  double average = 0.0;
  Vector oscillation;
};

inline AverageDecomposition average_and_oscillation(const Problem& prob, const Density& rho, const Vector& u) {
  AverageDecomposition d;
  d.average = average(prob, rho, u);
  d.oscillation = u.array() - d.average;
  return d;
}

struct NewtonOptions {
  double tolerance = 1e-9;
  int max_iterations = 60;
  double blowup_scale = 50.0;  // cap on ‖ψ‖_∞ is blowup_scale / max(1, λ)
  double min_step = 1.0 / 1024.0;
};

namespace detail {

struct MpEval {
  Density rho;
  Vector r;  // ∫ρφ_i on interior vertices
  Vector f;  // A ψ - r
  double dual = 0.0;
};

inline MpEval mp_eval(const Problem& prob, const Vector& x, double lambda) {
  MpEval e;
  e.rho = rho_of(prob, prob.dofs().extend(x), lambda);
  e.r = prob.interp_interior.transpose() * (prob.w.array() * e.rho.at_points.array()).matrix();
  e.f = prob.a_interior() * x - e.r;
  const Vector y = prob.solver->solve_interior(e.f);
  e.dual = std::sqrt(std::max(0.0, e.f.dot(y)));
  return e;
}

/// Solves (A - λ(M_ρ - r rᵀ)) δ = rhs through the bordered system
/// [[A - λM_ρ, λ r], [rᵀ, -1]], which stays well conditioned at folds in μ.
class BorderedSolver {
 public:
  BorderedSolver(const Problem& prob, const Density& rho, const Vector& r, double lambda) : n_(prob.num_interior()) {
    const SparseMatrix m = prob.interior_mass(prob.w.cwiseProduct(rho.at_points));
    const SparseMatrix j = prob.a_interior() - lambda * m;
    std::vector<Triplet> trip;
    trip.reserve(j.nonZeros() + 2 * n_ + 1);
    for (int k = 0; k < j.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(j, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    }
    for (int i = 0; i < n_; ++i) {
      if (r[i] != 0.0) {
        trip.emplace_back(i, n_, lambda * r[i]);
        trip.emplace_back(n_, i, r[i]);
      }
    }
    trip.emplace_back(n_, n_, -1.0);
    SparseMatrix b(n_ + 1, n_ + 1);
    b.setFromTriplets(trip.begin(), trip.end());
    lu_.analyzePattern(b);
    lu_.factorize(b);
    if (lu_.info() != Eigen::Success) throw SolverError("linearised operator factorisation failed");
    matrix_ = std::move(b);
  }

  Vector solve(const Vector& rhs) const {
    Vector ext(n_ + 1);
    ext.head(n_) = rhs;
    ext[n_] = 0.0;
    Vector x = lu_.solve(ext);
    if (lu_.info() != Eigen::Success || !x.allFinite()) throw SolverError("linearised solve failed");
    x += lu_.solve(ext - matrix_ * x);
    return x.head(n_);
  }

 private:
  int n_;
  SparseMatrix matrix_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace detail

inline MeanFieldState make_state(const Problem& prob, double lambda, const Vector& psi, const Density& rho,
                                 double residual, int iterations) {
  MeanFieldState s;
  s.lambda = lambda;
  s.psi = psi;
  s.u = lambda * psi;
  s.rho = rho;
  s.mu = lambda * std::exp(-rho.log_z);
  s.mass_check = prob.w.dot(rho.at_points);
  s.energy = 0.5 * average(prob, rho, psi);
  s.energy_dirichlet = dirichlet_energy(prob.stiffness, psi);
  s.residual = residual;
  s.iterations = iterations;
  return s;
}

/// Newton solve of -Δψ = h e^{λψ} / ∫h e^{λψ} with ψ = 0 on ∂Ω.
inline MeanFieldState solve_MP(const Problem& prob, double lambda, const Vector& initial_guess = Vector(),
                               const NewtonOptions& opt = {}) {
  if (!std::isfinite(lambda)) throw SolverError("lambda must be finite");
  Vector x = initial_guess.size() == prob.mesh.num_vertices() ? prob.dofs().restrict(initial_guess)
                                                              : Vector(Vector::Zero(prob.num_interior()));
  const double cap = opt.blowup_scale / std::max(1.0, lambda);
  auto blowup = [&](const Vector& y) {
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > cap) {
      throw BlowupDetected("solution exceeds the blowup cap", prob.dofs().extend(y));
    }
  };

  detail::MpEval e;
  try {
    e = detail::mp_eval(prob, x, lambda);
  } catch (const OverflowGuard&) {
    throw BlowupDetected("exponential overflow", prob.dofs().extend(x));
  }
  int it = 0;
  int stalls = 0;
  for (; e.dual >= opt.tolerance; ++it) {
    if (it >= opt.max_iterations) throw NoConvergence("Newton iteration limit reached for MP_lambda");
    const detail::BorderedSolver j(prob, e.rho, e.r, lambda);
    const Vector dx = j.solve(-e.f);
    double theta = 1.0;
    detail::MpEval trial;
    for (;;) {
      const Vector y = x + theta * dx;
      blowup(y);
      bool ok = true;
      try {
        trial = detail::mp_eval(prob, y, lambda);
      } catch (const OverflowGuard&) {
        ok = false;
      }
      if (ok && trial.dual <= (1.0 - 1e-4 * theta) * e.dual) break;
      if (0.5 * theta < opt.min_step) {
        if (!ok) throw BlowupDetected("exponential overflow", prob.dofs().extend(y));
        // Accept the shortest step; persistent stagnation is fatal.
        if (++stalls > 3) throw NoConvergence("Newton stagnated for MP_lambda");
        break;
      }
      theta *= 0.5;
    }
    x += theta * dx;
    e = std::move(trial);
  }
  blowup(x);
  return make_state(prob, lambda, prob.dofs().extend(x), e.rho, e.dual, it);
}

/// ½∬ h G h / (∫h)², the energy of the λ = 0 solution.
inline double reference_energy(const Problem& prob) {
  const Vector r = prob.interp.transpose() * (prob.w / prob.w.sum());
  const Vector psi = prob.solver->solve(r);
  return 0.5 * r.dot(psi);
}

/// Energy by both routes; throws if they disagree beyond `tolerance`.
inline double energy_of(const MeanFieldState& s, double tolerance = 1e-6) {
  const double scale = std::max(std::abs(s.energy), 1e-300);
  if (std::abs(s.energy - s.energy_dirichlet) > tolerance * scale) {
    throw SolverError("energy routes disagree: the state is not a converged solution");
  }
  return s.energy;
}

struct LpOptions {
  NewtonOptions newton;
  double lambda_step = std::numbers::pi / 2.0;
  double lambda_max = 8.0 * std::numbers::pi;
};

namespace detail {

/// Damped Newton for the convex problem -Δv = μ h e^v, μ ≤ 0.
inline Vector solve_lp_convex(const Problem& prob, double mu, const NewtonOptions& opt) {
  Vector x = Vector::Zero(prob.num_interior());
  auto eval = [&](const Vector& y, Vector& f, Vector& e) {
    e = (prob.interp_interior * y).array().exp();
    f = prob.a_interior() * y - mu * (prob.interp_interior.transpose() * prob.w.cwiseProduct(e));
    return std::sqrt(std::max(0.0, f.dot(prob.solver->solve_interior(f))));
  };
  Vector f, e;
  double res = eval(x, f, e);
  for (int it = 0; res >= opt.tolerance; ++it) {
    if (it >= opt.max_iterations) throw NoConvergence("Newton iteration limit reached for LP_mu");
    const SparseMatrix j = prob.a_interior() - mu * prob.interior_mass(prob.w.cwiseProduct(e));
    Eigen::SimplicialLLT<SparseMatrix> llt(j);
    if (llt.info() != Eigen::Success) throw SolverError("LP_mu Jacobian factorisation failed");
    const Vector dx = llt.solve(-f);
    double theta = 1.0;
    Vector f2, e2;
    double res2 = 0.0;
    for (;;) {
      res2 = eval(x + theta * dx, f2, e2);
      if (res2 <= (1.0 - 1e-4 * theta) * res || theta < opt.min_step) break;
      theta *= 0.5;
    }
    x += theta * dx;
    f = std::move(f2);
    e = std::move(e2);
    res = res2;
  }
  return prob.dofs().extend(x);
}

}  // namespace detail

/// Minimal-branch solution of -Δv = μ h e^v returned in the λ parametrisation.
inline MeanFieldState solve_LP(const Problem& prob, double mu, const LpOptions& opt = {}) {
  if (!std::isfinite(mu)) throw SolverError("mu must be finite");
  if (mu == 0.0) return solve_MP(prob, 0.0, Vector(), opt.newton);
  if (mu < 0.0) {
    const Vector v = detail::solve_lp_convex(prob, mu, opt.newton);
    const Vector ev = (prob.interp * v).array().exp();
    const double lambda = mu * prob.w.dot(ev);
    return solve_MP(prob, lambda, v / lambda, opt.newton);
  }

  // μ > 0: continue in λ from 0 until μ(λ) brackets the target, then refine.
  MeanFieldState lo = solve_MP(prob, 0.0, Vector(), opt.newton);
  std::optional<MeanFieldState> hi;
  double step = opt.lambda_step;
  while (lo.lambda + step < opt.lambda_max) {
    MeanFieldState s = solve_MP(prob, lo.lambda + step, lo.psi, opt.newton);
    if (s.mu >= mu) {
      hi = std::move(s);
      break;
    }
    if (s.mu < lo.mu) {
      // Stepped over the fold; look closer before giving up.
      step *= 0.25;
      if (step < 1e-9) throw NoConvergence("mu lies beyond the fold of the minimal branch");
      continue;
    }
    lo = std::move(s);
  }
  if (!hi) throw NoConvergence("mu lies beyond the fold of the minimal branch");

  // μ(λ) can flatten at the fold; bisection on λ with a guard against
  // stepping past the maximum.
  MeanFieldState a = lo;
  MeanFieldState b = *hi;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(b.mu - mu) <= 1e-12 * mu) return b;
    if (std::abs(a.mu - mu) <= 1e-12 * mu) return a;
    double lambda = a.lambda + (mu - a.mu) * (b.lambda - a.lambda) / (b.mu - a.mu);
    const double span = b.lambda - a.lambda;
    if (!(lambda > a.lambda + 0.05 * span && lambda < b.lambda - 0.05 * span)) lambda = 0.5 * (a.lambda + b.lambda);
    MeanFieldState m = solve_MP(prob, lambda, a.psi, opt.newton);
    if (m.mu >= mu) {
      b = std::move(m);
    } else {
      a = std::move(m);
    }
    if (b.lambda - a.lambda < 1e-13 * std::max(1.0, b.lambda)) break;
  }
  return std::abs(b.mu - mu) < std::abs(a.mu - mu) ? b : a;
}

}  // namespace gelfand
