#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "gelfand/mean_field.hpp"

namespace gelfand {

/// A probability density stored at the quadrature points as ρ = a·h_n + b,
/// so that singular factors of h_n are integrated by the weighted channel.
struct ProbabilityDensity {
  Vector a;  // coefficient of h_n
  Vector b;  // plain part
};

struct DensityState {
  ProbabilityDensity rho;
  Vector potential;     // ψ = G*ρ at the vertices
  double lambda = 0.0;
  double n = 0.0;       // approximation index, 0 if h itself
  double free_energy = 0.0;
  double neg_entropy = 0.0;  // ∫ρ log ρ = -𝒮(ρ)
  double energy = 0.0;       // ℰ(ρ) = ½∫ρψ
  double energy_dirichlet = 0.0;
  double linear = 0.0;       // ∫ρ log h_n
  double mass = 0.0;
  int iterations = 0;
  double jensen_slack = std::numeric_limits<double>::infinity();  // min over iterates

  double entropy() const { return -neg_entropy; }
};

namespace detail {

inline Vector point_masses(const Problem& prob, const ProbabilityDensity& rho) {
  Vector m(prob.quad.size());
  for (int q = 0; q < prob.quad.size(); ++q) {
    const auto& p = prob.quad.points[q];
    m[q] = rho.a[q] * p.w + rho.b[q] * p.w_plain;
  }
  return m;
}

inline Vector point_values(const Problem& prob, const ProbabilityDensity& rho) {
  Vector v(prob.quad.size());
  for (int q = 0; q < prob.quad.size(); ++q) v[q] = rho.a[q] * prob.quad.points[q].h + rho.b[q];
  return v;
}

}  // namespace detail

/// Area |Ω_h| of the discrete domain.
inline double domain_area(const Problem& prob) {
  double s = 0.0;
  for (const auto& p : prob.quad.points) s += p.w_plain;
  return s;
}

inline ProbabilityDensity uniform_density(const Problem& prob) {
  return {Vector::Zero(prob.quad.size()), Vector::Constant(prob.quad.size(), 1.0 / domain_area(prob))};
}

/// Evaluates F_{λ,n}(ρ) = ∫ρ log ρ - (λ/2)∫ρ G*ρ - ∫ρ log h_n and its parts.
inline DensityState free_energy_of(const Problem& prob, const ProbabilityDensity& rho, double lambda) {
  const int nq = prob.quad.size();
  if (rho.a.size() != nq || rho.b.size() != nq) throw InvalidDensity("density does not match the quadrature");
  if ((rho.a.array() < 0.0).any() || (rho.b.array() < 0.0).any() || !rho.a.allFinite() || !rho.b.allFinite()) {
    throw InvalidDensity("density has negative or non-finite entries");
  }
  DensityState s;
  s.rho = rho;
  s.lambda = lambda;
  s.n = prob.weight.floor > 0.0 ? 1.0 / prob.weight.floor : 0.0;
  const Vector m = detail::point_masses(prob, rho);
  const Vector v = detail::point_values(prob, rho);
  s.mass = m.sum();
  if (std::abs(s.mass - 1.0) > 1e-8) throw InvalidDensity("density does not have unit mass");

  const Vector load = prob.interp.transpose() * m;
  s.potential = prob.solver->solve(load);
  const Vector psi_q = prob.interp * s.potential;
  s.energy = 0.5 * m.dot(psi_q);
  s.energy_dirichlet = dirichlet_energy(prob.stiffness, s.potential);
  s.neg_entropy = 0.0;
  s.linear = 0.0;
  for (int q = 0; q < nq; ++q) {
    if (m[q] <= 0.0) continue;  // 0 log 0 = 0
    s.neg_entropy += m[q] * std::log(v[q]);
    s.linear += m[q] * std::log(prob.quad.points[q].h);
  }
  s.free_energy = s.neg_entropy - lambda * s.energy - s.linear;
  return s;
}

struct PicardOptions {
  double tolerance = 1e-10;  // on ‖T(ρ) - ρ‖_L¹
  int max_iterations = 20000;
  double initial_damping = 1.0;
};

namespace detail {

/// T(ρ) = h_n e^{λψ}/∫h_n e^{λψ} for ψ = G*ρ, plus the Jensen slack
/// ∫h_n e^{λψ} - ‖h_n‖₁ exp(λ∫ψh_n/‖h_n‖₁) in relative form.
inline ProbabilityDensity euler_lagrange_map(const Problem& prob, const Vector& psi, double lambda, double& jensen) {
  const Vector psi_q = prob.interp * psi;
  const Vector t = lambda * psi_q;
  const double shift = t.maxCoeff();
  const Vector e = (t.array() - shift).exp();
  const double z = prob.w.dot(e);
  ProbabilityDensity out{e / z, Vector::Zero(e.size())};
  const double hmass = prob.w.sum();
  const double log_lhs = shift + std::log(z);
  const double log_rhs = std::log(hmass) + lambda * prob.w.dot(psi_q) / hmass;
  jensen = log_lhs - log_rhs;
  return out;
}

inline double l1_distance(const Problem& prob, const ProbabilityDensity& x, const ProbabilityDensity& y) {
  double s = 0.0;
  for (int q = 0; q < prob.quad.size(); ++q) {
    const auto& p = prob.quad.points[q];
    // Both parts are evaluated at the same point, so the pointwise difference
    // is (Δa)h_n + Δb with the channel weights attached.
    s += std::abs((x.a[q] - y.a[q]) * p.w + (x.b[q] - y.b[q]) * p.w_plain);
  }
  return s;
}

}  // namespace detail

/// Damped Picard iteration on the Euler-Lagrange map for λ < 0. The returned
/// density is T(ρ) of the last iterate, in exact exponential form.
inline DensityState minimize_free_energy(const Problem& prob, double lambda, const PicardOptions& opt = {}) {
  if (!(lambda < 0.0)) throw UnsupportedRegime("free-energy minimisation requires lambda < 0");
  ProbabilityDensity rho = uniform_density(prob);
  DensityState cur = free_energy_of(prob, rho, lambda);
  const double f0 = cur.free_energy;
  double theta = opt.initial_damping;
  double jensen_min = std::numeric_limits<double>::infinity();
  double jensen = 0.0;
  ProbabilityDensity t = detail::euler_lagrange_map(prob, cur.potential, lambda, jensen);
  double dist = detail::l1_distance(prob, t, rho);
  for (int it = 0; it < opt.max_iterations; ++it) {
    jensen_min = std::min(jensen_min, jensen);
    if (dist < opt.tolerance) {
      DensityState out = free_energy_of(prob, t, lambda);
      out.iterations = it;
      out.jensen_slack = jensen_min;
      if (out.free_energy > f0 + 1e-12 * std::abs(f0)) throw NoConvergence("free-energy descent check failed");
      return out;
    }
    for (;;) {
      ProbabilityDensity next{(1.0 - theta) * rho.a + theta * t.a, (1.0 - theta) * rho.b + theta * t.b};
      DensityState trial = free_energy_of(prob, next, lambda);
      double trial_jensen = 0.0;
      ProbabilityDensity trial_t = detail::euler_lagrange_map(prob, trial.potential, lambda, trial_jensen);
      const double trial_dist = detail::l1_distance(prob, trial_t, next);
      // Near the fixed point F is flat to rounding; the residual decides there.
      const double noise = 1e-14 * (1.0 + std::abs(cur.free_energy));
      const double df = trial.free_energy - cur.free_energy;
      if (df < -noise || (df <= noise && trial_dist < dist) || theta < 1e-6) {
        rho = std::move(next);
        cur = std::move(trial);
        t = std::move(trial_t);
        dist = trial_dist;
        jensen = trial_jensen;
        theta = std::min(1.0, 1.5 * theta);
        break;
      }
      theta *= 0.5;
    }
  }
  throw NoConvergence("Picard iteration limit reached");
}

/// Uniform density on the inner δ-collar {x : dist(x, ∂Ω) < δ}.
inline ProbabilityDensity collar_density(const Problem& prob, double delta) {
  const std::vector<Point> boundary = prob.mesh.boundary_polygon();
  double inradius = 0.0;
  for (const auto& v : prob.mesh.vertices) inradius = std::max(inradius, geom::distance_to_polyline(v, boundary));
  if (!(delta > 0.0) || delta >= inradius) throw InvalidDelta("delta must lie in (0, inradius)");
  ProbabilityDensity rho{Vector::Zero(prob.quad.size()), Vector::Zero(prob.quad.size())};
  double area = 0.0;
  for (int q = 0; q < prob.quad.size(); ++q) {
    const auto& p = prob.quad.points[q];
    if (geom::distance_to_polyline(p.x, boundary) < delta) {
      rho.b[q] = 1.0;
      area += p.w_plain;
    }
  }
  if (!(area > 0.0)) throw InvalidDelta("collar is empty on this mesh");
  rho.b /= area;
  return rho;
}

struct EnergyBoundReport {
  double lambda = 0.0;
  double n = 0.0;
  double delta = 0.0;
  DensityState minimizer;
  DensityState collar;
  double area = 0.0;
  double sup_h = 0.0;
  // Each slack is nonnegative when the inequality holds.
  double minimizer_slack = 0.0;  // F(ρ_δ) - F(ρ_{λ,n})
  double entropy_slack = 0.0;    // log|Ω| - 𝒮(ρ_{λ,n})
  double linear_slack = 0.0;     // log(1 + ‖h‖_∞) - ∫ρ log h_n
  double energy_slack = 0.0;     // bound - ℰ(ρ_{λ,n})
  double jensen_slack = 0.0;     // min over iterates of log(lhs / rhs)
  bool holds() const {
    return minimizer_slack >= 0.0 && entropy_slack >= 0.0 && linear_slack >= 0.0 && energy_slack >= 0.0 &&
           jensen_slack >= -1e-12;
  }
};

/// Evaluates each inequality of ℰ(ρ_{λ,n}) ≤ (F(ρ_δ) + log|Ω| + log(1+‖h‖_∞)) / |λ|.
inline EnergyBoundReport verify_energy_bound(const Problem& prob, double lambda, double n, double delta,
                                             const PicardOptions& opt = {}) {
  if (!(lambda < 0.0)) throw UnsupportedRegime("the energy bound concerns lambda < 0");
  const Problem pn = prob.approximant(n);
  EnergyBoundReport r;
  r.lambda = lambda;
  r.n = n;
  r.delta = delta;
  r.minimizer = minimize_free_energy(pn, lambda, opt);
  r.collar = free_energy_of(pn, collar_density(pn, delta), lambda);
  r.area = domain_area(pn);
  r.sup_h = prob.weight.sup_norm();
  for (const auto& p : prob.quad.points) r.sup_h = std::max(r.sup_h, p.h);
  const double a = std::abs(lambda);
  r.minimizer_slack = r.collar.free_energy - r.minimizer.free_energy;
  r.entropy_slack = std::log(r.area) - r.minimizer.entropy();
  r.linear_slack = std::log(1.0 + r.sup_h) - r.minimizer.linear;
  const double bound = (r.collar.free_energy + std::log(r.area) + std::log(1.0 + r.sup_h)) / a;
  r.energy_slack = bound - r.minimizer.energy;
  r.jensen_slack = r.minimizer.jensen_slack;
  return r;
}

}  // namespace gelfand
