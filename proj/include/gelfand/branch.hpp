#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gelfand/spectrum.hpp"

namespace gelfand {

/// η = dψ/dλ: solves (A - λM̂)η = M̂ψ, i.e. -Δη - λρ(η - ⟨η⟩) = ρψ̂.
inline Vector solve_eta(const Problem& prob, const MeanFieldState& s) {
  const Linearization l = linearization(prob, s);
  const Vector rhs = l.mhat(prob.dofs().restrict(s.psi));
  Vector eta;
  try {
    const detail::BorderedSolver j(prob, s.rho, l.r, s.lambda);
    eta = j.solve(rhs);
  } catch (const SolverError&) {
    throw FoldSingularity("linearisation is singular");
  }
  const double scale = std::max(rhs.norm(), 1e-300);
  if (!eta.allFinite() || (l.apply(eta) - rhs).norm() > 1e-10 * std::max(scale, 1.0)) {
    throw FoldSingularity("linearisation is numerically singular");
  }
  return prob.dofs().extend(eta);
}

struct EnergySlope {
  double direct = 0.0;    // ∫∇η·∇ψ
  double average = 0.0;   // ⟨η⟩
  double spectral = 0.0;  // Σ (λ + σ_j) σ_j b_j² over the available modes
  int modes = 0;
};

inline EnergySlope dE_dlambda(const Problem& prob, const MeanFieldState& s, const Vector& eta,
                              const SpectrumReport* rep = nullptr) {
  EnergySlope d;
  d.direct = eta.dot(prob.stiffness * s.psi);
  d.average = average(prob, s.rho, eta);
  if (rep) {
    const ModeCoefficients mc = expand_modes(prob, s, eta, *rep);
    d.modes = static_cast<int>(mc.b.size());
    for (int j = 0; j < d.modes; ++j) d.spectral += (s.lambda + rep->sigmas[j]) * rep->sigmas[j] * mc.b[j] * mc.b[j];
  }
  return d;
}

struct GData {
  double g = 0.0;
  double z_mean = 0.0;      // 2E + λ⟨η⟩
  double z_mean_direct = 0.0;  // ⟨ψ + λη⟩ by quadrature
  double z3 = 0.0;          // ⟨z³⟩
  double z_min = 0.0;
};

/// g(λ) = 1 - λ⟨z⟩ with z = ψ + λη = du/dλ.
inline GData g_of(const Problem& prob, const MeanFieldState& s, const Vector& eta) {
  GData out;
  const double de = eta.dot(prob.stiffness * s.psi);
  out.z_mean = 2.0 * s.energy_dirichlet + s.lambda * de;
  out.g = 1.0 - s.lambda * out.z_mean;
  const Vector z = s.psi + s.lambda * eta;
  const Vector zq = prob.interp * z;
  out.z_mean_direct = average_points(prob, s.rho, zq);
  out.z3 = average_points(prob, s.rho, zq.array().cube().matrix());
  out.z_min = z.minCoeff();
  return out;
}

struct BranchPoint {
  double lambda = 0.0;
  double mu = 0.0;
  double energy = 0.0;
  double dE_dlambda = 0.0;
  double g = 0.0;
  double sigma1 = 0.0;
  double tau1 = 0.0;
  double poincare = 0.0;
  double sup_psi = 0.0;
  double residual = 0.0;
};

struct Fold {
  double lambda = 0.0;
  double energy = 0.0;
  double mu = 0.0;
  double g = 0.0;
  double z3 = 0.0;
  double z_min = 0.0;
  int sign_changes = 0;
};

enum class Kind { first, second, undetermined };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::first: return "first";
    case Kind::second: return "second";
    default: return "undetermined";
  }
}

struct BranchDiagram {
  std::vector<BranchPoint> rows;  // ascending λ
  std::vector<Vector> psi;        // solution per row
  std::optional<Fold> fold;
  Kind kind = Kind::undetermined;
  double e0 = 0.0;          // E at λ = 0
  double mu_min = 0.0;      // μ at the smallest λ (μ_0 = -∞ trend)
  double mu_last = 0.0;     // μ at the largest λ (μ_1 estimate)
  std::string termination;  // why the upward trace stopped
  std::vector<std::string> warnings;
};

struct BranchOptions {
  double lambda_min = -200.0;
  int negative_points = 12;
  int uniform_points = 12;      // on (0, 6π]
  double eps_stop = 8.0 * std::numbers::pi * 1e-3;
  double eps_classify = 8.0 * std::numbers::pi * 5e-3;
  double approach_ratio = 0.6;  // gaps to 8π shrink by this factor
  int modes = 10;
  bool spectra = true;
  int max_halvings = 8;
  NewtonOptions newton;
  LanczosOptions lanczos;
};

/// λ grid: geometric on [λ_min, 0), 0, uniform on (0, 6π], then 8π - 2π r^k.
inline std::vector<double> branch_grid(const BranchOptions& opt) {
  const double pi = std::numbers::pi;
  std::vector<double> grid;
  if (opt.lambda_min < 0.0 && opt.negative_points > 0) {
    const double ratio = std::pow(1e-3, 1.0 / std::max(1, opt.negative_points - 1));
    for (int i = 0; i < opt.negative_points; ++i) grid.push_back(opt.lambda_min * std::pow(ratio, i));
  }
  grid.push_back(0.0);
  for (int i = 1; i <= opt.uniform_points; ++i) grid.push_back(6.0 * pi * i / opt.uniform_points);
  for (double gap = 2.0 * pi * opt.approach_ratio; gap >= opt.eps_stop; gap *= opt.approach_ratio) grid.push_back(8.0 * pi - gap);
  if (grid.back() < 8.0 * pi - opt.eps_stop) grid.push_back(8.0 * pi - opt.eps_stop);
  return grid;
}

namespace detail {

inline BranchPoint evaluate_row(const Problem& prob, const MeanFieldState& s, const Vector& eta, const BranchOptions& opt) {
  BranchPoint p;
  p.lambda = s.lambda;
  p.mu = s.mu;
  p.energy = s.energy;
  p.dE_dlambda = eta.dot(prob.stiffness * s.psi);
  p.g = g_of(prob, s, eta).g;
  p.sup_psi = s.sup_psi();
  p.residual = s.residual;
  if (opt.spectra) {
    p.sigma1 = weighted_eigs(prob, s, 1, opt.lanczos).sigmas[0];
    p.tau1 = standard_tau1(prob, s, opt.lanczos);
    p.poincare = poincare_constant(prob, s, opt.lanczos);
  }
  return p;
}

struct Traced {
  MeanFieldState state;
  Vector eta;
};

/// Continues from `from` towards each grid value in turn, halving the step
/// when Newton struggles. Returns the stop reason (empty if the grid ended).
template <class Sink>
std::string continue_along(const Problem& prob, Traced from, const std::vector<double>& targets,
                           const BranchOptions& opt, Sink&& sink) {
  for (double target : targets) {
    double reached = from.state.lambda;
    int halvings = 0;
    while (reached != target) {
      double step = target - reached;
      for (int h = 0; h < halvings; ++h) step *= 0.5;
      const double lambda = halvings == 0 ? target : reached + step;
      try {
        const Vector guess = from.state.psi + (lambda - from.state.lambda) * from.eta;
        MeanFieldState s = solve_MP(prob, lambda, guess, opt.newton);
        const bool jump = s.sup_psi() > 2.0 * from.state.sup_psi() && from.state.sup_psi() > 0.0 && lambda > 0.0;
        if ((s.iterations > 8 || jump) && halvings < opt.max_halvings) {
          ++halvings;
          continue;
        }
        Vector eta = solve_eta(prob, s);
        from = Traced{std::move(s), std::move(eta)};
        reached = lambda;
        if (lambda == target) sink(from, true);
        halvings = 0;
      } catch (const BlowupDetected& e) {
        if (halvings < opt.max_halvings) {
          ++halvings;
          continue;
        }
        return std::string("blowup: ") + e.what();
      } catch (const Error& e) {
        if (halvings < opt.max_halvings) {
          ++halvings;
          continue;
        }
        return std::string("solver failure: ") + e.what();
      }
    }
  }
  return {};
}

}  // namespace detail

inline Kind classify_kind(const BranchDiagram& d, const BranchOptions& opt = {});

/// Traces ψ_λ over the λ grid, computing energy, g and spectral data per row.
inline BranchDiagram trace_branch(const Problem& prob, const BranchOptions& opt = {}) {
  const std::vector<double> grid = branch_grid(opt);
  BranchDiagram d;
  std::vector<std::pair<BranchPoint, Vector>> rows;

  MeanFieldState s0 = solve_MP(prob, 0.0, Vector(), opt.newton);
  Vector eta0 = solve_eta(prob, s0);
  d.e0 = s0.energy;
  rows.emplace_back(detail::evaluate_row(prob, s0, eta0, opt), s0.psi);
  auto sink = [&](const detail::Traced& t, bool) {
    rows.emplace_back(detail::evaluate_row(prob, t.state, t.eta, opt), t.state.psi);
  };

  std::vector<double> down;
  std::vector<double> up;
  for (double l : grid) {
    if (l < 0.0) down.push_back(l);
    if (l > 0.0) up.push_back(l);
  }
  std::reverse(down.begin(), down.end());
  const std::string down_stop = detail::continue_along(prob, {s0, eta0}, down, opt, sink);
  if (!down_stop.empty()) d.warnings.push_back("negative branch stopped early: " + down_stop);
  d.termination = detail::continue_along(prob, {s0, eta0}, up, opt, sink);
  if (d.termination.empty()) d.termination = "reached 8pi - eps_stop";

  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.lambda < b.first.lambda; });
  for (auto& [row, psi] : rows) {
    d.rows.push_back(row);
    d.psi.push_back(std::move(psi));
  }
  d.mu_min = d.rows.front().mu;
  d.mu_last = d.rows.back().mu;
  d.kind = classify_kind(d, opt);
  return d;
}

/// Number of sign changes of g over rows with 0 < λ < 8π.
inline int g_sign_changes(const BranchDiagram& d) {
  int changes = 0;
  const BranchPoint* prev = nullptr;
  for (const auto& r : d.rows) {
    if (!(r.lambda > 0.0 && r.lambda < 8.0 * std::numbers::pi)) continue;
    if (prev && ((prev->g > 0.0) != (r.g > 0.0))) ++changes;
    prev = &r;
  }
  return changes;
}

/// Bisection (with secant acceleration) on g between the bracketing rows.
inline Fold find_fold(const Problem& prob, const BranchDiagram& d, double tolerance = 1e-8,
                      const NewtonOptions& newton = {}) {
  const int changes = g_sign_changes(d);
  int lo = -1;
  for (std::size_t i = 0; i + 1 < d.rows.size(); ++i) {
    const auto& a = d.rows[i];
    const auto& b = d.rows[i + 1];
    if (a.lambda > 0.0 && b.lambda < 8.0 * std::numbers::pi && a.g > 0.0 && b.g <= 0.0) {
      lo = static_cast<int>(i);
      break;
    }
  }
  if (lo < 0) throw NoFoldInRange("g has no sign change on (0, 8pi) in the traced rows");

  double la = d.rows[lo].lambda;
  double lb = d.rows[lo + 1].lambda;
  double ga = d.rows[lo].g;
  double gb = d.rows[lo + 1].g;
  Vector guess = d.psi[lo];
  Fold f;
  f.sign_changes = changes;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double lambda = la - ga * (lb - la) / (gb - ga);
    if (!(lambda > la && lambda < lb)) lambda = 0.5 * (la + lb);
    const MeanFieldState s = solve_MP(prob, lambda, guess, newton);
    const Vector eta = solve_eta(prob, s);
    const GData g = g_of(prob, s, eta);
    f.lambda = lambda;
    f.energy = s.energy;
    f.mu = s.mu;
    f.g = g.g;
    f.z3 = g.z3;
    f.z_min = g.z_min;
    if (std::abs(g.g) < tolerance || lb - la < 1e-14 * lb) return f;
    guess = s.psi;
    // Illinois modification keeps both ends moving.
    if (g.g > 0.0) {
      la = lambda;
      ga = g.g;
      if (side == 1) gb *= 0.5;
      side = 1;
    } else {
      lb = lambda;
      gb = g.g;
      if (side == -1) ga *= 0.5;
      side = -1;
    }
  }
  throw NoConvergence("fold bisection did not reach the tolerance");
}

struct KindEvidence {
  double energy_slope = 0.0;  // d log E / d log(1/(8π - λ)) over the tail
  double sup_u_slope = 0.0;   // same for ‖u‖_∞ = λ‖ψ‖_∞
  double energy_ratio = 0.0;  // E_last / E_0
  int tail_rows = 0;
};

inline KindEvidence kind_evidence(const BranchDiagram& d, int tail = 5) {
  KindEvidence ev;
  std::vector<const BranchPoint*> rows;
  for (const auto& r : d.rows) {
    if (r.lambda > 0.0 && r.lambda < 8.0 * std::numbers::pi) rows.push_back(&r);
  }
  if (rows.size() > static_cast<std::size_t>(tail)) rows.erase(rows.begin(), rows.end() - tail);
  ev.tail_rows = static_cast<int>(rows.size());
  if (rows.size() < 2) return ev;
  auto slope = [&](auto value) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rows.size());
    for (const auto* r : rows) {
      const double x = -std::log(8.0 * std::numbers::pi - r->lambda);
      const double y = std::log(value(*r));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  ev.energy_slope = slope([](const BranchPoint& r) { return r.energy; });
  ev.sup_u_slope = slope([](const BranchPoint& r) { return r.lambda * r.sup_psi; });
  ev.energy_ratio = d.e0 > 0.0 ? rows.back()->energy / d.e0 : 0.0;
  return ev;
}

/// First kind when E and ‖u‖_∞ keep growing like powers of log(1/(8π - λ))
/// near 8π; second kind when both level off.
inline Kind classify_kind(const BranchDiagram& d, const BranchOptions& opt) {
  if (d.rows.empty() || d.rows.back().lambda < 8.0 * std::numbers::pi - opt.eps_classify) return Kind::undetermined;
  const KindEvidence ev = kind_evidence(d);
  if (ev.tail_rows < 3) return Kind::undetermined;
  constexpr double diverging = 0.015;
  constexpr double bounded = 0.01;
  if (ev.energy_slope > diverging && ev.sup_u_slope > diverging && ev.energy_ratio > 2.0) return Kind::first;
  if (ev.energy_slope < bounded && ev.sup_u_slope < bounded) return Kind::second;
  return Kind::undetermined;
}

}  // namespace gelfand
