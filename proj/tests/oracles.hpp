#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/Core>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// Radial solutions on the unit disk for h = |x|^{2α}:
/// v = 2 log((1 + b) / (1 + b r^{2(1+α)})).
struct Radial {
  double alpha = 0.0;

  double mu(double b) const { return 8.0 * (1.0 + alpha) * (1.0 + alpha) * b / ((1.0 + b) * (1.0 + b)); }
  double lambda(double b) const { return 8.0 * pi * (1.0 + alpha) * b / (1.0 + b); }
  double b_of_lambda(double l) const { return l / (8.0 * pi * (1.0 + alpha) - l); }
  double v(double b, double r) const { return 2.0 * std::log((1.0 + b) / (1.0 + b * std::pow(r, 2.0 * (1.0 + alpha)))); }
  double v0(double b) const { return 2.0 * std::log(1.0 + b); }
  /// ⟨v⟩ in the probability measure μ h e^v / λ.
  double mean_v(double b) const { return 2.0 * std::log(1.0 + b) * (1.0 + 1.0 / b) - 2.0; }
  double energy(double b) const { return mean_v(b) / (2.0 * lambda(b)); }
};

inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// First zero of J_0.
inline double j01() {
  return bisect([](double x) { return std::cyl_bessel_j(0.0, x); }, 2.0, 3.0);
}

/// First zero of J_1'.
inline double j1p1() {
  return bisect([](double x) { return 0.5 * (std::cyl_bessel_j(0.0, x) - std::cyl_bessel_j(2.0, x)); }, 1.5, 2.2);
}

/// Dirichlet Green function of the unit disk.
inline double disk_green(const Eigen::Vector2d& x, const Eigen::Vector2d& p) {
  const double np = p.norm();
  if (np == 0.0) return -std::log(x.norm()) / (2.0 * pi);
  const Eigen::Vector2d image = p / (np * np);
  return -std::log((x - p).norm() / (np * (x - image).norm())) / (2.0 * pi);
}

/// ½∫|∇ψ|² for ψ = G*ρ with ρ uniform on the annulus a < r < 1.
inline double annulus_energy(double a) {
  const double c = 1.0 / (pi * (1.0 - a * a));
  const double integral = (1.0 - std::pow(a, 4)) / 4.0 - a * a * (1.0 - a * a) - std::pow(a, 4) * std::log(a);
  return pi * c * c / 4.0 * integral;
}

/// Interaction energy of the disk ground state at λ = 0 with h ≡ 1.
inline double e0_disk() { return 1.0 / (16.0 * pi); }

}  // namespace oracle
