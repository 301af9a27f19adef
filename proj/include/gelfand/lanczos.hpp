#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "gelfand/error.hpp"

namespace gelfand {

struct LanczosOptions {
  double tolerance = 1e-12;  // relative residual on the Ritz values
  int max_dim = 600;
  unsigned seed = 20240611u;
};

struct LanczosResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // B-orthonormal columns
  int dimension = 0;
  double max_residual = 0.0;
};

/// Largest eigenpairs of an operator C that is self-adjoint in the inner
/// product ⟨x, y⟩ = xᵀBy. `apply` computes C x and `inner` computes B x.
/// Columns of `deflate` must be B-orthonormal and are projected out.
/// Runs without restarts and with full reorthogonalisation.
template <class Apply, class Inner>
LanczosResult lanczos_largest(int n, int k, Apply&& apply, Inner&& inner, const std::vector<Eigen::VectorXd>& deflate = {},
                              const LanczosOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int room = n - static_cast<int>(deflate.size());
  if (k < 1 || k > room) throw SolverError("requested eigenpair count exceeds the problem size");
  const int max_dim = std::min(room, std::max(opt.max_dim, 2 * k + 10));

  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> normal;

  std::vector<VectorXd> q;   // basis
  std::vector<VectorXd> bq;  // B times basis
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples q[j] and q[j+1]

  auto orthogonalise = [&](VectorXd& v) {
    for (int pass = 0; pass < 2; ++pass) {
      const VectorXd bv = inner(v);
      for (const auto& d : deflate) v -= d.dot(bv) * d;
      for (std::size_t i = 0; i < q.size(); ++i) v -= bq[i].dot(v) * q[i];
    }
  };
  auto fresh = [&]() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = normal(rng);
      orthogonalise(v);
      const double nrm = std::sqrt(std::max(0.0, v.dot(inner(v))));
      if (nrm > 1e-10) return VectorXd(v / nrm);
    }
    throw SolverError("Lanczos could not extend the Krylov basis");
  };

  LanczosResult res;
  VectorXd v = fresh();
  for (;;) {
    q.push_back(v);
    bq.push_back(inner(v));
    const int j = static_cast<int>(q.size()) - 1;
    VectorXd w = apply(v);
    if (!w.allFinite()) throw SolverError("Lanczos operator produced non-finite values");
    alpha.push_back(bq[j].dot(w));
    orthogonalise(w);
    const double b = std::sqrt(std::max(0.0, w.dot(inner(w))));

    const int m = j + 1;
    if (m >= k) {
      MatrixXd t = MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
      for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(t);
      double worst = 0.0;
      const double scale = std::max(std::abs(eig.eigenvalues()[m - 1]), std::abs(eig.eigenvalues()[0]));
      for (int i = 0; i < k; ++i) {
        const int c = m - 1 - i;
        const double r = std::abs(b * eig.eigenvectors()(m - 1, c));
        worst = std::max(worst, r / std::max(scale, 1e-300));
      }
      if (worst < opt.tolerance || m >= max_dim) {
        if (worst >= opt.tolerance && m < room) throw SolverError("Lanczos did not converge within the basis limit");
        res.values.resize(k);
        res.vectors = MatrixXd::Zero(n, k);
        for (int i = 0; i < k; ++i) {
          const int c = m - 1 - i;
          res.values[i] = eig.eigenvalues()[c];
          for (int l = 0; l < m; ++l) res.vectors.col(i) += eig.eigenvectors()(l, c) * q[l];
        }
        res.dimension = m;
        res.max_residual = worst;
        return res;
      }
    }

    if (b > 1e-12 * std::max(1.0, std::abs(alpha.back()))) {
      beta.push_back(b);
      v = w / b;
    } else {
      // Invariant subspace; continue with a fresh direction.
      beta.push_back(0.0);
      v = fresh();
    }
  }
}

}  // namespace gelfand
