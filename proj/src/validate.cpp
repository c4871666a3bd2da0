#include "sdl/validate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "sdl/simplex.hpp"

namespace sdl {

DiscreteDensity numeric_weighted_kl_center(const DensitySet& set, const SimplexWeights& alpha,
                                           double tol, int max_iters) {
  const Eigen::Index k = check_same_bins(set);
  const Eigen::Index n = static_cast<Eigen::Index>(set.size());
  if (alpha.size() != n) throw DimensionError("numeric_weighted_kl_center: weight length mismatch");

  auto objective = [&](const Eigen::VectorXd& f) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd& fi = set[static_cast<std::size_t>(i)].values();
      double kl = 0.0;
      for (Eigen::Index x = 0; x < k; ++x) {
        if (fi[x] <= 0.0) continue;
        if (f[x] <= 0.0) return std::numeric_limits<double>::infinity();
        kl += fi[x] * std::log(fi[x] / f[x]);
      }
      acc += alpha[i] * kl;
    }
    return acc;
  };
  auto gradient = [&](const Eigen::VectorXd& f) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd& fi = set[static_cast<std::size_t>(i)].values();
      for (Eigen::Index x = 0; x < k; ++x) {
        if (fi[x] > 0.0) g[x] -= alpha[i] * fi[x] / f[x];
      }
    }
    return g;
  };

  Eigen::VectorXd f = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  double fx = objective(f);
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd g = gradient(f);
    double step = 1.0;
    Eigen::VectorXd cand;
    double fc = 0.0;
    while (true) {
      cand = project_to_simplex(f - step * g);
      fc = objective(cand);
      if (fc <= fx || step < 1e-18) break;
      step *= 0.5;
    }
    const double move = (cand - f).lpNorm<Eigen::Infinity>();
    f = cand;
    const double improved = fx - fc;
    fx = fc;
    if (move < tol && improved < tol) break;
  }
  f = f.cwiseMax(0.0);
  f /= f.sum();
  return DiscreteDensity(f);
}

SpdMatrix numeric_symmetrized_center(const SpdSet& set, const SimplexWeights& w, double tol,
                                     int max_iters) {
  const Eigen::Index n = check_same_dim(set);
  const Eigen::Index count = static_cast<Eigen::Index>(set.size());
  if (w.size() != count) throw DimensionError("numeric_symmetrized_center: weight length mismatch");

  std::vector<Eigen::MatrixXd> inverses;
  inverses.reserve(static_cast<std::size_t>(count));
  for (const auto& x : set) inverses.push_back(x.matrix().inverse());

  auto objective = [&](const SpdMatrix& m) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) acc += w[i] * j_divergence(set[static_cast<std::size_t>(i)], m);
    return acc;
  };
  // Euclidean gradient sum_i w_i (X_i^{-1} - M^{-1} X_i M^{-1}) / 4.
  auto euclidean_gradient = [&](const SpdMatrix& m) {
    const Eigen::MatrixXd m_inv = m.matrix().inverse();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < count; ++i) {
      g += w[i] * 0.25 *
           (inverses[static_cast<std::size_t>(i)] -
            m_inv * set[static_cast<std::size_t>(i)].matrix() * m_inv);
    }
    return Eigen::MatrixXd(0.5 * (g + g.transpose()));
  };

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < count; ++i) mean += w[i] * set[static_cast<std::size_t>(i)].matrix();
  SpdMatrix m(mean);
  double fm = objective(m);
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::MatrixXd euc = euclidean_gradient(m);
    const TangentMatrix grad(m.matrix() * euc * m.matrix());
    const double gnorm = grad.matrix().norm();
    if (gnorm < tol * (1.0 + std::abs(fm))) break;
    double step = 1.0;
    while (step > 1e-18) {
      const SpdMatrix cand = exp_map(m, TangentMatrix(-step * grad.matrix()));
      const double fc = objective(cand);
      if (fc < fm) {
        m = cand;
        fm = fc;
        break;
      }
      step *= 0.5;
    }
    if (step <= 1e-18) break;
  }
  return m;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  if (a.size() != b.size()) throw DimensionError("max_rel_error: length mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

}  // namespace sdl
