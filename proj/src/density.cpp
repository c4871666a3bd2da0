#include "sdl/density.hpp"

#include <cmath>
#include <limits>

#include "sdl/simplex.hpp"
#include "sdl/util.hpp"

namespace sdl {

namespace {

void check_simplex_vector(const Eigen::VectorXd& v, double sum_tol, const char* what) {
  if (v.size() < 1) throw InvariantError(std::string(what) + ": needs at least one entry");
  if (!v.allFinite()) throw InvariantError(std::string(what) + ": non-finite entry");
  if ((v.array() < 0.0).any()) throw InvariantError(std::string(what) + ": negative entry");
  if (std::abs(v.sum() - 1.0) > sum_tol) throw InvariantError(std::string(what) + ": entries do not sum to 1");
}

}  // namespace

DiscreteDensity::DiscreteDensity(Eigen::VectorXd values) : values_(std::move(values)) {
  check_simplex_vector(values_, kSumTolerance, "DiscreteDensity");
}

DiscreteDensity DiscreteDensity::uniform(Eigen::Index bins) {
  if (bins < 1) throw ParameterError("DiscreteDensity::uniform: bins must be >= 1");
  return DiscreteDensity(Eigen::VectorXd::Constant(bins, 1.0 / static_cast<double>(bins)));
}

SimplexWeights::SimplexWeights(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
  check_simplex_vector(alpha_, kSumTolerance, "SimplexWeights");
}

SimplexWeights SimplexWeights::uniform(Eigen::Index n) {
  if (n < 1) throw ParameterError("SimplexWeights::uniform: n must be >= 1");
  return SimplexWeights(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

SimplexWeights SimplexWeights::one_hot(Eigen::Index n, Eigen::Index hot) {
  if (hot < 0 || hot >= n) throw ParameterError("SimplexWeights::one_hot: index out of range");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[hot] = 1.0;
  return SimplexWeights(std::move(v));
}

Eigen::Index check_same_bins(const DensitySet& set) {
  if (set.empty()) throw DimensionError("density set is empty");
  const Eigen::Index k = set.front().bins();
  for (const auto& f : set) {
    if (f.bins() != k) throw DimensionError("density set members have differing bin counts");
  }
  return k;
}

double kl_divergence(const DiscreteDensity& f, const DiscreteDensity& g) {
  if (f.bins() != g.bins()) throw DimensionError("kl_divergence: bin count mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.bins(); ++i) {
    const double fi = f[i];
    if (fi <= 0.0) continue;
    const double gi = g[i];
    if (gi <= 0.0) return std::numeric_limits<double>::infinity();
    acc += fi * std::log(fi / gi);
  }
  return acc;
}

double kl_divergence_lp(const DensitySet& set, const DiscreteDensity& f, double p) {
  if (!(p > 0.0)) throw ParameterError("kl_divergence_lp: p must be positive");
  const Eigen::Index k = check_same_bins(set);
  if (k != f.bins()) throw DimensionError("kl_divergence_lp: bin count mismatch");
  if (std::isinf(p)) {
    double m = 0.0;
    for (const auto& fi : set) m = std::max(m, kl_divergence(fi, f));
    return m;
  }
  double acc = 0.0;
  for (const auto& fi : set) acc += std::pow(kl_divergence(fi, f), p);
  return std::pow(acc, 1.0 / p);
}

double hellinger_sq(const DiscreteDensity& f, const DiscreteDensity& g) {
  if (f.bins() != g.bins()) throw DimensionError("hellinger_sq: bin count mismatch");
  double bc = 0.0;  // Bhattacharyya coefficient
  for (Eigen::Index i = 0; i < f.bins(); ++i) bc += std::sqrt(f[i] * g[i]);
  return 1.0 - bc;
}

double shannon_entropy(const DiscreteDensity& f) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.bins(); ++i) {
    const double fi = f[i];
    if (fi > 0.0) acc -= fi * std::log(fi);
  }
  return acc;
}

double jensen_shannon_divergence(const DensitySet& set, const SimplexWeights& alpha) {
  if (static_cast<Eigen::Index>(set.size()) != alpha.size())
    throw DimensionError("jensen_shannon_divergence: weight length mismatch");
  const DiscreteDensity m = mixture(set, alpha);
  double v = shannon_entropy(m);
  for (std::size_t i = 0; i < set.size(); ++i) v -= alpha[static_cast<Eigen::Index>(i)] * shannon_entropy(set[i]);
  if (v < -1e-9) throw NumericError("jensen_shannon_divergence: negative beyond rounding");
  return std::max(v, 0.0);
}

DiscreteDensity mixture(const DensitySet& set, const SimplexWeights& alpha) {
  const Eigen::Index k = check_same_bins(set);
  if (static_cast<Eigen::Index>(set.size()) != alpha.size())
    throw DimensionError("mixture: weight length mismatch");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < set.size(); ++i) m += alpha[static_cast<Eigen::Index>(i)] * set[i].values();
  m /= m.sum();
  return DiscreteDensity(std::move(m));
}

DiscreteDensity weighted_kl_center(const DensitySet& set, const SimplexWeights& alpha) {
  return mixture(set, alpha);
}

KlCenterResult kl_center(const DensitySet& set, double tol, int max_iters) {
  const Eigen::Index k = check_same_bins(set);
  if (!(tol > 0.0)) throw ParameterError("kl_center: tol must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(set.size());

  // Work on lightly smoothed members so KL(f_i, m) stays finite when alpha
  // drives the mixture off some member's support.
  Eigen::MatrixXd rows(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    rows.row(i) = smooth_density(set[static_cast<std::size_t>(i)], 1e-12).values().transpose();
  }
  Eigen::VectorXd entropies(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = 0.0;
    for (Eigen::Index x = 0; x < k; ++x) h -= rows(i, x) * std::log(rows(i, x));
    entropies[i] = h;
  }
  auto jsd_at = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd m = rows.transpose() * a;
    double h = 0.0;
    for (Eigen::Index x = 0; x < k; ++x) {
      if (m[x] > 0.0) h -= m[x] * std::log(m[x]);
    }
    return h - a.dot(entropies);
  };
  // dJSD/dalpha_i = KL(f_i, m) - 1.
  auto grad_at = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd m = rows.transpose() * a;
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double kl = 0.0;
      for (Eigen::Index x = 0; x < k; ++x) kl += rows(i, x) * std::log(rows(i, x) / m[x]);
      g[i] = kl - 1.0;
    }
    return g;
  };

  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd a_prev = a;
  Eigen::VectorXd y = a;
  double f_prev = jsd_at(a);
  NesterovSchedule sched;
  KlCenterResult result{mixture(set, SimplexWeights::uniform(n)), SimplexWeights::uniform(n)};
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (iter = 1; iter <= max_iters; ++iter) {
    const Eigen::VectorXd g = grad_at(y);
    const double fy = jsd_at(y);
    double step = 1.0;
    Eigen::VectorXd cand = project_to_simplex(y + step * g);
    double fc = jsd_at(cand);
    while (step > 1e-18) {
      const double move = (cand - y).squaredNorm();
      if (move == 0.0 || fc - fy >= 1e-4 * move / step) break;
      step *= 0.5;
      cand = project_to_simplex(y + step * g);
      fc = jsd_at(cand);
    }
    if (fc < f_prev) sched.restart();
    const double gamma = sched.advance();
    y = project_to_simplex((1.0 - gamma) * cand + gamma * a_prev);
    a_prev = cand;
    f_prev = std::max(f_prev, fc);
    a = cand;
    residual = (project_to_simplex(a + grad_at(a)) - a).norm();
    if (residual <= tol) break;
  }
  result.converged = residual <= tol;
  if (!result.converged) {
    log_info("kl_center: residual " + std::to_string(residual) + " above tol after " +
             std::to_string(max_iters) + " iterations");
  }
  result.residual = residual;
  result.iterations = std::min(iter, max_iters);
  result.weights = SimplexWeights(a);
  result.center = mixture(set, result.weights);
  result.jsd = jsd_at(a);
  return result;
}

DiscreteDensity smooth_density(const DiscreteDensity& f, double eps) {
  if (!(eps > 0.0)) throw ParameterError("smooth_density: eps must be positive");
  const double k = static_cast<double>(f.bins());
  Eigen::VectorXd v = (f.values().array() + eps) / (1.0 + k * eps);
  v /= v.sum();
  return DiscreteDensity(std::move(v));
}

double tv_distance(const DiscreteDensity& p, const DiscreteDensity& q) {
  if (p.bins() != q.bins()) throw DimensionError("tv_distance: bin count mismatch");
  return tv_distance(p.values(), q.values());
}

}  // namespace sdl
