#include "sdl/reference.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace sdl::ref {

namespace {

double term(double f, double fhat, Divergence div) {
  if (div == Divergence::kl) {
    if (f <= 0.0) return 0.0;
    if (fhat <= 0.0) return std::numeric_limits<double>::infinity();
    return f * std::log(f / fhat);
  }
  return -std::sqrt(f * fhat);
}

}  // namespace

double objective_density(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                         Divergence div) {
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = codes.atoms();
  const Eigen::Index k = dict.bins();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sample = div == Divergence::kl ? 0.0 : 1.0;
    for (Eigen::Index x = 0; x < k; ++x) {
      double fhat = 0.0;
      for (Eigen::Index j = 0; j < r; ++j) fhat += codes.weights()(i, j) * dict.atom(j)[x];
      sample += term(data[static_cast<std::size_t>(i)][x], fhat, div);
    }
    total += sample;
  }
  return total;
}

Eigen::MatrixXd code_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div) {
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = codes.atoms();
  const Eigen::Index k = dict.bins();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      double acc = 0.0;
      for (Eigen::Index x = 0; x < k; ++x) {
        double fhat = 0.0;
        for (Eigen::Index l = 0; l < r; ++l) fhat += codes.weights()(i, l) * dict.atom(l)[x];
        const double f = data[static_cast<std::size_t>(i)][x];
        if (div == Divergence::kl) {
          if (f > 0.0) acc -= f * dict.atom(j)[x] / fhat;
        } else {
          if (f > 0.0) acc -= 0.5 * std::sqrt(f) * dict.atom(j)[x] / std::sqrt(fhat);
        }
      }
      grad(i, j) = acc;
    }
  }
  return grad;
}

Eigen::MatrixXd atom_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div) {
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = codes.atoms();
  const Eigen::Index k = dict.bins();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(r, k);
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index x = 0; x < k; ++x) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double fhat = 0.0;
        for (Eigen::Index l = 0; l < r; ++l) fhat += codes.weights()(i, l) * dict.atom(l)[x];
        const double f = data[static_cast<std::size_t>(i)][x];
        if (div == Divergence::kl) {
          if (f > 0.0) acc -= codes.weights()(i, j) * f / fhat;
        } else {
          if (f > 0.0) acc -= 0.5 * codes.weights()(i, j) * std::sqrt(f) / std::sqrt(fhat);
        }
      }
      grad(j, x) = acc;
    }
  }
  return grad;
}

double objective_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes) {
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = codes.atoms();
  const Eigen::Index d = dict.dim();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
    double s = 0.0;
    for (Eigen::Index j = 0; j < r; ++j) {
      const double w = codes.weights()(i, j);
      s += w;
      a += w * dict.atom(j).matrix();
      b += w * dict.atom(j).matrix().inverse();
    }
    a /= s;
    b /= s;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(b);
    const Eigen::MatrixXd b_half = eb.operatorSqrt();
    const Eigen::MatrixXd b_inv_half = eb.operatorInverseSqrt();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(b_half * a * b_half);
    const Eigen::MatrixXd m = b_inv_half * et.operatorSqrt() * b_inv_half;
    const Eigen::MatrixXd& x = data[static_cast<std::size_t>(i)].matrix();
    total += 0.25 * ((x.inverse() * m).trace() + (m.inverse() * x).trace() - 2.0 * static_cast<double>(d));
  }
  return total;
}

CodeMatrix sparse_code_density(const DensitySet& data, const DensityDictionary& dict, const SdlConfig& config) {
  config.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index r = dict.size();
  const Eigen::MatrixXd atom_rows = dict.as_matrix();
  SimplexSolveOptions opt;
  opt.eta = config.eta;
  opt.tol = std::max(config.tol * 1e-2, 1e-14);
  opt.max_iters = std::max(config.max_iters, 1000);
  opt.backtracking = config.backtracking;
  Eigen::MatrixXd out(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd& f = data[static_cast<std::size_t>(i)].values();
    auto obj = [&](const Eigen::VectorXd& w) {
      const Eigen::VectorXd fhat = atom_rows.transpose() * w;
      double acc = config.divergence == Divergence::kl ? 0.0 : 1.0;
      for (Eigen::Index x = 0; x < f.size(); ++x) acc += term(f[x], fhat[x], config.divergence);
      return acc;
    };
    auto grad = [&](const Eigen::VectorXd& w) {
      const Eigen::VectorXd fhat = atom_rows.transpose() * w;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(r);
      for (Eigen::Index j = 0; j < r; ++j) {
        for (Eigen::Index x = 0; x < f.size(); ++x) {
          if (f[x] <= 0.0) continue;
          if (config.divergence == Divergence::kl)
            g[j] -= f[x] * atom_rows(j, x) / fhat[x];
          else
            g[j] -= 0.5 * std::sqrt(f[x]) * atom_rows(j, x) / std::sqrt(fhat[x]);
        }
      }
      return g;
    };
    out.row(i) =
        minimize_on_simplex(Eigen::VectorXd::Constant(r, 1.0 / static_cast<double>(r)), obj, grad, opt)
            .x.transpose();
  }
  return CodeMatrix(out);
}

}  // namespace sdl::ref
