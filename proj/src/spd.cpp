#include "sdl/spd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "sdl/util.hpp"

namespace sdl {

namespace {

constexpr double kEigFloor = 1e-12;

void check_symmetric(const Eigen::MatrixXd& m, double tol, const char* what) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol) throw InvariantError(std::string(what) + ": asymmetry exceeds tolerance");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct SymEig {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

SymEig sym_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw NumericError("symmetric eigendecomposition failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

Eigen::MatrixXd apply_spectral(const SymEig& eig, double (*fn)(double)) {
  Eigen::VectorXd vals = eig.values;
  for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = fn(std::max(vals[i], kEigFloor));
  return symmetrize(eig.vectors * vals.asDiagonal() * eig.vectors.transpose());
}

double fn_sqrt(double x) { return std::sqrt(x); }
double fn_inv_sqrt(double x) { return 1.0 / std::sqrt(x); }
double fn_inv(double x) { return 1.0 / x; }
double fn_log(double x) { return std::log(x); }

Eigen::MatrixXd sym_expm(const Eigen::MatrixXd& m) {
  const SymEig eig = sym_eig(m);
  Eigen::VectorXd vals = eig.values.array().exp();
  return symmetrize(eig.vectors * vals.asDiagonal() * eig.vectors.transpose());
}

}  // namespace

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& entries) {
  check_symmetric(entries, kSymTolerance, "SpdMatrix");
  m_ = symmetrize(entries);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("SpdMatrix: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InvariantError("SpdMatrix: smallest eigenvalue is not positive");
}

SpdMatrix SpdMatrix::identity(Eigen::Index n) { return SpdMatrix(Eigen::MatrixXd::Identity(n, n)); }

TangentMatrix::TangentMatrix(const Eigen::MatrixXd& entries) {
  check_symmetric(entries, kSymTolerance, "TangentMatrix");
  m_ = symmetrize(entries);
}

TangentMatrix TangentMatrix::zero(Eigen::Index n) { return TangentMatrix(Eigen::MatrixXd::Zero(n, n)); }

Eigen::Index check_same_dim(const SpdSet& set) {
  if (set.empty()) throw DimensionError("SPD set is empty");
  const Eigen::Index n = set.front().dim();
  for (const auto& x : set) {
    if (x.dim() != n) throw DimensionError("SPD set members have differing dimensions");
  }
  return n;
}

SpdMatrix spd_sqrt(const SpdMatrix& x) { return SpdMatrix(apply_spectral(sym_eig(x.matrix()), fn_sqrt)); }

SpdMatrix spd_inv_sqrt(const SpdMatrix& x) {
  return SpdMatrix(apply_spectral(sym_eig(x.matrix()), fn_inv_sqrt));
}

SpdMatrix spd_inverse(const SpdMatrix& x) { return SpdMatrix(apply_spectral(sym_eig(x.matrix()), fn_inv)); }

SpdMatrix exp_map(const SpdMatrix& base, const TangentMatrix& v) {
  if (base.dim() != v.dim()) throw DimensionError("exp_map: dimension mismatch");
  const SymEig eig = sym_eig(base.matrix());
  const Eigen::MatrixXd half = apply_spectral(eig, fn_sqrt);
  const Eigen::MatrixXd inv_half = apply_spectral(eig, fn_inv_sqrt);
  const Eigen::MatrixXd inner = sym_expm(inv_half * v.matrix() * inv_half);
  return SpdMatrix(symmetrize(half * inner * half));
}

TangentMatrix log_map(const SpdMatrix& base, const SpdMatrix& target) {
  if (base.dim() != target.dim()) throw DimensionError("log_map: dimension mismatch");
  const SymEig eig = sym_eig(base.matrix());
  const Eigen::MatrixXd half = apply_spectral(eig, fn_sqrt);
  const Eigen::MatrixXd inv_half = apply_spectral(eig, fn_inv_sqrt);
  const Eigen::MatrixXd inner = apply_spectral(sym_eig(inv_half * target.matrix() * inv_half), fn_log);
  return TangentMatrix(symmetrize(half * inner * half));
}

double airm_distance(const SpdMatrix& x, const SpdMatrix& y) {
  if (x.dim() != y.dim()) throw DimensionError("airm_distance: dimension mismatch");
  const Eigen::MatrixXd inv_half = apply_spectral(sym_eig(x.matrix()), fn_inv_sqrt);
  const SymEig inner = sym_eig(inv_half * y.matrix() * inv_half);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < inner.values.size(); ++i) {
    const double l = std::log(std::max(inner.values[i], kEigFloor));
    acc += l * l;
  }
  return std::sqrt(acc);
}

double airm_inner(const SpdMatrix& base, const TangentMatrix& u, const TangentMatrix& v) {
  if (base.dim() != u.dim() || base.dim() != v.dim()) throw DimensionError("airm_inner: dimension mismatch");
  const Eigen::MatrixXd inv = apply_spectral(sym_eig(base.matrix()), fn_inv);
  return (inv * u.matrix() * inv * v.matrix()).trace();
}

double j_divergence(const SpdMatrix& x, const SpdMatrix& y) {
  if (x.dim() != y.dim()) throw DimensionError("j_divergence: dimension mismatch");
  const Eigen::Index n = x.dim();
  const Eigen::MatrixXd xinv = apply_spectral(sym_eig(x.matrix()), fn_inv);
  const Eigen::MatrixXd yinv = apply_spectral(sym_eig(y.matrix()), fn_inv);
  return 0.25 * ((xinv * y.matrix()).trace() + (yinv * x.matrix()).trace() - 2.0 * static_cast<double>(n));
}

SpdMatrix symmetrized_kl_center(const SpdSet& set, const SimplexWeights& w) {
  const Eigen::Index n = check_same_dim(set);
  if (static_cast<Eigen::Index>(set.size()) != w.size())
    throw DimensionError("symmetrized_kl_center: weight length mismatch");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double wi = w[static_cast<Eigen::Index>(i)];
    if (wi == 0.0) continue;
    a += wi * set[i].matrix();
    b += wi * apply_spectral(sym_eig(set[i].matrix()), fn_inv);
  }
  const SymEig eb = sym_eig(b);
  const Eigen::MatrixXd b_half = apply_spectral(eb, fn_sqrt);
  const Eigen::MatrixXd b_inv_half = apply_spectral(eb, fn_inv_sqrt);
  const Eigen::MatrixXd mid = apply_spectral(sym_eig(b_half * a * b_half), fn_sqrt);
  return SpdMatrix(symmetrize(b_inv_half * mid * b_inv_half));
}

SpdKmeansResult spd_kmeans(const SpdSet& set, int k, std::uint64_t seed, int max_iters) {
  const Eigen::Index n_points = static_cast<Eigen::Index>(set.size());
  check_same_dim(set);
  if (k < 1 || static_cast<Eigen::Index>(k) > n_points)
    throw ParameterError("spd_kmeans: k must satisfy 1 <= k <= N");

  Rng rng(seed);
  std::vector<int> center_idx;
  center_idx.push_back(static_cast<int>(rng.index(n_points)));
  std::vector<double> min_div(static_cast<std::size_t>(n_points), std::numeric_limits<double>::infinity());
  while (static_cast<int>(center_idx.size()) < k) {
    const SpdMatrix& last = set[static_cast<std::size_t>(center_idx.back())];
    int best = -1;
    double best_div = -1.0;
    for (Eigen::Index i = 0; i < n_points; ++i) {
      min_div[static_cast<std::size_t>(i)] =
          std::min(min_div[static_cast<std::size_t>(i)], j_divergence(set[static_cast<std::size_t>(i)], last));
      if (min_div[static_cast<std::size_t>(i)] > best_div) {
        best_div = min_div[static_cast<std::size_t>(i)];
        best = static_cast<int>(i);
      }
    }
    center_idx.push_back(best);
  }
  SpdSet centers;
  centers.reserve(static_cast<std::size_t>(k));
  for (int idx : center_idx) centers.push_back(set[static_cast<std::size_t>(idx)]);

  SpdKmeansResult result;
  result.assignments.assign(static_cast<std::size_t>(n_points), -1);
  for (int iter = 1; iter <= max_iters; ++iter) {
    result.iterations = iter;
    std::vector<int> assign(static_cast<std::size_t>(n_points), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (Eigen::Index i = 0; i < n_points; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_j = 0;
      for (int j = 0; j < k; ++j) {
        const double d = j_divergence(set[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)]);
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      assign[static_cast<std::size_t>(i)] = best_j;
    }
    for (int j = 0; j < k; ++j) {
      SpdSet members;
      for (Eigen::Index i = 0; i < n_points; ++i) {
        if (assign[static_cast<std::size_t>(i)] == j) members.push_back(set[static_cast<std::size_t>(i)]);
      }
      if (members.empty()) {
        // Re-seed at the point farthest from this center.
        double far = -1.0;
        Eigen::Index far_i = 0;
        for (Eigen::Index i = 0; i < n_points; ++i) {
          const double d = j_divergence(set[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)]);
          if (d > far) {
            far = d;
            far_i = i;
          }
        }
        centers[static_cast<std::size_t>(j)] = set[static_cast<std::size_t>(far_i)];
        assign[static_cast<std::size_t>(far_i)] = j;
        continue;
      }
      centers[static_cast<std::size_t>(j)] =
          symmetrized_kl_center(members, SimplexWeights::uniform(static_cast<Eigen::Index>(members.size())));
    }
    if (assign == result.assignments) break;
    result.assignments = assign;
  }
  result.centers = centers;
  return result;
}

SpdMatrix make_spd(const Eigen::MatrixXd& sym_psd, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("make_spd: sigma must be positive");
  check_symmetric(sym_psd, SpdMatrix::kSymTolerance, "make_spd");
  const Eigen::MatrixXd s = symmetrize(sym_psd);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw InvariantError("make_spd: input is significantly indefinite");
  Eigen::MatrixXd out = s + sigma * Eigen::MatrixXd::Identity(s.rows(), s.cols());
  // Absorb the allowed -1e-10 slack so construction cannot fail.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(out, Eigen::EigenvaluesOnly);
  if (es2.eigenvalues().minCoeff() <= 0.0)
    out += (1e-10 + kEigFloor) * Eigen::MatrixXd::Identity(s.rows(), s.cols());
  return SpdMatrix(out);
}

}  // namespace sdl
