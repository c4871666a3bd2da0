#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sdl/density.hpp"
#include "sdl/errors.hpp"

namespace sdl {

// Symmetric positive definite matrix. Construction symmetrizes the input
// after checking max|S - S^t| <= 1e-10 and fails unless the spectrum is
// strictly positive.
class SpdMatrix {
 public:
  static constexpr double kSymTolerance = 1e-10;

  explicit SpdMatrix(const Eigen::MatrixXd& entries);

  static SpdMatrix identity(Eigen::Index n);

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Eigen::MatrixXd m_;
};

using SpdSet = std::vector<SpdMatrix>;

// Symmetric matrix in the tangent space of P_n.
class TangentMatrix {
 public:
  static constexpr double kSymTolerance = 1e-10;

  explicit TangentMatrix(const Eigen::MatrixXd& entries);

  static TangentMatrix zero(Eigen::Index n);

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Eigen::MatrixXd m_;
};

Eigen::Index check_same_dim(const SpdSet& set);

// Matrix functions via symmetric eigendecomposition; eigenvalues are clamped
// at 1e-12 before sqrt/log/inversion.
SpdMatrix spd_sqrt(const SpdMatrix& x);
SpdMatrix spd_inv_sqrt(const SpdMatrix& x);
SpdMatrix spd_inverse(const SpdMatrix& x);

// Affine-invariant exponential map X^{1/2} expm(X^{-1/2} V X^{-1/2}) X^{1/2}.
SpdMatrix exp_map(const SpdMatrix& base, const TangentMatrix& v);

// Inverse of exp_map: X^{1/2} logm(X^{-1/2} Y X^{-1/2}) X^{1/2}.
TangentMatrix log_map(const SpdMatrix& base, const SpdMatrix& target);

// Geodesic distance ||logm(X^{-1/2} Y X^{-1/2})||_F of the affine-invariant
// metric; invariant under congruence X -> G X G^t.
double airm_distance(const SpdMatrix& x, const SpdMatrix& y);

// Affine-invariant inner product tr(X^{-1} U X^{-1} V) at base point X.
double airm_inner(const SpdMatrix& base, const TangentMatrix& u, const TangentMatrix& v);

// Symmetrized KL divergence between zero-mean Gaussians:
// (tr(X^{-1}Y) + tr(Y^{-1}X) - 2n) / 4.
double j_divergence(const SpdMatrix& x, const SpdMatrix& y);

// Closed-form minimizer of sum_i w_i J(X_i, .):
//   sqrt(B^{-1}) sqrt(sqrt(B) A sqrt(B)) sqrt(B^{-1})
// with A, B the weighted means of the X_i and X_i^{-1}.
SpdMatrix symmetrized_kl_center(const SpdSet& set, const SimplexWeights& w);

struct SpdKmeansResult {
  SpdSet centers;
  std::vector<int> assignments;
  int iterations = 0;
};

// Lloyd iteration on P_n: assignment by smallest J-divergence, center update
// by the closed-form symmetrized KL-center with uniform cluster weights.
// Farthest-point seeding under J-divergence from a seeded RNG; an emptied
// cluster is re-seeded at the point farthest from its previous center.
SpdKmeansResult spd_kmeans(const SpdSet& set, int k, std::uint64_t seed, int max_iters = 100);

// S + sigma I for symmetric PSD S (smallest eigenvalue >= -1e-10).
SpdMatrix make_spd(const Eigen::MatrixXd& sym_psd, double sigma);

}  // namespace sdl
