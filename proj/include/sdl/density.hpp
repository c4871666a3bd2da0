#pragma once

#include <Eigen/Core>
#include <vector>

#include "sdl/errors.hpp"

namespace sdl {

// A discrete probability density: k nonnegative masses summing to one.
class DiscreteDensity {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit DiscreteDensity(Eigen::VectorXd values);

  static DiscreteDensity uniform(Eigen::Index bins);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index bins() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

 private:
  Eigen::VectorXd values_;
};

using DensitySet = std::vector<DiscreteDensity>;

// Nonnegative mixture weights summing to one.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit SimplexWeights(Eigen::VectorXd alpha);

  static SimplexWeights uniform(Eigen::Index n);
  static SimplexWeights one_hot(Eigen::Index n, Eigen::Index hot);

  const Eigen::VectorXd& values() const { return alpha_; }
  Eigen::Index size() const { return alpha_.size(); }
  double operator[](Eigen::Index i) const { return alpha_[i]; }

 private:
  Eigen::VectorXd alpha_;
};

// Shared bin count of a nonempty set; throws DimensionError on mismatch.
Eigen::Index check_same_bins(const DensitySet& set);

// KL(f, g) = sum_x f(x) log(f(x)/g(x)) in nats, with 0 log(0/.) = 0.
// Returns +infinity when f has mass on a bin where g has none.
double kl_divergence(const DiscreteDensity& f, const DiscreteDensity& g);

// lp norm of (KL(f_1,f), ..., KL(f_N,f)); p = infinity gives the maximum.
double kl_divergence_lp(const DensitySet& set, const DiscreteDensity& f, double p);

// Squared Hellinger distance 1 - sum_x sqrt(f(x) g(x)), in [0, 1].
double hellinger_sq(const DiscreteDensity& f, const DiscreteDensity& g);

// Shannon entropy -sum f log f in nats.
double shannon_entropy(const DiscreteDensity& f);

// H(sum_i alpha_i f_i) - sum_i alpha_i H(f_i); nonnegative by concavity.
double jensen_shannon_divergence(const DensitySet& set, const SimplexWeights& alpha);

// sum_i alpha_i f_i, renormalized exactly.
DiscreteDensity mixture(const DensitySet& set, const SimplexWeights& alpha);

// Minimizer of sum_i alpha_i KL(f_i, .): the mixture itself.
DiscreteDensity weighted_kl_center(const DensitySet& set, const SimplexWeights& alpha);

struct KlCenterResult {
  DiscreteDensity center;
  SimplexWeights weights;
  double jsd = 0.0;       // value attained at the returned weights
  double residual = 0.0;  // ||P(alpha + grad) - alpha|| at exit
  int iterations = 0;
  bool converged = false;  // false = residual still above tol at max_iters
};

// KL-center of the set: maximizes the Jensen-Shannon divergence over the
// mixture weights by accelerated projected gradient ascent, then mixes.
KlCenterResult kl_center(const DensitySet& set, double tol, int max_iters = 20000);

// (f + eps) / (1 + k eps): strictly positive, still sums to one.
DiscreteDensity smooth_density(const DiscreteDensity& f, double eps);

// Total variation distance between two densities.
double tv_distance(const DiscreteDensity& p, const DiscreteDensity& q);

}  // namespace sdl
