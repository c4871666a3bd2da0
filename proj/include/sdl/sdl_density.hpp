#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdl/density.hpp"
#include "sdl/simplex.hpp"

namespace sdl {

enum class Divergence { kl, hellinger };

std::string to_string(Divergence d);
Divergence divergence_from_string(const std::string& s);

struct SdlConfig {
  int num_atoms = 8;
  double eta = 0.1;
  double tol = 1e-8;
  int max_iters = 500;
  Divergence divergence = Divergence::kl;
  double smoothing_eps = 1e-10;
  std::uint64_t seed = 0;
  double sparsity_threshold = 0.01;
  bool backtracking = true;

  static SdlConfig density_defaults() { return SdlConfig{}; }
  static SdlConfig spd_defaults() {
    SdlConfig c;
    c.eta = 0.01;
    c.max_iters = 300;
    return c;
  }

  void validate() const;
};

// Dictionary of strictly positive (smoothed) densities with a shared bin count.
class DensityDictionary {
 public:
  explicit DensityDictionary(std::vector<DiscreteDensity> atoms);

  static DensityDictionary from_matrix(const Eigen::MatrixXd& rows);

  const std::vector<DiscreteDensity>& atoms() const { return atoms_; }
  const DiscreteDensity& atom(Eigen::Index j) const { return atoms_[static_cast<std::size_t>(j)]; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(atoms_.size()); }
  Eigen::Index bins() const { return atoms_.front().bins(); }

  // r x k matrix, one atom per row.
  Eigen::MatrixXd as_matrix() const;

 private:
  std::vector<DiscreteDensity> atoms_;
};

// N x r row-stochastic nonnegative code weights.
class CodeMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-8;

  explicit CodeMatrix(Eigen::MatrixXd weights);

  const Eigen::MatrixXd& weights() const { return w_; }
  Eigen::Index samples() const { return w_.rows(); }
  Eigen::Index atoms() const { return w_.cols(); }
  Eigen::VectorXd row(Eigen::Index i) const { return w_.row(i).transpose(); }

 private:
  Eigen::MatrixXd w_;
};

struct FitReport {
  std::vector<double> objective_trace;
  double final_objective = 0.0;
  double sparsity = 0.0;  // percent of entries <= threshold
  int iterations = 0;
  double wall_time_s = 0.0;
  bool converged = false;
};

struct KktSample {
  double dual_estimate = 0.0;    // r_i: mean gradient over the active set
  double active_spread = 0.0;    // max_{j active} |dE/dw_ij - r_i|
  double inactive_slack = 0.0;   // min_{j inactive} (dE/dw_ij - r_i); +inf if none
  double surrogate_dual = 0.0;   // sum_j w_ij D(f_i, g_j)
  std::vector<int> active_set;
  bool degenerate = false;  // empty active set
};

struct KktReport {
  std::vector<KktSample> samples;
  Eigen::MatrixXd divergences;   // D(f_i, g_j), N x r
  double objective = 0.0;        // E at (G, W)
  double surrogate_bound = 0.0;  // sum_i surrogate_dual; E <= bound (Jensen)
};

// sum_i D(f_i, sum_j w_ij g_j) with D = KL or squared Hellinger.
double objective_density(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                         Divergence div);

// Unconstrained extension evaluated at raw weight rows (used by solvers and
// finite-difference checks); atoms given as an r x k row matrix.
double objective_density_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                             const Eigen::MatrixXd& weights, Divergence div);

// dE/dw_ij; KL: -sum_x f_i g_j / fhat_i, Hellinger: -(1/2) sum_x sqrt(f_i) g_j / sqrt(fhat_i).
Eigen::MatrixXd code_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div);

// dE/dg_j(x); KL: -sum_i w_ij f_i(x) / fhat_i(x).
Eigen::MatrixXd atom_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div);

// Raw-matrix variants for solver internals and gradient checking.
Eigen::MatrixXd code_gradient_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                                  const Eigen::MatrixXd& weights, Divergence div);
Eigen::MatrixXd atom_gradient_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                                  const Eigen::MatrixXd& weights, Divergence div);

// Sparse coding with the dictionary held fixed: per-sample accelerated
// projected gradient on the simplex. Starts from uniform rows unless a
// warm start is given.
CodeMatrix sparse_code_density(const DensitySet& data, const DensityDictionary& dict, const SdlConfig& config,
                               const CodeMatrix* warm_start = nullptr);

struct DensityLearnResult {
  DensityDictionary dictionary;
  CodeMatrix codes;
  FitReport report;
};

using DensityObserver =
    std::function<void(int iter, double objective, const DensityDictionary&, const CodeMatrix&)>;

// Full alternating fit: KL k-means atom initialization, random row-normalized
// codes, then alternating coding passes and accelerated projected atom
// updates until |E - E_old| < tol.
DensityLearnResult learn_density(const DensitySet& data, const SdlConfig& config,
                                 const DensityObserver& observer = {});

// KL-geometry k-means used for atom initialization (assignment by
// KL(f_i, c_j), mixture centroids, farthest-point seeding).
std::vector<DiscreteDensity> density_kmeans(const DensitySet& data, int k, std::uint64_t seed,
                                            int max_iters, double smoothing_eps);

// KKT stationarity diagnostics of the simplex-constrained coding problem.
KktReport kkt_report(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                     double threshold, Divergence div = Divergence::kl);

// Percentage of code entries <= threshold.
double sparsity_percent(const CodeMatrix& codes, double threshold);

}  // namespace sdl
