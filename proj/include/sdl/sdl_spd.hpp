#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "sdl/sdl_density.hpp"
#include "sdl/spd.hpp"

namespace sdl {

// Dictionary of SPD atoms with a shared dimension.
class SpdDictionary {
 public:
  explicit SpdDictionary(std::vector<SpdMatrix> atoms);

  const std::vector<SpdMatrix>& atoms() const { return atoms_; }
  const SpdMatrix& atom(Eigen::Index j) const { return atoms_[static_cast<std::size_t>(j)]; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(atoms_.size()); }
  Eigen::Index dim() const { return atoms_.front().dim(); }

 private:
  std::vector<SpdMatrix> atoms_;
};

struct SpdFitReport {
  std::vector<double> objective_trace;
  double final_objective = 0.0;
  double sparsity = 0.0;
  double mean_airm_error = 0.0;  // mean affine-invariant reconstruction distance
  int iterations = 0;
  double wall_time_s = 0.0;
  bool converged = false;
};

// Reconstruction of a data point from the dictionary: the symmetrized
// weighted KL-center of the atoms.
SpdMatrix reconstruct_spd(const SpdDictionary& dict, const SimplexWeights& w);

// sum_i J(X_i, reconstruct(C, w_i)).
double objective_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes);

// Unconstrained extension at raw nonnegative weight rows (finite differences,
// solver internals).
double objective_spd_raw(const SpdSet& data, const SpdDictionary& dict, const Eigen::MatrixXd& weights);

// dE/dw_ij by the chain rule through A = sum w C / s and B = sum w C^{-1} / s,
// with matrix square-root differentials solved via the Lyapunov relation.
Eigen::MatrixXd weight_gradient_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes);

// Riemannian gradient of the objective at atom j under the affine-invariant
// metric: C_j * (Euclidean gradient) * C_j.
TangentMatrix atom_riemannian_gradient(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes,
                                       Eigen::Index j);

// All atoms at once (single backward pass over the samples); returns the
// Euclidean gradients, one symmetric matrix per atom.
std::vector<Eigen::MatrixXd> atom_euclidean_gradients(const SpdSet& data, const SpdDictionary& dict,
                                                      const CodeMatrix& codes);

// Per-sample accelerated projected gradient coding with the dictionary fixed.
CodeMatrix sparse_code_spd(const SpdSet& data, const SpdDictionary& dict, const SdlConfig& config,
                           const CodeMatrix* warm_start = nullptr);

struct SpdLearnResult {
  SpdDictionary dictionary;
  CodeMatrix codes;
  SpdFitReport report;
};

using SpdObserver = std::function<void(int iter, double objective, const SpdDictionary&, const CodeMatrix&)>;

// Alternating accelerated fit on P_n: k-means initialization, random
// row-normalized codes, per-iteration accelerated weight step and Riemannian
// accelerated atom step sharing one lambda/gamma schedule, stop on
// |E - E_old| < tol, then a final coding polish.
SpdLearnResult learn_spd(const SpdSet& data, const SdlConfig& config, const SpdObserver& observer = {});

}  // namespace sdl
