#pragma once

#include <Eigen/Core>
#include <functional>

#include "sdl/density.hpp"
#include "sdl/spd.hpp"

// Numerical oracles and derivative checks. These deliberately avoid the
// closed-form / analytic paths they are used to verify.
namespace sdl {

// Minimizes sum_i alpha_i KL(f_i, f) over the simplex by plain projected
// gradient descent with backtracking, independent of the mixture closed form.
DiscreteDensity numeric_weighted_kl_center(const DensitySet& set, const SimplexWeights& alpha,
                                           double tol = 1e-13, int max_iters = 200000);

// Minimizes sum_i w_i J(X_i, M) by Riemannian gradient descent with step
// halving, started at the weighted arithmetic mean.
SpdMatrix numeric_symmetrized_center(const SpdSet& set, const SimplexWeights& w, double tol = 1e-12,
                                     int max_iters = 20000);

// Central finite-difference gradient of f at x.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

// max_i |a_i - b_i| / max(|b_i|, floor); the relative error metric used by
// every gradient check in this project.
double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8);

}  // namespace sdl
