#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "sdl/errors.hpp"

namespace sdl {

// Euclidean projection onto the probability simplex by the sort-and-threshold
// method. Idempotent; a feasible input comes back unchanged.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

// Momentum schedule shared by every accelerated solver in this project:
//   lambda(1) = 1,  lambda(t+1) = (1 + sqrt(1 + 4 lambda(t)^2)) / 2,
//   gamma(t)  = (1 - lambda(t)) / lambda(t+1).
struct NesterovSchedule {
  double lambda = 1.0;

  // Advances lambda and returns gamma for the step just taken.
  double advance() {
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * lambda * lambda));
    const double gamma = (1.0 - lambda) / next;
    lambda = next;
    return gamma;
  }

  void restart() { lambda = 1.0; }
};

struct SimplexSolveOptions {
  double eta = 0.1;
  double tol = 1e-8;
  int max_iters = 500;
  bool backtracking = true;
  double armijo = 1e-4;
  double min_step = 1e-18;
};

struct SimplexSolveResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Accelerated projected gradient descent on the probability simplex.
// obj/grad are evaluated at arbitrary nonnegative near-feasible points (the
// extrapolated momentum point is re-projected before use). Momentum restarts
// whenever a projected step raises the objective; with backtracking the best
// visited iterate is returned, so the result never exceeds obj(x0).
template <class ObjFn, class GradFn>
SimplexSolveResult minimize_on_simplex(const Eigen::VectorXd& x0, ObjFn&& obj, GradFn&& grad,
                                       const SimplexSolveOptions& opt) {
  if (x0.size() == 0) throw ParameterError("minimize_on_simplex: empty vector");
  Eigen::VectorXd x = project_to_simplex(x0);
  if (x.size() == 1) {
    return {x, obj(x), 0, true};
  }
  Eigen::VectorXd x_prev = x;
  Eigen::VectorXd y = x;
  double f_prev = obj(x);
  Eigen::VectorXd best_x = x;
  double best_f = f_prev;
  NesterovSchedule sched;
  SimplexSolveResult out;
  double step = opt.eta;  // persists across iterations under backtracking
  for (int iter = 1; iter <= opt.max_iters; ++iter) {
    out.iterations = iter;
    const Eigen::VectorXd g = grad(y);
    const double fy = obj(y);
    if (!opt.backtracking) step = opt.eta;
    Eigen::VectorXd cand = project_to_simplex(y - step * g);
    double fc = obj(cand);
    if (opt.backtracking) {
      while (step > opt.min_step) {
        const double move = (cand - y).squaredNorm();
        if (move == 0.0 || fy - fc >= opt.armijo * move / step) break;
        step *= 0.5;
        cand = project_to_simplex(y - step * g);
        fc = obj(cand);
      }
    }
    const double moved = (cand - y).norm();
    if (fc > f_prev) sched.restart();
    if (fc < best_f) {
      best_f = fc;
      best_x = cand;
    }
    const double gamma = sched.advance();
    y = project_to_simplex((1.0 - gamma) * cand + gamma * x_prev);
    x_prev = cand;
    const bool stalled = moved <= 1e-13 * (1.0 + cand.norm());
    if (std::abs(fc - f_prev) < opt.tol || stalled) {
      f_prev = fc;
      out.converged = true;
      break;
    }
    f_prev = fc;
    if (opt.backtracking) step = std::min(opt.eta, 2.0 * step);
  }
  if (opt.backtracking) {
    // Polish: plain monotone projected-gradient steps from the best iterate,
    // so the returned point is first-order stationary (the accelerated loop's
    // best-so-far may sit mid-oscillation).
    double step = opt.eta;
    const int polish_iters = std::min(opt.max_iters, 400);
    for (int iter = 0; iter < polish_iters; ++iter) {
      const Eigen::VectorXd g = grad(best_x);
      Eigen::VectorXd cand = project_to_simplex(best_x - step * g);
      double fc = obj(cand);
      while (step > opt.min_step) {
        const double move = (cand - best_x).squaredNorm();
        if (move == 0.0 || best_f - fc >= opt.armijo * move / step) break;
        step *= 0.5;
        cand = project_to_simplex(best_x - step * g);
        fc = obj(cand);
      }
      const double moved = (cand - best_x).norm();
      if (fc >= best_f) break;
      const double gain = best_f - fc;
      best_x = cand;
      best_f = fc;
      // Polish runs to machine-level gains regardless of the solve tolerance;
      // stationarity of the returned point is what the KKT diagnostics see.
      if (moved <= 1e-13 * (1.0 + cand.norm()) || gain <= 1e-15 * (1.0 + std::abs(best_f))) break;
      step = std::min(opt.eta, 2.0 * step);
    }
    out.x = best_x;
    out.objective = best_f;
  } else {
    out.x = x_prev;
    out.objective = f_prev;
  }
  return out;
}

}  // namespace sdl
