#include "sdl/sdl_spd.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "sdl/util.hpp"

namespace sdl {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kEigFloor = 1e-12;
constexpr double kConditionGuard = 1e12;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct SymEig {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;  // clamped at kEigFloor
  bool clamped = false;

  Eigen::MatrixXd apply(double (*fn)(double)) const {
    Eigen::VectorXd v = values;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = fn(v[i]);
    return symmetrize(vectors * v.asDiagonal() * vectors.transpose());
  }
};

SymEig sym_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw NumericError("sdl_spd: eigendecomposition failed");
  SymEig out{es.eigenvectors(), es.eigenvalues()};
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (out.values[i] < kEigFloor) {
      out.values[i] = kEigFloor;
      out.clamped = true;
    }
  }
  return out;
}

double fn_sqrt(double x) { return std::sqrt(x); }
double fn_inv_sqrt(double x) { return 1.0 / std::sqrt(x); }
double fn_inv(double x) { return 1.0 / x; }

// Solves P X + X P = V for symmetric V, with P given by its eigendecomposition.
// Self-adjoint in the trace inner product, which the backward pass relies on.
Eigen::MatrixXd lyapunov_solve(const SymEig& p, const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd vt = p.vectors.transpose() * v * p.vectors;
  Eigen::MatrixXd xt(vt.rows(), vt.cols());
  for (Eigen::Index i = 0; i < vt.rows(); ++i) {
    for (Eigen::Index j = 0; j < vt.cols(); ++j) xt(i, j) = vt(i, j) / (p.values[i] + p.values[j]);
  }
  return symmetrize(p.vectors * xt * p.vectors.transpose());
}

// Forward pass of the closed-form center M = R S R with R = B^{-1/2} and
// S = sqrt(B^{1/2} A B^{1/2}); keeps the two eigendecompositions needed by
// the Lyapunov solves of the backward pass.
struct CenterCache {
  double weight_sum = 0.0;
  Eigen::MatrixXd a, b;
  Eigen::MatrixXd b_half, r;  // B^{1/2}, B^{-1/2}
  Eigen::MatrixXd s, m;       // sqrt(B^{1/2} A B^{1/2}), center
  SymEig eig_b_half;          // eigensystem of B^{1/2}
  SymEig eig_s;               // eigensystem of S
  bool ill_conditioned = false;
};

CenterCache center_forward(const std::vector<Eigen::MatrixXd>& atoms,
                           const std::vector<Eigen::MatrixXd>& atom_invs, const Eigen::VectorXd& w) {
  const Eigen::Index r = static_cast<Eigen::Index>(atoms.size());
  const Eigen::Index n = atoms.front().rows();
  CenterCache c;
  c.weight_sum = w.sum();
  if (!(c.weight_sum > 0.0)) throw NumericError("spd center: weights sum to zero");
  c.a = Eigen::MatrixXd::Zero(n, n);
  c.b = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < r; ++j) {
    if (w[j] == 0.0) continue;
    c.a += w[j] * atoms[static_cast<std::size_t>(j)];
    c.b += w[j] * atom_invs[static_cast<std::size_t>(j)];
  }
  c.a /= c.weight_sum;
  c.b /= c.weight_sum;
  const SymEig eb = sym_eig(c.b);
  c.ill_conditioned = eb.values.maxCoeff() / eb.values.minCoeff() > kConditionGuard || eb.clamped;
  c.b_half = eb.apply(fn_sqrt);
  c.r = eb.apply(fn_inv_sqrt);
  // Eigensystem of B^{1/2} shares eigenvectors with B.
  c.eig_b_half = SymEig{eb.vectors, eb.values.array().sqrt().matrix()};
  const Eigen::MatrixXd t = symmetrize(c.b_half * c.a * c.b_half);
  const SymEig et = sym_eig(t);
  c.ill_conditioned = c.ill_conditioned || et.values.maxCoeff() / et.values.minCoeff() > kConditionGuard;
  c.s = et.apply(fn_sqrt);
  c.eig_s = SymEig{et.vectors, et.values.array().sqrt().matrix()};
  c.m = symmetrize(c.r * c.s * c.r);
  return c;
}

// Pulls a sensitivity G = dE/dM back to dE/dA and dE/dB.
void center_backward(const CenterCache& c, const Eigen::MatrixXd& g, Eigen::MatrixXd* ga,
                     Eigen::MatrixXd* gb) {
  const Eigen::MatrixXd u_r = c.s * c.r * g + g * c.r * c.s;
  const Eigen::MatrixXd u_s = c.r * g * c.r;
  const Eigen::MatrixXd w_t = lyapunov_solve(c.eig_s, u_s);
  *ga = symmetrize(c.b_half * w_t * c.b_half);
  const Eigen::MatrixXd u_bhalf = c.a * c.b_half * w_t + w_t * c.b_half * c.a - c.r * u_r * c.r;
  *gb = lyapunov_solve(c.eig_b_half, symmetrize(u_bhalf));
}

// J(X, M) and its derivative in M: dJ/dM = (X^{-1} - M^{-1} X M^{-1}) / 4.
double j_value(const Eigen::MatrixXd& x_inv, const Eigen::MatrixXd& x, const Eigen::MatrixXd& m,
               const Eigen::MatrixXd& m_inv) {
  const double n = static_cast<double>(x.rows());
  return 0.25 * ((x_inv * m).trace() + (m_inv * x).trace() - 2.0 * n);
}

struct DictContext {
  std::vector<Eigen::MatrixXd> atoms;
  std::vector<Eigen::MatrixXd> atom_invs;

  explicit DictContext(const SpdDictionary& dict) {
    atoms.reserve(static_cast<std::size_t>(dict.size()));
    atom_invs.reserve(static_cast<std::size_t>(dict.size()));
    for (Eigen::Index j = 0; j < dict.size(); ++j) {
      atoms.push_back(dict.atom(j).matrix());
      atom_invs.push_back(sym_eig(dict.atom(j).matrix()).apply(fn_inv));
    }
  }
};

double sample_objective(const DictContext& dc, const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_inv,
                        const Eigen::VectorXd& w) {
  const CenterCache c = center_forward(dc.atoms, dc.atom_invs, w);
  const Eigen::MatrixXd m_inv = sym_eig(c.m).apply(fn_inv);
  return j_value(x_inv, x, c.m, m_inv);
}

// Gradient of one sample's term with respect to its weight row; optionally
// accumulates the per-atom Euclidean gradient contributions.
Eigen::VectorXd sample_weight_gradient(const DictContext& dc, const Eigen::MatrixXd& x,
                                       const Eigen::MatrixXd& x_inv, const Eigen::VectorXd& w,
                                       std::vector<Eigen::MatrixXd>* atom_grads, bool* warned) {
  const Eigen::Index r = static_cast<Eigen::Index>(dc.atoms.size());
  const CenterCache c = center_forward(dc.atoms, dc.atom_invs, w);
  if (c.ill_conditioned && warned && !*warned) {
    *warned = true;
    log_info("spd gradient: center condition number beyond guard, eigenvalues clamped");
  }
  const Eigen::MatrixXd m_inv = sym_eig(c.m).apply(fn_inv);
  const Eigen::MatrixXd g = 0.25 * (x_inv - m_inv * x * m_inv);
  Eigen::MatrixXd ga, gb;
  center_backward(c, symmetrize(g), &ga, &gb);
  Eigen::VectorXd grad(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const Eigen::MatrixXd da = (dc.atoms[static_cast<std::size_t>(j)] - c.a) / c.weight_sum;
    const Eigen::MatrixXd db = (dc.atom_invs[static_cast<std::size_t>(j)] - c.b) / c.weight_sum;
    grad[j] = (ga.array() * da.array()).sum() + (gb.array() * db.array()).sum();
  }
  if (atom_grads) {
    for (Eigen::Index j = 0; j < r; ++j) {
      const double wj = w[j] / c.weight_sum;
      if (wj == 0.0) continue;
      const Eigen::MatrixXd& cj_inv = dc.atom_invs[static_cast<std::size_t>(j)];
      (*atom_grads)[static_cast<std::size_t>(j)] += wj * (ga - cj_inv * gb * cj_inv);
    }
  }
  return grad;
}

struct ParallelGuard {
  bool failed = false;
  std::string message;

  template <class Fn>
  void run(Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical(sdl_spd_guard)
#endif
      {
        failed = true;
        message = e.what();
      }
    }
  }

  void rethrow() const {
    if (failed) throw NumericError(message);
  }
};

void check_shapes(const SpdSet& data, const SpdDictionary& dict, const Eigen::MatrixXd& weights) {
  if (static_cast<Eigen::Index>(data.size()) != weights.rows() || dict.size() != weights.cols())
    throw DimensionError("sdl_spd: code matrix shape mismatch");
  if (check_same_dim(data) != dict.dim()) throw DimensionError("sdl_spd: matrix dimension mismatch");
}

// One full coding pass (per-sample accelerated projected gradient), warm
// started; rows are solved well below the outer tolerance.
Eigen::MatrixXd code_rows(const SpdSet& data, const DictContext& dc, const Eigen::MatrixXd& start,
                          const SdlConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  SimplexSolveOptions opt;
  opt.eta = config.eta;
  opt.tol = std::max(config.tol * 1e-2, 1e-14);
  opt.max_iters = std::max(config.max_iters, 1000);
  opt.backtracking = config.backtracking;
  Eigen::MatrixXd out(n, start.cols());
  ParallelGuard guard;
  bool warned = false;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::MatrixXd& x = data[static_cast<std::size_t>(i)].matrix();
      const Eigen::MatrixXd x_inv = sym_eig(x).apply(fn_inv);
      auto obj = [&](const Eigen::VectorXd& w) { return sample_objective(dc, x, x_inv, w); };
      auto grad = [&](const Eigen::VectorXd& w) {
        return sample_weight_gradient(dc, x, x_inv, w, nullptr, &warned);
      };
      out.row(i) = minimize_on_simplex(start.row(i).transpose(), obj, grad, opt).x.transpose();
    });
  }
  guard.rethrow();
  return out;
}

Eigen::MatrixXd random_normalized_rows(Eigen::Index n, Eigen::Index r, Rng& rng) {
  Eigen::MatrixXd w(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row(r);
    for (Eigen::Index j = 0; j < r; ++j) row[j] = rng.uniform();
    const double s = row.sum();
    if (s > 0.0)
      row /= s;
    else
      row.setConstant(1.0 / static_cast<double>(r));
    w.row(i) = row.transpose();
  }
  return w;
}

}  // namespace

SpdDictionary::SpdDictionary(std::vector<SpdMatrix> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw InvariantError("SpdDictionary: needs at least one atom");
  const Eigen::Index n = atoms_.front().dim();
  for (const auto& a : atoms_) {
    if (a.dim() != n) throw DimensionError("SpdDictionary: atoms have differing dimensions");
  }
}

SpdMatrix reconstruct_spd(const SpdDictionary& dict, const SimplexWeights& w) {
  if (w.size() != dict.size()) throw DimensionError("reconstruct_spd: weight length mismatch");
  return symmetrized_kl_center(dict.atoms(), w);
}

double objective_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes) {
  check_shapes(data, dict, codes.weights());
  return objective_spd_raw(data, dict, codes.weights());
}

double objective_spd_raw(const SpdSet& data, const SpdDictionary& dict, const Eigen::MatrixXd& weights) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const DictContext dc(dict);
  Eigen::VectorXd terms(n);
  ParallelGuard guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::MatrixXd& x = data[static_cast<std::size_t>(i)].matrix();
      const Eigen::MatrixXd x_inv = sym_eig(x).apply(fn_inv);
      terms[i] = sample_objective(dc, x, x_inv, weights.row(i).transpose());
    });
  }
  guard.rethrow();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += terms[i];
  return acc;
}

namespace {

// Debug fallback: central finite differences of the raw objective. Only
// sensible at small dimension; enabled via SDL_SPD_FD_GRADIENT=1.
bool fd_gradient_requested() {
  const char* env = std::getenv("SDL_SPD_FD_GRADIENT");
  return env && std::string(env) == "1";
}

Eigen::MatrixXd weight_gradient_fd(const SpdSet& data, const SpdDictionary& dict,
                                   const Eigen::MatrixXd& weights) {
  const double h = 1e-5;
  Eigen::MatrixXd grad(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    SpdSet one{data[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      Eigen::MatrixXd hi = weights.row(i);
      Eigen::MatrixXd lo = weights.row(i);
      hi(0, j) += h;
      lo(0, j) -= h;
      grad(i, j) = (objective_spd_raw(one, dict, hi) - objective_spd_raw(one, dict, lo)) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace

Eigen::MatrixXd weight_gradient_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes) {
  check_shapes(data, dict, codes.weights());
  if (fd_gradient_requested() && dict.dim() <= 3) {
    log_info("weight_gradient_spd: using the finite-difference debug fallback");
    return weight_gradient_fd(data, dict, codes.weights());
  }
  const Eigen::Index n = codes.samples();
  const DictContext dc(dict);
  Eigen::MatrixXd grad(n, dict.size());
  ParallelGuard guard;
  bool warned = false;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::MatrixXd& x = data[static_cast<std::size_t>(i)].matrix();
      const Eigen::MatrixXd x_inv = sym_eig(x).apply(fn_inv);
      grad.row(i) =
          sample_weight_gradient(dc, x, x_inv, codes.weights().row(i).transpose(), nullptr, &warned)
              .transpose();
    });
  }
  guard.rethrow();
  return grad;
}

std::vector<Eigen::MatrixXd> atom_euclidean_gradients(const SpdSet& data, const SpdDictionary& dict,
                                                      const CodeMatrix& codes) {
  check_shapes(data, dict, codes.weights());
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = dict.size();
  const Eigen::Index dim = dict.dim();
  const DictContext dc(dict);
  // Per-sample contributions gathered in parallel, reduced in index order.
  std::vector<std::vector<Eigen::MatrixXd>> per_sample(
      static_cast<std::size_t>(n),
      std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(r), Eigen::MatrixXd::Zero(dim, dim)));
  ParallelGuard guard;
  bool warned = false;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::MatrixXd& x = data[static_cast<std::size_t>(i)].matrix();
      const Eigen::MatrixXd x_inv = sym_eig(x).apply(fn_inv);
      sample_weight_gradient(dc, x, x_inv, codes.weights().row(i).transpose(),
                             &per_sample[static_cast<std::size_t>(i)], &warned);
    });
  }
  guard.rethrow();
  std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(r), Eigen::MatrixXd::Zero(dim, dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      grads[static_cast<std::size_t>(j)] += per_sample[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  for (auto& g : grads) g = symmetrize(g);
  return grads;
}

TangentMatrix atom_riemannian_gradient(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes,
                                       Eigen::Index j) {
  if (j < 0 || j >= dict.size()) throw ParameterError("atom_riemannian_gradient: atom index out of range");
  const std::vector<Eigen::MatrixXd> euc = atom_euclidean_gradients(data, dict, codes);
  const Eigen::MatrixXd& c = dict.atom(j).matrix();
  return TangentMatrix(symmetrize(c * euc[static_cast<std::size_t>(j)] * c));
}

CodeMatrix sparse_code_spd(const SpdSet& data, const SpdDictionary& dict, const SdlConfig& config,
                           const CodeMatrix* warm_start) {
  config.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index r = dict.size();
  if (check_same_dim(data) != dict.dim()) throw DimensionError("sparse_code_spd: dimension mismatch");
  Eigen::MatrixXd start;
  if (warm_start) {
    if (warm_start->samples() != n || warm_start->atoms() != r)
      throw DimensionError("sparse_code_spd: warm start shape mismatch");
    start = warm_start->weights();
  } else {
    start = Eigen::MatrixXd::Constant(n, r, 1.0 / static_cast<double>(r));
  }
  const DictContext dc(dict);
  return CodeMatrix(code_rows(data, dc, start, config));
}

SpdLearnResult learn_spd(const SpdSet& data, const SdlConfig& config, const SpdObserver& observer) {
  config.validate();
  const auto t0 = Clock::now();
  const Eigen::Index dim = check_same_dim(data);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int r = config.num_atoms;
  if (n < r)
    log_info("learn_spd: fewer samples than atoms (N=" + std::to_string(n) + ", r=" + std::to_string(r) + ")");

  Rng rng(config.seed);
  const std::uint64_t kmeans_seed = rng.next_u64();
  SpdSet atoms = spd_kmeans(data, std::min<int>(r, static_cast<int>(n)), kmeans_seed, 50).centers;
  while (static_cast<int>(atoms.size()) < r) {
    const SpdMatrix& x = data[static_cast<std::size_t>(rng.index(n))];
    Eigen::MatrixXd v(dim, dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
      for (Eigen::Index b = a; b < dim; ++b) {
        v(a, b) = 0.05 * rng.normal();
        v(b, a) = v(a, b);
      }
    }
    atoms.push_back(exp_map(x, TangentMatrix(v)));
  }

  Eigen::MatrixXd weights = random_normalized_rows(n, r, rng);

  auto dict_of = [&](const SpdSet& a) { return SpdDictionary(a); };
  auto objective_at = [&](const SpdSet& a, const Eigen::MatrixXd& w) {
    return objective_spd_raw(data, dict_of(a), w);
  };

  auto notify = [&](int iter, double e, const SpdSet& a, const Eigen::MatrixXd& w) {
    if (observer) observer(iter, e, dict_of(a), CodeMatrix(w));
  };

  SpdFitReport report;
  double e = objective_at(atoms, weights);
  report.objective_trace.push_back(e);
  notify(0, e, atoms, weights);

  // Atom block: a bounded inner loop of Riemannian accelerated steps at fixed
  // codes. Gradient step at the current point, then the momentum combination
  // C_j <- Exp_{nY_j}(gamma * Log_{nY_j}(Y_j)) with Y_j the previous step
  // point; shared backtracked step size, monotone under backtracking.
  auto atom_pass = [&](SpdSet current, const Eigen::MatrixXd& w, int max_steps) {
    SpdSet prev_atoms = current;  // Y^C
    SpdSet best = current;
    double f_prev = objective_at(current, w);
    double best_f = f_prev;
    NesterovSchedule sched;
    double eta = config.eta;
    for (int step = 1; step <= max_steps; ++step) {
      const std::vector<Eigen::MatrixXd> euc =
          atom_euclidean_gradients(data, dict_of(current), CodeMatrix(w));
      std::vector<TangentMatrix> grads;
      grads.reserve(static_cast<std::size_t>(r));
      double grad_norm_sq = 0.0;
      for (int j = 0; j < r; ++j) {
        const Eigen::MatrixXd& c = current[static_cast<std::size_t>(j)].matrix();
        TangentMatrix g(symmetrize(c * euc[static_cast<std::size_t>(j)] * c));
        grad_norm_sq += airm_inner(current[static_cast<std::size_t>(j)], g, g);
        grads.push_back(std::move(g));
      }
      if (!config.backtracking) eta = config.eta;
      SpdSet step_atoms;
      double e_step = 0.0;
      while (true) {
        step_atoms.clear();
        for (int j = 0; j < r; ++j) {
          step_atoms.push_back(exp_map(current[static_cast<std::size_t>(j)],
                                       TangentMatrix(-eta * grads[static_cast<std::size_t>(j)].matrix())));
        }
        e_step = objective_at(step_atoms, w);
        if (!config.backtracking) break;
        if (e_step <= f_prev - 1e-4 * eta * grad_norm_sq || eta <= 1e-18) break;
        eta *= 0.5;
      }
      if (config.backtracking && e_step > f_prev) {
        step_atoms = current;  // no descent direction at this scale; stay put
        e_step = f_prev;
      }
      const double gamma = sched.advance();
      SpdSet comb_atoms;
      for (int j = 0; j < r; ++j) {
        const TangentMatrix lift = log_map(step_atoms[static_cast<std::size_t>(j)],
                                           prev_atoms[static_cast<std::size_t>(j)]);
        comb_atoms.push_back(exp_map(step_atoms[static_cast<std::size_t>(j)],
                                     TangentMatrix(gamma * lift.matrix())));
      }
      if (config.backtracking) {
        const double e_comb = objective_at(comb_atoms, w);
        if (e_comb <= e_step) {
          current = comb_atoms;
        } else {
          current = step_atoms;
          sched.restart();
        }
      } else {
        current = comb_atoms;
      }
      if (e_step < best_f) {
        best_f = e_step;
        best = step_atoms;
      }
      prev_atoms = step_atoms;
      if (std::abs(e_step - f_prev) < config.tol) break;
      f_prev = e_step;
      // Backtracked steps may regrow beyond the configured eta; the Armijo
      // test keeps them safe and flat valleys need the headroom.
      if (config.backtracking) eta = std::min(1e3 * config.eta, 2.0 * eta);
    }
    return config.backtracking ? best : current;
  };

  int iter = 0;
  for (iter = 1; iter <= config.max_iters; ++iter) {
    // Weight block: learn W with the dictionary held fixed (per-sample
    // accelerated projected gradient, warm started).
    weights = code_rows(data, DictContext(dict_of(atoms)), weights, config);

    // Atom block: learn C with W held fixed.
    atoms = atom_pass(atoms, weights, 100);

    const double e_new = objective_at(atoms, weights);
    report.objective_trace.push_back(e_new);
    notify(iter, e_new, atoms, weights);
    if (std::abs(e_new - e) < config.tol) {
      e = e_new;
      report.converged = true;
      break;
    }
    e = e_new;
  }

  // Final coding polish: per-row optima for the final dictionary.
  SpdDictionary dict(atoms);
  CodeMatrix codes = sparse_code_spd(data, dict, config, nullptr);
  {
    CodeMatrix warm(weights);
    CodeMatrix polished = sparse_code_spd(data, dict, config, &warm);
    if (objective_spd(data, dict, polished) < objective_spd(data, dict, codes)) codes = polished;
  }
  const double e_final = objective_spd(data, dict, codes);
  if (e_final != e) {
    report.objective_trace.push_back(e_final);
    notify(std::min(iter, config.max_iters) + 1, e_final, atoms, codes.weights());
  }
  report.final_objective = e_final;
  report.iterations = std::min(iter, config.max_iters);
  report.sparsity = sparsity_percent(codes, config.sparsity_threshold);
  double airm_acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SpdMatrix recon = reconstruct_spd(dict, SimplexWeights(project_to_simplex(codes.row(i))));
    airm_acc += airm_distance(data[static_cast<std::size_t>(i)], recon);
  }
  report.mean_airm_error = airm_acc / static_cast<double>(n);
  report.wall_time_s = seconds_since(t0);
  return {std::move(dict), std::move(codes), std::move(report)};
}

}  // namespace sdl
