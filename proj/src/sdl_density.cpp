#include "sdl/sdl_density.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "sdl/util.hpp"

namespace sdl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Per-sample divergence between f and the raw reconstruction fhat >= 0.
double divergence_term(const Eigen::VectorXd& f, const Eigen::VectorXd& fhat, Divergence div) {
  const Eigen::Index k = f.size();
  if (div == Divergence::kl) {
    double acc = 0.0;
    for (Eigen::Index x = 0; x < k; ++x) {
      if (f[x] <= 0.0) continue;
      if (fhat[x] <= 0.0) return std::numeric_limits<double>::infinity();
      acc += f[x] * std::log(f[x] / fhat[x]);
    }
    return acc;
  }
  double bc = 0.0;
  for (Eigen::Index x = 0; x < k; ++x) bc += std::sqrt(f[x] * fhat[x]);
  return 1.0 - bc;
}

// Gradient of the sample term with respect to the weight row.
Eigen::VectorXd row_gradient(const Eigen::VectorXd& f, const Eigen::MatrixXd& atom_rows,
                             const Eigen::VectorXd& w, Divergence div) {
  const Eigen::VectorXd fhat = atom_rows.transpose() * w;
  Eigen::VectorXd ratio(f.size());
  for (Eigen::Index x = 0; x < f.size(); ++x) {
    if (div == Divergence::kl) {
      if (f[x] <= 0.0) {
        ratio[x] = 0.0;
        continue;
      }
      if (fhat[x] <= 0.0) throw NumericError("code gradient: zero reconstruction bin without smoothing");
      ratio[x] = f[x] / fhat[x];
    } else {
      const double sf = std::sqrt(f[x]);
      if (sf == 0.0) {
        ratio[x] = 0.0;
        continue;
      }
      if (fhat[x] <= 0.0) throw NumericError("code gradient: zero reconstruction bin without smoothing");
      ratio[x] = 0.5 * sf / std::sqrt(fhat[x]);
    }
  }
  return -(atom_rows * ratio);
}

// Project every row onto the simplex, then re-smooth so atoms stay strictly
// positive densities.
Eigen::MatrixXd smooth_project_rows(const Eigen::MatrixXd& rows, double eps) {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  const double k = static_cast<double>(rows.cols());
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    Eigen::VectorXd p = project_to_simplex(rows.row(j).transpose());
    p = (p.array() + eps) / (1.0 + k * eps);
    p /= p.sum();
    out.row(j) = p.transpose();
  }
  return out;
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
#pragma omp critical(sdl_parallel_guard)
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

// One full coding pass: independent per-sample solves, parallel over samples.
// Rows are solved well below the outer tolerance so that warm- and
// cold-started passes agree on the objective to within the outer tol.
Eigen::MatrixXd code_pass(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                          const Eigen::MatrixXd& start, const SdlConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd out(n, atom_rows.rows());
  SimplexSolveOptions opt;
  opt.eta = config.eta;
  opt.tol = std::max(config.tol * 1e-2, 1e-14);
  opt.max_iters = std::max(config.max_iters, 1000);
  opt.backtracking = config.backtracking;
  ParallelGuard guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::VectorXd& f = data[static_cast<std::size_t>(i)].values();
      auto obj = [&](const Eigen::VectorXd& w) { return divergence_term(f, atom_rows.transpose() * w, config.divergence); };
      auto grad = [&](const Eigen::VectorXd& w) { return row_gradient(f, atom_rows, w, config.divergence); };
      out.row(i) = minimize_on_simplex(start.row(i).transpose(), obj, grad, opt).x.transpose();
    });
  }
  guard.rethrow();
  return out;
}

// Bounded inner loop of accelerated projected atom updates at fixed codes.
// With backtracking the returned atoms never raise the objective.
Eigen::MatrixXd atom_pass(const DensitySet& data, const Eigen::MatrixXd& atoms0,
                          const Eigen::MatrixXd& weights, const SdlConfig& config, int max_steps) {
  auto obj = [&](const Eigen::MatrixXd& g) {
    return objective_density_raw(data, g, weights, config.divergence);
  };
  Eigen::MatrixXd x = atoms0;
  Eigen::MatrixXd x_prev = atoms0;
  Eigen::MatrixXd y = atoms0;
  double f_prev = obj(x);
  Eigen::MatrixXd best_x = x;
  double best_f = f_prev;
  NesterovSchedule sched;
  double eta = config.eta;  // persists across steps under backtracking
  for (int step = 1; step <= max_steps; ++step) {
    const Eigen::MatrixXd grad = atom_gradient_raw(data, y, weights, config.divergence);
    const double fy = obj(y);
    if (!config.backtracking) eta = config.eta;
    Eigen::MatrixXd cand = smooth_project_rows(y - eta * grad, config.smoothing_eps);
    double fc = obj(cand);
    if (config.backtracking) {
      while (eta > 1e-18) {
        const double move = (cand - y).squaredNorm();
        if (move == 0.0 || fy - fc >= 1e-4 * move / eta) break;
        eta *= 0.5;
        cand = smooth_project_rows(y - eta * grad, config.smoothing_eps);
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
    y = smooth_project_rows((1.0 - gamma) * cand + gamma * x_prev, config.smoothing_eps);
    x_prev = cand;
    if (std::abs(fc - f_prev) < config.tol || moved <= 1e-13 * (1.0 + cand.norm())) break;
    f_prev = fc;
    // Backtracked steps may regrow beyond the configured eta; the Armijo test
    // keeps them safe and flat valleys need the headroom.
    if (config.backtracking) eta = std::min(1e3 * config.eta, 2.0 * eta);
  }
  return config.backtracking ? best_x : x_prev;
}

// Escape hatch for stalled dictionaries: an atom that no sample uses (or one
// of a near-duplicate pair) is re-seeded at the worst-represented sample, and
// the move is kept only when the re-coded objective improves. Deterministic:
// candidates and ties resolve in index order.
bool rescue_stalled_atom(const DensitySet& data, Eigen::MatrixXd& atom_rows, Eigen::MatrixXd& weights,
                         double current_e, const SdlConfig& config) {
  const Eigen::Index r = atom_rows.rows();
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::VectorXd usage = weights.colwise().maxCoeff().transpose();
  Eigen::Index free_atom = -1;
  for (Eigen::Index j = 0; j < r; ++j) {
    if (usage[j] < 0.01 && (free_atom < 0 || usage[j] < usage[free_atom])) free_atom = j;
  }
  if (free_atom < 0) {
    // Near-duplicate atoms waste capacity the same way an unused one does.
    const Eigen::VectorXd mass = weights.colwise().sum().transpose();
    for (Eigen::Index a = 0; a < r && free_atom < 0; ++a) {
      for (Eigen::Index b = a + 1; b < r; ++b) {
        const double tv = 0.5 * (atom_rows.row(a) - atom_rows.row(b)).cwiseAbs().sum();
        if (tv < 1e-3) {
          free_atom = mass[a] <= mass[b] ? a : b;
          break;
        }
      }
    }
  }
  if (free_atom < 0) return false;

  Eigen::VectorXd errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd fhat = atom_rows.transpose() * weights.row(i).transpose();
    errors[i] = divergence_term(data[static_cast<std::size_t>(i)].values(), fhat, config.divergence);
  }
  Eigen::Index worst = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (errors[i] > errors[worst]) worst = i;
  }

  Eigen::MatrixXd cand_atoms = atom_rows;
  Eigen::VectorXd seed = data[static_cast<std::size_t>(worst)].values();
  seed = (seed.array() + config.smoothing_eps) / (1.0 + static_cast<double>(seed.size()) * config.smoothing_eps);
  seed /= seed.sum();
  cand_atoms.row(free_atom) = seed.transpose();
  Eigen::MatrixXd cand_weights = code_pass(data, cand_atoms, weights, config);
  const double cand_e = objective_density_raw(data, cand_atoms, cand_weights, config.divergence);
  if (cand_e >= current_e) return false;
  atom_rows = cand_atoms;
  weights = std::move(cand_weights);
  return true;
}

}  // namespace

std::string to_string(Divergence d) { return d == Divergence::kl ? "kl" : "hellinger"; }

Divergence divergence_from_string(const std::string& s) {
  if (s == "kl") return Divergence::kl;
  if (s == "hellinger") return Divergence::hellinger;
  throw ParameterError("unknown divergence: " + s);
}

void SdlConfig::validate() const {
  if (num_atoms < 1) throw ParameterError("config: num_atoms must be >= 1");
  if (!(eta > 0.0)) throw ParameterError("config: eta must be positive");
  if (!(tol > 0.0)) throw ParameterError("config: tol must be positive");
  if (max_iters < 1) throw ParameterError("config: max_iters must be >= 1");
  if (!(smoothing_eps > 0.0) || smoothing_eps > 1e-3)
    throw ParameterError("config: smoothing_eps must be in (0, 1e-3]");
  if (!(sparsity_threshold > 0.0) || !(sparsity_threshold < 1.0))
    throw ParameterError("config: sparsity_threshold must be in (0, 1)");
}

DensityDictionary::DensityDictionary(std::vector<DiscreteDensity> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw InvariantError("DensityDictionary: needs at least one atom");
  const Eigen::Index k = atoms_.front().bins();
  for (const auto& a : atoms_) {
    if (a.bins() != k) throw DimensionError("DensityDictionary: atoms have differing bin counts");
    if (a.values().minCoeff() <= 0.0)
      throw InvariantError("DensityDictionary: atoms must be strictly positive (smoothed)");
  }
}

DensityDictionary DensityDictionary::from_matrix(const Eigen::MatrixXd& rows) {
  std::vector<DiscreteDensity> atoms;
  atoms.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index j = 0; j < rows.rows(); ++j) atoms.emplace_back(rows.row(j).transpose());
  return DensityDictionary(std::move(atoms));
}

Eigen::MatrixXd DensityDictionary::as_matrix() const {
  Eigen::MatrixXd m(size(), bins());
  for (Eigen::Index j = 0; j < size(); ++j) m.row(j) = atoms_[static_cast<std::size_t>(j)].values().transpose();
  return m;
}

CodeMatrix::CodeMatrix(Eigen::MatrixXd weights) : w_(std::move(weights)) {
  if (w_.rows() < 1 || w_.cols() < 1) throw InvariantError("CodeMatrix: empty");
  if (!w_.allFinite()) throw InvariantError("CodeMatrix: non-finite entry");
  if ((w_.array() < 0.0).any()) throw InvariantError("CodeMatrix: negative entry");
  for (Eigen::Index i = 0; i < w_.rows(); ++i) {
    if (std::abs(w_.row(i).sum() - 1.0) > kRowSumTolerance)
      throw InvariantError("CodeMatrix: row does not sum to 1");
  }
}

double objective_density(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                         Divergence div) {
  if (static_cast<Eigen::Index>(data.size()) != codes.samples() || dict.size() != codes.atoms())
    throw DimensionError("objective_density: shape mismatch");
  if (check_same_bins(data) != dict.bins()) throw DimensionError("objective_density: bin count mismatch");
  return objective_density_raw(data, dict.as_matrix(), codes.weights(), div);
}

double objective_density_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                             const Eigen::MatrixXd& weights, Divergence div) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd terms(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd fhat = atom_rows.transpose() * weights.row(i).transpose();
    terms[i] = divergence_term(data[static_cast<std::size_t>(i)].values(), fhat, div);
  }
  // Fixed-order reduction: identical result for any worker count.
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += terms[i];
  return acc;
}

Eigen::MatrixXd code_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div) {
  return code_gradient_raw(data, dict.as_matrix(), codes.weights(), div);
}

Eigen::MatrixXd code_gradient_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                                  const Eigen::MatrixXd& weights, Divergence div) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd grad(n, atom_rows.rows());
  ParallelGuard guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      grad.row(i) =
          row_gradient(data[static_cast<std::size_t>(i)].values(), atom_rows, weights.row(i).transpose(), div)
              .transpose();
    });
  }
  guard.rethrow();
  return grad;
}

Eigen::MatrixXd atom_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div) {
  return atom_gradient_raw(data, dict.as_matrix(), codes.weights(), div);
}

Eigen::MatrixXd atom_gradient_raw(const DensitySet& data, const Eigen::MatrixXd& atom_rows,
                                  const Eigen::MatrixXd& weights, Divergence div) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index r = atom_rows.rows();
  const Eigen::Index k = atom_rows.cols();
  // ratio(i, x): KL -> f_i(x)/fhat_i(x); Hellinger -> sqrt(f_i(x))/(2 sqrt(fhat_i(x))).
  Eigen::MatrixXd ratio(n, k);
  ParallelGuard guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index i = 0; i < n; ++i) {
    guard.run([&] {
      const Eigen::VectorXd& f = data[static_cast<std::size_t>(i)].values();
      const Eigen::VectorXd fhat = atom_rows.transpose() * weights.row(i).transpose();
      for (Eigen::Index x = 0; x < k; ++x) {
        if (div == Divergence::kl) {
          if (f[x] <= 0.0) {
            ratio(i, x) = 0.0;
            continue;
          }
          if (fhat[x] <= 0.0) throw NumericError("atom gradient: zero reconstruction bin without smoothing");
          ratio(i, x) = f[x] / fhat[x];
        } else {
          const double sf = std::sqrt(f[x]);
          if (sf == 0.0) {
            ratio(i, x) = 0.0;
            continue;
          }
          if (fhat[x] <= 0.0) throw NumericError("atom gradient: zero reconstruction bin without smoothing");
          ratio(i, x) = 0.5 * sf / std::sqrt(fhat[x]);
        }
      }
    });
  }
  guard.rethrow();
  // grad(j, x) = -sum_i w_ij ratio(i, x); parallel over bins, serial over i.
  Eigen::MatrixXd grad(r, k);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Eigen::Index x = 0; x < k; ++x) {
    for (Eigen::Index j = 0; j < r; ++j) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += weights(i, j) * ratio(i, x);
      grad(j, x) = -acc;
    }
  }
  return grad;
}

CodeMatrix sparse_code_density(const DensitySet& data, const DensityDictionary& dict, const SdlConfig& config,
                               const CodeMatrix* warm_start) {
  config.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index r = dict.size();
  if (check_same_bins(data) != dict.bins()) throw DimensionError("sparse_code_density: bin count mismatch");
  Eigen::MatrixXd start;
  if (warm_start) {
    if (warm_start->samples() != n || warm_start->atoms() != r)
      throw DimensionError("sparse_code_density: warm start shape mismatch");
    start = warm_start->weights();
  } else {
    start = Eigen::MatrixXd::Constant(n, r, 1.0 / static_cast<double>(r));
  }
  return CodeMatrix(code_pass(data, dict.as_matrix(), start, config));
}

std::vector<DiscreteDensity> density_kmeans(const DensitySet& data, int k, std::uint64_t seed,
                                            int max_iters, double smoothing_eps) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  check_same_bins(data);
  if (k < 1 || static_cast<Eigen::Index>(k) > n)
    throw ParameterError("density_kmeans: k must satisfy 1 <= k <= N");

  auto smoothed = [&](const DiscreteDensity& f) { return smooth_density(f, smoothing_eps); };

  Rng rng(seed);
  std::vector<DiscreteDensity> centers;
  centers.push_back(smoothed(data[static_cast<std::size_t>(rng.index(n))]));
  std::vector<double> min_div(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    Eigen::Index far_i = 0;
    double far = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      min_div[static_cast<std::size_t>(i)] = std::min(
          min_div[static_cast<std::size_t>(i)], kl_divergence(data[static_cast<std::size_t>(i)], centers.back()));
      if (min_div[static_cast<std::size_t>(i)] > far) {
        far = min_div[static_cast<std::size_t>(i)];
        far_i = i;
      }
    }
    centers.push_back(smoothed(data[static_cast<std::size_t>(far_i)]));
  }

  std::vector<int> assignments(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_j = 0;
      for (int j = 0; j < k; ++j) {
        const double d = kl_divergence(data[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)]);
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      assign[static_cast<std::size_t>(i)] = best_j;
    }
    for (int j = 0; j < k; ++j) {
      DensitySet members;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[static_cast<std::size_t>(i)] == j) members.push_back(data[static_cast<std::size_t>(i)]);
      }
      if (members.empty()) {
        double far = -1.0;
        Eigen::Index far_i = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = kl_divergence(data[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)]);
          if (d > far) {
            far = d;
            far_i = i;
          }
        }
        centers[static_cast<std::size_t>(j)] = smoothed(data[static_cast<std::size_t>(far_i)]);
        assign[static_cast<std::size_t>(far_i)] = j;
        continue;
      }
      centers[static_cast<std::size_t>(j)] = smoothed(
          mixture(members, SimplexWeights::uniform(static_cast<Eigen::Index>(members.size()))));
    }
    if (assign == assignments) break;
    assignments = assign;
  }
  return centers;
}

DensityLearnResult learn_density(const DensitySet& data, const SdlConfig& config,
                                 const DensityObserver& observer) {
  config.validate();
  const auto t0 = Clock::now();
  const Eigen::Index k = check_same_bins(data);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int r = config.num_atoms;
  if (n < r) log_info("learn_density: fewer samples than atoms (N=" + std::to_string(n) + ", r=" +
                      std::to_string(r) + ")");

  Rng rng(config.seed);
  const std::uint64_t kmeans_seed = rng.next_u64();
  std::vector<DiscreteDensity> atoms =
      density_kmeans(data, std::min<int>(r, static_cast<int>(n)), kmeans_seed, 50, config.smoothing_eps);
  while (static_cast<int>(atoms.size()) < r) {
    const DiscreteDensity& f = data[static_cast<std::size_t>(rng.index(n))];
    Eigen::VectorXd v = 0.9 * f.values() + 0.1 * rng.simplex_point(k);
    v /= v.sum();
    atoms.push_back(smooth_density(DiscreteDensity(v), config.smoothing_eps));
  }
  Eigen::MatrixXd atom_rows = DensityDictionary(atoms).as_matrix();

  Eigen::MatrixXd weights(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row(r);
    for (int j = 0; j < r; ++j) row[j] = rng.uniform();
    const double s = row.sum();
    if (s > 0.0)
      row /= s;
    else
      row.setConstant(1.0 / static_cast<double>(r));
    weights.row(i) = row.transpose();
  }

  auto notify = [&](int iter, double e) {
    if (observer) observer(iter, e, DensityDictionary::from_matrix(atom_rows), CodeMatrix(weights));
  };

  FitReport report;
  double e = objective_density_raw(data, atom_rows, weights, config.divergence);
  report.objective_trace.push_back(e);
  notify(0, e);
  int iter = 0;
  for (iter = 1; iter <= config.max_iters; ++iter) {
    weights = code_pass(data, atom_rows, weights, config);
    atom_rows = atom_pass(data, atom_rows, weights, config, 200);
    double e_new = objective_density_raw(data, atom_rows, weights, config.divergence);
    if (config.backtracking && iter % 5 == 0 &&
        rescue_stalled_atom(data, atom_rows, weights, e_new, config)) {
      e_new = objective_density_raw(data, atom_rows, weights, config.divergence);
    }
    report.objective_trace.push_back(e_new);
    notify(iter, e_new);
    if (std::abs(e_new - e) < config.tol) {
      e = e_new;
      report.converged = true;
      break;
    }
    e = e_new;
  }
  // Final coding polish so the returned codes are per-row optimal for the
  // returned atoms (encode on the same data then reproduces this objective).
  weights = code_pass(data, atom_rows, weights, config);
  const double e_final = objective_density_raw(data, atom_rows, weights, config.divergence);
  if (e_final != e) {
    report.objective_trace.push_back(e_final);
    notify(std::min(iter, config.max_iters) + 1, e_final);
  }
  report.final_objective = e_final;
  report.iterations = std::min(iter, config.max_iters);
  report.wall_time_s = seconds_since(t0);

  CodeMatrix codes(weights);
  report.sparsity = sparsity_percent(codes, config.sparsity_threshold);
  return {DensityDictionary::from_matrix(atom_rows), std::move(codes), std::move(report)};
}

KktReport kkt_report(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                     double threshold, Divergence div) {
  if (!(threshold > 0.0) || !(threshold < 1.0)) throw ParameterError("kkt_report: threshold must be in (0,1)");
  const Eigen::Index n = codes.samples();
  const Eigen::Index r = codes.atoms();
  KktReport report;
  report.objective = objective_density(data, dict, codes, div);
  const Eigen::MatrixXd grad = code_gradient(data, dict, codes, div);
  report.divergences.resize(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      report.divergences(i, j) = div == Divergence::kl
                                     ? kl_divergence(data[static_cast<std::size_t>(i)], dict.atom(j))
                                     : hellinger_sq(data[static_cast<std::size_t>(i)], dict.atom(j));
    }
  }
  report.samples.resize(static_cast<std::size_t>(n));
  report.surrogate_bound = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    KktSample& s = report.samples[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r; ++j) {
      if (codes.weights()(i, j) > threshold) s.active_set.push_back(static_cast<int>(j));
      s.surrogate_dual += codes.weights()(i, j) * report.divergences(i, j);
    }
    report.surrogate_bound += s.surrogate_dual;
    if (s.active_set.empty()) {
      s.degenerate = true;
      continue;
    }
    double mean = 0.0;
    for (int j : s.active_set) mean += grad(i, j);
    mean /= static_cast<double>(s.active_set.size());
    s.dual_estimate = mean;
    for (int j : s.active_set) s.active_spread = std::max(s.active_spread, std::abs(grad(i, j) - mean));
    double slack = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < r; ++j) {
      if (codes.weights()(i, j) > threshold) continue;
      slack = std::min(slack, grad(i, j) - mean);
    }
    // Slack is vacuous (0) when every atom is active.
    s.inactive_slack = std::isinf(slack) ? 0.0 : slack;
  }
  return report;
}

double sparsity_percent(const CodeMatrix& codes, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw ParameterError("sparsity_percent: threshold must be in (0,1)");
  const Eigen::Index total = codes.samples() * codes.atoms();
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < codes.samples(); ++i) {
    for (Eigen::Index j = 0; j < codes.atoms(); ++j) {
      if (codes.weights()(i, j) <= threshold) ++count;
    }
  }
  return 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace sdl
