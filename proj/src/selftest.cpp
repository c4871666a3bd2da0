#include "sdl/selftest.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <ostream>

#include "sdl/reference.hpp"
#include "sdl/sdl_density.hpp"
#include "sdl/sdl_spd.hpp"
#include "sdl/util.hpp"
#include "sdl/validate.hpp"

namespace sdl {

namespace {

DensitySet random_densities(Rng& rng, Eigen::Index n, Eigen::Index k) {
  DensitySet set;
  for (Eigen::Index i = 0; i < n; ++i) set.emplace_back(rng.simplex_point(k));
  return set;
}

// Interior code rows: a Dirichlet draw blended toward uniform so finite
// differences stay well conditioned.
Eigen::VectorXd interior_row(Rng& rng, Eigen::Index r) {
  Eigen::VectorXd w = 0.7 * rng.simplex_point(r) +
                      0.3 * Eigen::VectorXd::Constant(r, 1.0 / static_cast<double>(r));
  return w / w.sum();
}

SpdMatrix random_spd(Rng& rng, Eigen::Index n, double spread = 2.0) {
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(n);
  s += Eigen::MatrixXd::Identity(n, n) / spread;
  return SpdMatrix(0.5 * (s + s.transpose()));
}

struct Suite {
  SelftestReport report;
  Rng rng;

  explicit Suite(std::uint64_t seed) : rng(seed) {}

  void add(const std::string& name, double measured, double tolerance) {
    SelftestCheck c{name, measured, tolerance, measured <= tolerance};
    report.all_pass = report.all_pass && c.pass;
    report.checks.push_back(std::move(c));
  }
};

void density_gradient_checks(Suite& s, Divergence div, bool inject_bug) {
  const std::string tag = to_string(div);
  double worst_code = 0.0;
  double worst_atom = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 3, k = 6, r = 4;
    DensitySet data = random_densities(s.rng, n, k);
    std::vector<DiscreteDensity> atoms;
    for (Eigen::Index j = 0; j < r; ++j)
      atoms.push_back(smooth_density(DiscreteDensity(s.rng.simplex_point(k)), 1e-4));
    DensityDictionary dict(atoms);
    Eigen::MatrixXd w(n, r);
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) = interior_row(s.rng, r).transpose();

    Eigen::MatrixXd analytic = code_gradient_raw(data, dict.as_matrix(), w, div);
    if (inject_bug) analytic.array() += 1e-3;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto f = [&](const Eigen::VectorXd& row) {
        Eigen::MatrixXd wp = w;
        wp.row(i) = row.transpose();
        return objective_density_raw(data, dict.as_matrix(), wp, div);
      };
      const Eigen::VectorXd fd = fd_gradient(f, w.row(i).transpose(), 1e-6);
      worst_code = std::max(worst_code, max_rel_error(analytic.row(i).transpose(), fd));
    }

    const Eigen::MatrixXd atom_rows = dict.as_matrix();
    const Eigen::MatrixXd ga = atom_gradient_raw(data, atom_rows, w, div);
    for (Eigen::Index j = 0; j < r; ++j) {
      auto f = [&](const Eigen::VectorXd& row) {
        Eigen::MatrixXd gp = atom_rows;
        gp.row(j) = row.transpose();
        return objective_density_raw(data, gp, w, div);
      };
      const Eigen::VectorXd fd = fd_gradient(f, atom_rows.row(j).transpose(), 1e-6);
      worst_atom = std::max(worst_atom, max_rel_error(ga.row(j).transpose(), fd));
    }
  }
  s.add("code_gradient_vs_fd_" + tag, worst_code, 1e-5);
  s.add("atom_gradient_vs_fd_" + tag, worst_atom, 1e-5);
}

void spd_gradient_checks(Suite& s) {
  double worst_w = 0.0;
  double worst_atom = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index n = 3, count = 3, r = 4;
    SpdSet data;
    for (Eigen::Index i = 0; i < count; ++i) data.push_back(random_spd(s.rng, n));
    std::vector<SpdMatrix> atoms;
    for (Eigen::Index j = 0; j < r; ++j) atoms.push_back(random_spd(s.rng, n));
    SpdDictionary dict(atoms);
    Eigen::MatrixXd w(count, r);
    for (Eigen::Index i = 0; i < count; ++i) w.row(i) = interior_row(s.rng, r).transpose();
    CodeMatrix codes(w);

    const Eigen::MatrixXd analytic = weight_gradient_spd(data, dict, codes);
    for (Eigen::Index i = 0; i < count; ++i) {
      auto f = [&](const Eigen::VectorXd& row) {
        Eigen::MatrixXd wp = w;
        wp.row(i) = row.transpose();
        return objective_spd_raw(data, dict, wp);
      };
      const Eigen::VectorXd fd = fd_gradient(f, w.row(i).transpose(), 1e-5);
      worst_w = std::max(worst_w, max_rel_error(analytic.row(i).transpose(), fd));
    }

    // Geodesic directional derivatives: d/dh E(Exp_{C_j}(h V)) at h = 0 equals
    // tr(Euclidean gradient * V).
    const std::vector<Eigen::MatrixXd> euc = atom_euclidean_gradients(data, dict, codes);
    for (Eigen::Index j = 0; j < r; ++j) {
      Eigen::MatrixXd v(n, n);
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b) {
          v(a, b) = s.rng.normal();
          v(b, a) = v(a, b);
        }
      v /= v.norm();
      auto e_at = [&](double h) {
        std::vector<SpdMatrix> moved = dict.atoms();
        moved[static_cast<std::size_t>(j)] =
            exp_map(dict.atom(j), TangentMatrix(h * v));
        return objective_spd(data, SpdDictionary(moved), codes);
      };
      const double h = 1e-5;
      const double fd = (e_at(h) - e_at(-h)) / (2.0 * h);
      const double an = (euc[static_cast<std::size_t>(j)].array() * v.array()).sum();
      worst_atom = std::max(worst_atom, std::abs(an - fd) / std::max(std::abs(fd), 1e-8));
    }
  }
  s.add("spd_weight_gradient_vs_fd", worst_w, 1e-4);
  s.add("spd_atom_gradient_vs_geodesic_fd", worst_atom, 1e-4);
}

void center_oracle_checks(Suite& s) {
  double worst_tv = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 2 + s.rng.index(4);
    const Eigen::Index k = 3 + s.rng.index(8);
    DensitySet set = random_densities(s.rng, n, k);
    SimplexWeights alpha(s.rng.simplex_point(n));
    const DiscreteDensity closed = weighted_kl_center(set, alpha);
    const DiscreteDensity numeric = numeric_weighted_kl_center(set, alpha);
    worst_tv = std::max(worst_tv, tv_distance(closed, numeric));
  }
  s.add("weighted_kl_center_vs_oracle_tv", worst_tv, 1e-6);

  double worst_rel = 0.0;
  double worst_diag = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index n = 2 + s.rng.index(4);
    const Eigen::Index count = 2 + s.rng.index(5);
    SpdSet set;
    for (Eigen::Index i = 0; i < count; ++i) set.push_back(random_spd(s.rng, n));
    SimplexWeights w(s.rng.simplex_point(count));
    const SpdMatrix closed = symmetrized_kl_center(set, w);
    const SpdMatrix numeric = numeric_symmetrized_center(set, w);
    worst_rel = std::max(worst_rel,
                         (closed.matrix() - numeric.matrix()).norm() / numeric.matrix().norm());

    // Commuting case: diagonal inputs reduce elementwise to sqrt(A/B).
    SpdSet diag_set;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::VectorXd d(n);
      for (Eigen::Index c = 0; c < n; ++c) d[c] = 0.2 + 3.0 * s.rng.uniform();
      diag_set.push_back(SpdMatrix(d.asDiagonal()));
      a += w[i] * d;
      b += w[i] * d.cwiseInverse();
    }
    const SpdMatrix closed_diag = symmetrized_kl_center(diag_set, w);
    const Eigen::VectorXd expect = (a.array() / b.array()).sqrt();
    worst_diag = std::max(
        worst_diag,
        (closed_diag.matrix().diagonal() - expect).lpNorm<Eigen::Infinity>());
  }
  s.add("spd_center_vs_oracle_rel_frobenius", worst_rel, 1e-4);
  s.add("spd_center_diagonal_closed_form", worst_diag, 1e-10);
}

void geometry_checks(Suite& s) {
  double worst_roundtrip = 0.0;
  double worst_congruence = 0.0;
  double worst_jsym = 0.0;
  double min_j = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index n = 2 + s.rng.index(4);
    const SpdMatrix x = random_spd(s.rng, n);
    const SpdMatrix y = random_spd(s.rng, n);
    Eigen::MatrixXd v(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a; b < n; ++b) {
        v(a, b) = s.rng.normal();
        v(b, a) = v(a, b);
      }
    v /= std::max(v.norm(), 1.0);
    const TangentMatrix tangent(v);
    const TangentMatrix back = log_map(x, exp_map(x, tangent));
    worst_roundtrip = std::max(worst_roundtrip, (back.matrix() - v).norm());

    Eigen::MatrixXd g(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) g(a, b) = s.rng.normal();
    g += 2.0 * Eigen::MatrixXd::Identity(n, n);
    const SpdMatrix gx(0.5 * ((g * x.matrix() * g.transpose()) +
                              (g * x.matrix() * g.transpose()).transpose()));
    const SpdMatrix gy(0.5 * ((g * y.matrix() * g.transpose()) +
                              (g * y.matrix() * g.transpose()).transpose()));
    worst_congruence =
        std::max(worst_congruence, std::abs(airm_distance(gx, gy) - airm_distance(x, y)));

    worst_jsym = std::max(worst_jsym, std::abs(j_divergence(x, y) - j_divergence(y, x)));
    min_j = std::min(min_j, j_divergence(x, y));
  }
  s.add("exp_log_roundtrip", worst_roundtrip, 1e-8);
  s.add("airm_congruence_invariance", worst_congruence, 1e-8);
  s.add("j_divergence_symmetry", worst_jsym, 1e-12);
  s.add("j_divergence_nonnegative", -min_j, 0.0);
}

void kkt_checks(Suite& s) {
  double worst_spread = 0.0;
  double worst_slack = 0.0;
  double worst_bound = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const Eigen::Index n = 8, k = 8;
    DensitySet data = random_densities(s.rng, n, k);
    SdlConfig config;
    config.num_atoms = 4;
    config.tol = 1e-10;
    config.max_iters = 200;
    config.seed = s.rng.next_u64();
    std::vector<double> bound_gap;
    auto observer = [&](int, double e, const DensityDictionary& dict, const CodeMatrix& codes) {
      const KktReport kkt = kkt_report(data, dict, codes, config.sparsity_threshold);
      bound_gap.push_back(e - kkt.surrogate_bound);  // must stay <= 0 (Jensen)
    };
    const DensityLearnResult fit = learn_density(data, config, observer);
    const KktReport kkt = kkt_report(data, fit.dictionary, fit.codes, config.sparsity_threshold);
    for (const auto& sample : kkt.samples) {
      if (sample.degenerate) continue;
      const double scale = std::max(std::abs(sample.dual_estimate), 1e-8);
      worst_spread = std::max(worst_spread, sample.active_spread / scale);
      worst_slack = std::max(worst_slack, -sample.inactive_slack / scale);
    }
    for (double g : bound_gap) worst_bound = std::max(worst_bound, g);
  }
  s.add("kkt_active_spread_rel", worst_spread, 1e-3);
  s.add("kkt_inactive_slack_rel", worst_slack, 1e-3);
  s.add("kl_jensen_bound_gap", worst_bound, 1e-12);
}

void hellinger_form_check(Suite& s) {
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index k = 2 + s.rng.index(10);
    const DiscreteDensity f(s.rng.simplex_point(k));
    const DiscreteDensity g(s.rng.simplex_point(k));
    double half_sq = 0.0;
    for (Eigen::Index x = 0; x < k; ++x) {
      const double d = std::sqrt(f[x]) - std::sqrt(g[x]);
      half_sq += 0.5 * d * d;
    }
    worst = std::max(worst, std::abs(hellinger_sq(f, g) - half_sq));
  }
  s.add("hellinger_two_forms_agree", worst, 1e-12);
}

void reference_agreement_check(Suite& s) {
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index n = 6, k = 7, r = 3;
    DensitySet data = random_densities(s.rng, n, k);
    std::vector<DiscreteDensity> atoms;
    for (Eigen::Index j = 0; j < r; ++j)
      atoms.push_back(smooth_density(DiscreteDensity(s.rng.simplex_point(k)), 1e-6));
    DensityDictionary dict(atoms);
    Eigen::MatrixXd w(n, r);
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) = interior_row(s.rng, r).transpose();
    CodeMatrix codes(w);
    for (Divergence div : {Divergence::kl, Divergence::hellinger}) {
      const double a = objective_density(data, dict, codes, div);
      const double b = ref::objective_density(data, dict, codes, div);
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-12));
    }
  }
  s.add("parallel_vs_reference_objective", worst, 1e-12);
}

}  // namespace

SelftestReport run_selftest(const SelftestOptions& options) {
  Suite suite(options.seed);
  density_gradient_checks(suite, Divergence::kl, options.inject_gradient_bug);
  density_gradient_checks(suite, Divergence::hellinger, false);
  spd_gradient_checks(suite);
  center_oracle_checks(suite);
  geometry_checks(suite);
  kkt_checks(suite);
  hellinger_form_check(suite);
  reference_agreement_check(suite);
  return suite.report;
}

void print_selftest_report(std::ostream& out, const SelftestReport& report) {
  for (const auto& c : report.checks) {
    out << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  measured=" << c.measured
        << "  tol=" << c.tolerance << "\n";
  }
  out << (report.all_pass ? "selftest: all checks passed" : "selftest: FAILURES present") << "\n";
}

}  // namespace sdl
