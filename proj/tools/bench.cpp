// Benchmark: OpenMP kernels against the serial reference implementation.
// Also cross-checks that both paths agree before timing anything.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdl/reference.hpp"
#include "sdl/sdl_density.hpp"
#include "sdl/sdl_spd.hpp"
#include "sdl/util.hpp"

using namespace sdl;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int rep = 0; rep < reps; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* kernel, double serial_s, double parallel_s, double agreement) {
  std::printf("%-28s %10.4f ms %10.4f ms %7.2fx   max|diff| %.3e\n", kernel, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s, agreement);
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;
  }
  const Eigen::Index n = quick ? 64 : 1024;
  const Eigen::Index k = quick ? 32 : 256;
  const Eigen::Index r = quick ? 8 : 32;
  const int reps = quick ? 2 : 5;

  Rng rng(1234);
  DensitySet data;
  for (Eigen::Index i = 0; i < n; ++i) data.emplace_back(rng.simplex_point(k));
  std::vector<DiscreteDensity> atoms;
  for (Eigen::Index j = 0; j < r; ++j)
    atoms.push_back(smooth_density(DiscreteDensity(rng.simplex_point(k)), 1e-8));
  DensityDictionary dict(atoms);
  Eigen::MatrixXd w(n, r);
  for (Eigen::Index i = 0; i < n; ++i) w.row(i) = rng.simplex_point(r).transpose();
  CodeMatrix codes(w);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    const double a = objective_density(data, dict, codes, Divergence::kl);
    const double b = ref::objective_density(data, dict, codes, Divergence::kl);
    const double ts = time_best_of(reps, [&] { (void)ref::objective_density(data, dict, codes, Divergence::kl); });
    const double tp = time_best_of(reps, [&] { (void)objective_density(data, dict, codes, Divergence::kl); });
    report("objective_density/kl", ts, tp, std::abs(a - b));
  }
  {
    const Eigen::MatrixXd a = code_gradient(data, dict, codes, Divergence::kl);
    const Eigen::MatrixXd b = ref::code_gradient(data, dict, codes, Divergence::kl);
    const double ts = time_best_of(reps, [&] { (void)ref::code_gradient(data, dict, codes, Divergence::kl); });
    const double tp = time_best_of(reps, [&] { (void)code_gradient(data, dict, codes, Divergence::kl); });
    report("code_gradient/kl", ts, tp, (a - b).cwiseAbs().maxCoeff());
  }
  {
    const Eigen::MatrixXd a = atom_gradient(data, dict, codes, Divergence::kl);
    const Eigen::MatrixXd b = ref::atom_gradient(data, dict, codes, Divergence::kl);
    const double ts = time_best_of(reps, [&] { (void)ref::atom_gradient(data, dict, codes, Divergence::kl); });
    const double tp = time_best_of(reps, [&] { (void)atom_gradient(data, dict, codes, Divergence::kl); });
    report("atom_gradient/kl", ts, tp, (a - b).cwiseAbs().maxCoeff());
  }
  {
    SdlConfig cfg;
    cfg.num_atoms = static_cast<int>(r);
    cfg.max_iters = 40;
    cfg.tol = 1e-6;
    const CodeMatrix a = sparse_code_density(data, dict, cfg);
    const CodeMatrix b = ref::sparse_code_density(data, dict, cfg);
    const double ts = time_best_of(1, [&] { (void)ref::sparse_code_density(data, dict, cfg); });
    const double tp = time_best_of(1, [&] { (void)sparse_code_density(data, dict, cfg); });
    report("sparse_code_density", ts, tp, (a.weights() - b.weights()).cwiseAbs().maxCoeff());
  }
  {
    const Eigen::Index sn = quick ? 3 : 5;
    const Eigen::Index scount = quick ? 32 : 256;
    const Eigen::Index sr = quick ? 4 : 16;
    SpdSet sdata;
    for (Eigen::Index i = 0; i < scount; ++i) {
      Eigen::MatrixXd g(sn, sn);
      for (Eigen::Index a = 0; a < sn; ++a)
        for (Eigen::Index b = 0; b < sn; ++b) g(a, b) = rng.normal();
      Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(sn) +
                          0.5 * Eigen::MatrixXd::Identity(sn, sn);
      sdata.emplace_back(0.5 * (s + s.transpose()));
    }
    std::vector<SpdMatrix> satoms(sdata.begin(), sdata.begin() + sr);
    SpdDictionary sdict(satoms);
    Eigen::MatrixXd sw(scount, sr);
    for (Eigen::Index i = 0; i < scount; ++i) sw.row(i) = rng.simplex_point(sr).transpose();
    CodeMatrix scodes(sw);
    const double a = objective_spd(sdata, sdict, scodes);
    const double b = ref::objective_spd(sdata, sdict, scodes);
    const double ts = time_best_of(reps, [&] { (void)ref::objective_spd(sdata, sdict, scodes); });
    const double tp = time_best_of(reps, [&] { (void)objective_spd(sdata, sdict, scodes); });
    report("objective_spd", ts, tp, std::abs(a - b));
  }
  return 0;
}
