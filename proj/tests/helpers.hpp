#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sdl/density.hpp"
#include "sdl/spd.hpp"
#include "sdl/util.hpp"

namespace sdltest {

inline sdl::DensitySet random_densities(sdl::Rng& rng, Eigen::Index n, Eigen::Index k) {
  sdl::DensitySet set;
  for (Eigen::Index i = 0; i < n; ++i) set.emplace_back(rng.simplex_point(k));
  return set;
}

inline Eigen::VectorXd interior_simplex_point(sdl::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v =
      0.7 * rng.simplex_point(n) + 0.3 * Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return v / v.sum();
}

inline sdl::SpdMatrix random_spd(sdl::Rng& rng, Eigen::Index n, double ridge = 0.5) {
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(n) +
                      ridge * Eigen::MatrixXd::Identity(n, n);
  return sdl::SpdMatrix(0.5 * (s + s.transpose()));
}

inline Eigen::MatrixXd random_symmetric(sdl::Rng& rng, Eigen::Index n) {
  Eigen::MatrixXd v(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a; b < n; ++b) {
      v(a, b) = rng.normal();
      v(b, a) = v(a, b);
    }
  return v;
}

// Spiky, well-separated planted atoms.
inline std::vector<sdl::DiscreteDensity> planted_spike_atoms(sdl::Rng& rng, Eigen::Index r,
                                                             Eigen::Index k) {
  std::vector<sdl::DiscreteDensity> atoms;
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(k, 0.002);
    for (int spike = 0; spike < 3; ++spike) v[rng.index(k)] += 2.0 + rng.uniform();
    v /= v.sum();
    atoms.emplace_back(v);
  }
  return atoms;
}

// Greedy one-to-one matching; returns the worst matched distance.
template <class T, class DistFn>
double match_atoms(const std::vector<T>& learned, const std::vector<T>& planted, DistFn&& dist) {
  std::vector<bool> used(planted.size(), false);
  double worst = 0.0;
  for (const auto& a : learned) {
    double best = 1e300;
    std::size_t best_l = 0;
    for (std::size_t l = 0; l < planted.size(); ++l) {
      if (used[l]) continue;
      const double d = dist(a, planted[l]);
      if (d < best) {
        best = d;
        best_l = l;
      }
    }
    used[best_l] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sdl_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace sdltest
