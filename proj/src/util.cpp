#include "sdl/util.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>

#include "sdl/errors.hpp"

namespace sdl {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SDL_LOG");
    if (!env) return LogLevel::error;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* tag = level == LogLevel::error ? "error" : level == LogLevel::info ? "info" : "debug";
  std::cerr << "[sdl " << tag << "] " << msg << "\n";
}

std::uint64_t Rng::next_u64() {
  // splitmix64: tiny, well mixed, and identical everywhere.
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double two_pi = 6.283185307179586476925287;
  spare_ = mag * std::sin(two_pi * u2);
  have_spare_ = true;
  return mag * std::cos(two_pi * u2);
}

Eigen::Index Rng::index(Eigen::Index n) {
  if (n <= 0) throw ParameterError("Rng::index: n must be positive");
  return static_cast<Eigen::Index>(next_u64() % static_cast<std::uint64_t>(n));
}

Eigen::VectorXd Rng::simplex_point(Eigen::Index k) {
  if (k <= 0) throw ParameterError("Rng::simplex_point: k must be positive");
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double u = uniform();
    while (u >= 1.0) u = uniform();
    v[i] = -std::log1p(-u);  // Exp(1) draw
  }
  v /= v.sum();
  return v;
}

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw DimensionError("tv_distance: length mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

}  // namespace sdl
