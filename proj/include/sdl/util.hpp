#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace sdl {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Parsed once from the SDL_LOG environment variable (error|info|debug);
// defaults to error.
LogLevel log_level();

void log_message(LogLevel level, const std::string& msg);
inline void log_error(const std::string& msg) { log_message(LogLevel::error, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }

// Deterministic RNG. All draws are derived from the 64-bit state with
// explicit bit arithmetic so that identical seeds give identical streams on
// every platform (std::uniform_real_distribution has no such guarantee).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal();

  // Uniform index in [0, n).
  Eigen::Index index(Eigen::Index n);

  // A point of the (k-1)-simplex, ~ Dirichlet(1,...,1).
  Eigen::VectorXd simplex_point(Eigen::Index k);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Total variation distance 0.5 * ||p - q||_1.
double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

}  // namespace sdl
