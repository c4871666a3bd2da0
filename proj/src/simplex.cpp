#include "sdl/simplex.hpp"

#include <numeric>

namespace sdl {

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw ParameterError("project_to_simplex: empty vector");
  if (!v.allFinite()) throw ParameterError("project_to_simplex: non-finite entries");
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  Eigen::Index rho = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumsum += u[static_cast<std::size_t>(i)];
    const double candidate = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] > candidate) {
      rho = i + 1;
      tau = candidate;
    }
  }
  (void)rho;
  return (v.array() - tau).cwiseMax(0.0);
}

}  // namespace sdl
