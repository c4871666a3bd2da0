#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdl {

struct SelftestOptions {
  std::uint64_t seed = 0;
  // Debug hook: perturbs the analytic code gradient before comparison, so the
  // gradient check must fail (negative-control path).
  bool inject_gradient_bug = false;
};

struct SelftestCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  bool all_pass = true;
};

// Desk-scale oracle, gradient, KKT, and geometry suites. Prints nothing;
// callers render the report.
SelftestReport run_selftest(const SelftestOptions& options);

void print_selftest_report(std::ostream& out, const SelftestReport& report);

}  // namespace sdl
