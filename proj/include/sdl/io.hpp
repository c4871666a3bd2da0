#pragma once

#include <string>
#include <vector>

#include "sdl/sdl_density.hpp"
#include "sdl/sdl_spd.hpp"

namespace sdl {

// Density dataset: one density per line, whitespace-separated values,
// optional "# bins=<k>" header. With the header a row may carry one extra
// trailing integer, read as its class label. Rows whose sum is within 1e-6 of
// one are renormalized; anything further off (or negative) is rejected.
struct DensityDataset {
  std::vector<DiscreteDensity> densities;
  std::vector<int> labels;  // -1 where absent
  Eigen::Index bins = 0;
};

DensityDataset load_density_file(const std::string& path);
void save_density_file(const std::string& path, const std::vector<DiscreteDensity>& densities,
                       const std::vector<int>* labels = nullptr);

// SPD dataset: header "spd <n> <N>", then N lines of n*n row-major values
// with an optional trailing integer label. 17 significant digits on write.
struct SpdDataset {
  std::vector<SpdMatrix> matrices;
  std::vector<int> labels;  // -1 where absent
  Eigen::Index dim = 0;
};

SpdDataset load_spd_file(const std::string& path);
void save_spd_file(const std::string& path, const std::vector<SpdMatrix>& matrices,
                   const std::vector<int>* labels = nullptr);

// Codes reuse the density matrix text format (rows live on the simplex).
void save_codes_file(const std::string& path, const CodeMatrix& codes);
CodeMatrix load_codes_file(const std::string& path);

// Model files: structured JSON with atoms at full (round-trip) precision,
// config echo, seed, and fit metadata.
struct DensityModel {
  DensityDictionary dictionary;
  SdlConfig config;
  double final_objective = 0.0;
  double sparsity = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SpdModel {
  SpdDictionary dictionary;
  SdlConfig config;
  double final_objective = 0.0;
  double sparsity = 0.0;
  double mean_airm_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

void save_density_model(const std::string& path, const DensityModel& model);
DensityModel load_density_model(const std::string& path);
void save_spd_model(const std::string& path, const SpdModel& model);
SpdModel load_spd_model(const std::string& path);

// Deterministic metrics record. wall_time_s is carried in code and shown in
// text reports, but deliberately left out of the JSON artifact so reruns are
// byte-identical.
struct MetricsRecord {
  std::string mode;  // "density" | "spd"
  double objective = 0.0;
  double sparsity = 0.0;
  double recon_error = 0.0;
  double wall_time_s = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  bool converged = false;

  void validate() const;
  std::string to_json() const;  // single line, stable keys
  std::string to_text() const;  // human report, includes wall time
};

// Label + code-vector table for external classifiers.
void save_code_table(const std::string& path, const CodeMatrix& codes, const std::vector<int>& labels);

}  // namespace sdl
