#pragma once

#include <Eigen/Core>

#include "sdl/sdl_density.hpp"
#include "sdl/sdl_spd.hpp"

// Serial reference kernels: literal term-by-term re-evaluations of the
// objectives and gradients with plain loops, no OpenMP and no shared caching.
// Kept as the correctness baseline for the parallel kernels and as the serial
// side of the benchmark target.
namespace sdl::ref {

double objective_density(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                         Divergence div);

Eigen::MatrixXd code_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div);

Eigen::MatrixXd atom_gradient(const DensitySet& data, const DensityDictionary& dict, const CodeMatrix& codes,
                              Divergence div);

double objective_spd(const SpdSet& data, const SpdDictionary& dict, const CodeMatrix& codes);

// Serial sparse coding driver: same per-row mathematics, one row at a time.
CodeMatrix sparse_code_density(const DensitySet& data, const DensityDictionary& dict, const SdlConfig& config);

}  // namespace sdl::ref
