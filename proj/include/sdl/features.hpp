#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "sdl/density.hpp"
#include "sdl/spd.hpp"

namespace sdl {

// Grayscale image with nonnegative intensities, row-major.
struct GrayImage {
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  Eigen::VectorXd pixels;

  double at(Eigen::Index x, Eigen::Index y) const { return pixels[y * width + x]; }
  void validate() const;
};

enum class FilterBank { gradient5, texture_eth80 };

std::string to_string(FilterBank f);
FilterBank filter_bank_from_string(const std::string& s);

struct FeatureConfig {
  Eigen::Index block_size = 32;
  // SPD regularizer; unset -> 1e-6 * mean diagonal of the raw descriptor
  // (floored at 1e-12 for degenerate inputs).
  std::optional<double> sigma;
  FilterBank filter_bank = FilterBank::gradient5;

  void validate() const;
};

// Image as a probability vector: bin (x, y) gets mass I(x,y) / sum I.
DiscreteDensity image_to_pmf(const GrayImage& img);

// Per non-overlapping block: 5-channel pixel features
// (I, |dI/dx|, |dI/dy|, |d2I/dx2|, |d2I/dy2|), uncentered scatter F F^t summed
// over the block, plus sigma I. floor(W/b) * floor(H/b) descriptors on P_5.
std::vector<SpdMatrix> gradient_covariance_descriptor(const GrayImage& img, const FeatureConfig& cfg);

// Texture-filter covariance on P_6: three Laws-style 3x3 filter responses,
// |Ix|, |Iy|, and |LoG| per masked pixel; centered covariance plus sigma I.
// mask == nullptr means all pixels; at least 36 pixels required.
SpdMatrix texture_covariance_descriptor(const GrayImage& img, const GrayImage* mask,
                                        const FeatureConfig& cfg);

// PGM reader: P2 (ASCII) and P5 (binary), 8- and 16-bit (big-endian).
GrayImage load_pgm(const std::string& path);

// PGM writer (P5), used by the test and data-generation paths.
void write_pgm(const std::string& path, const GrayImage& img, int maxval = 255);

// Directory ingestion: subdirectory name = class label, images traversed in
// lexicographic order. Masks named <stem>.mask.pgm are picked up for the
// texture bank and never treated as images. Malformed images are skipped and
// listed.
struct ImageDatasetResult {
  std::vector<DiscreteDensity> densities;  // pmf mode
  std::vector<SpdMatrix> descriptors;      // descriptor mode
  std::vector<int> labels;                 // one per row/descriptor
  std::vector<std::string> class_names;    // index = label value
  std::vector<std::string> skipped;        // "path: reason"
};

ImageDatasetResult extract_image_dataset(const std::string& root_dir, bool pmf_mode,
                                         const FeatureConfig& cfg);

}  // namespace sdl
