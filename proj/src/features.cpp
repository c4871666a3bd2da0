#include "sdl/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdl/errors.hpp"
#include "sdl/util.hpp"

namespace sdl {

namespace fs = std::filesystem;

namespace {

// Replicate-border sample.
double sample(const GrayImage& img, Eigen::Index x, Eigen::Index y) {
  const Eigen::Index cx = std::min(std::max<Eigen::Index>(x, 0), img.width - 1);
  const Eigen::Index cy = std::min(std::max<Eigen::Index>(y, 0), img.height - 1);
  return img.pixels[cy * img.width + cx];
}

// Plane of |central difference| along x: [-1/2, 0, 1/2].
Eigen::VectorXd abs_dx(const GrayImage& img) {
  Eigen::VectorXd out(img.width * img.height);
  for (Eigen::Index y = 0; y < img.height; ++y)
    for (Eigen::Index x = 0; x < img.width; ++x)
      out[y * img.width + x] = std::abs(0.5 * (sample(img, x + 1, y) - sample(img, x - 1, y)));
  return out;
}

Eigen::VectorXd abs_dy(const GrayImage& img) {
  Eigen::VectorXd out(img.width * img.height);
  for (Eigen::Index y = 0; y < img.height; ++y)
    for (Eigen::Index x = 0; x < img.width; ++x)
      out[y * img.width + x] = std::abs(0.5 * (sample(img, x, y + 1) - sample(img, x, y - 1)));
  return out;
}

// Plane of |second difference| along x: [1, -2, 1].
Eigen::VectorXd abs_dxx(const GrayImage& img) {
  Eigen::VectorXd out(img.width * img.height);
  for (Eigen::Index y = 0; y < img.height; ++y)
    for (Eigen::Index x = 0; x < img.width; ++x)
      out[y * img.width + x] =
          std::abs(sample(img, x + 1, y) - 2.0 * sample(img, x, y) + sample(img, x - 1, y));
  return out;
}

Eigen::VectorXd abs_dyy(const GrayImage& img) {
  Eigen::VectorXd out(img.width * img.height);
  for (Eigen::Index y = 0; y < img.height; ++y)
    for (Eigen::Index x = 0; x < img.width; ++x)
      out[y * img.width + x] =
          std::abs(sample(img, x, y + 1) - 2.0 * sample(img, x, y) + sample(img, x, y - 1));
  return out;
}

// Correlation with a small odd-sized kernel, replicate borders.
Eigen::VectorXd correlate(const GrayImage& img, const Eigen::MatrixXd& kernel) {
  const Eigen::Index half = kernel.rows() / 2;
  Eigen::VectorXd out(img.width * img.height);
  for (Eigen::Index y = 0; y < img.height; ++y) {
    for (Eigen::Index x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (Eigen::Index ky = 0; ky < kernel.rows(); ++ky)
        for (Eigen::Index kx = 0; kx < kernel.cols(); ++kx)
          acc += kernel(ky, kx) * sample(img, x + kx - half, y + ky - half);
      out[y * img.width + x] = acc;
    }
  }
  return out;
}

Eigen::MatrixXd outer3(double a, double b, double c) {
  Eigen::Vector3d v(a, b, c);
  return v * v.transpose();
}

// 5x5 Laplacian-of-Gaussian at sigma = 1, mean-adjusted to zero response on
// constants.
Eigen::MatrixXd log_kernel() {
  Eigen::MatrixXd k(5, 5);
  const double sigma = 1.0;
  for (int y = -2; y <= 2; ++y) {
    for (int x = -2; x <= 2; ++x) {
      const double r2 = static_cast<double>(x * x + y * y);
      k(y + 2, x + 2) = (r2 - 2.0 * sigma * sigma) / (sigma * sigma * sigma * sigma) *
                        std::exp(-r2 / (2.0 * sigma * sigma));
    }
  }
  k.array() -= k.mean();
  return k;
}

double descriptor_sigma(const Eigen::MatrixXd& raw, const FeatureConfig& cfg) {
  if (cfg.sigma) return *cfg.sigma;
  return std::max(1e-6 * raw.diagonal().mean(), 1e-12);
}

int read_pnm_int(std::istream& in) {
  // Skips whitespace and '#' comments.
  while (true) {
    const int c = in.peek();
    if (c == EOF) throw IoError("pgm: unexpected end of header");
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  in >> value;
  if (!in) throw IoError("pgm: malformed header integer");
  return value;
}

}  // namespace

void GrayImage::validate() const {
  if (width < 1 || height < 1) throw InvariantError("GrayImage: empty image");
  if (pixels.size() != width * height) throw InvariantError("GrayImage: pixel count mismatch");
  if (!pixels.allFinite() || pixels.minCoeff() < 0.0)
    throw InvariantError("GrayImage: intensities must be finite and nonnegative");
}

std::string to_string(FilterBank f) { return f == FilterBank::gradient5 ? "gradient5" : "texture_eth80"; }

FilterBank filter_bank_from_string(const std::string& s) {
  if (s == "gradient5") return FilterBank::gradient5;
  if (s == "texture_eth80" || s == "texture-eth80") return FilterBank::texture_eth80;
  throw ParameterError("unknown filter bank: " + s);
}

void FeatureConfig::validate() const {
  if (block_size < 1) throw ParameterError("FeatureConfig: block_size must be >= 1");
  if (sigma && !(*sigma > 0.0)) throw ParameterError("FeatureConfig: sigma must be positive");
}

DiscreteDensity image_to_pmf(const GrayImage& img) {
  img.validate();
  const double total = img.pixels.sum();
  if (!(total > 0.0)) throw InvariantError("image_to_pmf: all-zero image");
  Eigen::VectorXd v = img.pixels / total;
  v /= v.sum();
  return DiscreteDensity(std::move(v));
}

std::vector<SpdMatrix> gradient_covariance_descriptor(const GrayImage& img, const FeatureConfig& cfg) {
  img.validate();
  cfg.validate();
  const Eigen::Index b = cfg.block_size;
  const Eigen::Index bx = img.width / b;
  const Eigen::Index by = img.height / b;
  if (bx < 1 || by < 1)
    throw DimensionError("gradient_covariance_descriptor: block size exceeds image dimensions");

  std::vector<Eigen::VectorXd> planes;
  planes.push_back(img.pixels);
  planes.push_back(abs_dx(img));
  planes.push_back(abs_dy(img));
  planes.push_back(abs_dxx(img));
  planes.push_back(abs_dyy(img));

  std::vector<SpdMatrix> out;
  out.reserve(static_cast<std::size_t>(bx * by));
  for (Eigen::Index cy = 0; cy < by; ++cy) {
    for (Eigen::Index cx = 0; cx < bx; ++cx) {
      Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(5, 5);
      for (Eigen::Index y = cy * b; y < (cy + 1) * b; ++y) {
        for (Eigen::Index x = cx * b; x < (cx + 1) * b; ++x) {
          Eigen::Matrix<double, 5, 1> f;
          for (int c = 0; c < 5; ++c) f[c] = planes[static_cast<std::size_t>(c)][y * img.width + x];
          scatter += f * f.transpose();
        }
      }
      out.push_back(make_spd(scatter, descriptor_sigma(scatter, cfg)));
    }
  }
  return out;
}

SpdMatrix texture_covariance_descriptor(const GrayImage& img, const GrayImage* mask,
                                        const FeatureConfig& cfg) {
  img.validate();
  cfg.validate();
  if (mask) {
    mask->validate();
    if (mask->width != img.width || mask->height != img.height)
      throw DimensionError("texture_covariance_descriptor: mask size mismatch");
  }

  std::vector<Eigen::VectorXd> planes;
  planes.push_back(correlate(img, outer3(1, 2, 1)));    // level
  planes.push_back(correlate(img, outer3(-1, 0, 1)));   // edge
  planes.push_back(correlate(img, outer3(-1, 2, -1)));  // spot
  planes.push_back(abs_dx(img));
  planes.push_back(abs_dy(img));
  planes.push_back(correlate(img, log_kernel()).cwiseAbs());

  std::vector<Eigen::Index> selected;
  for (Eigen::Index p = 0; p < img.width * img.height; ++p) {
    if (!mask || mask->pixels[p] != 0.0) selected.push_back(p);
  }
  if (selected.size() < 36)
    throw InvariantError("texture_covariance_descriptor: fewer than 36 masked pixels");

  Eigen::Matrix<double, 6, 1> mean = Eigen::Matrix<double, 6, 1>::Zero();
  for (Eigen::Index p : selected) {
    for (int c = 0; c < 6; ++c) mean[c] += planes[static_cast<std::size_t>(c)][p];
  }
  mean /= static_cast<double>(selected.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(6, 6);
  for (Eigen::Index p : selected) {
    Eigen::Matrix<double, 6, 1> v;
    for (int c = 0; c < 6; ++c) v[c] = planes[static_cast<std::size_t>(c)][p] - mean[c];
    cov += v * v.transpose();
  }
  cov /= static_cast<double>(selected.size());
  return make_spd(cov, descriptor_sigma(cov, cfg));
}

GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw IoError("not a PGM (P2/P5) file: " + path);
  const int width = read_pnm_int(in);
  const int height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw IoError("invalid PGM header in " + path);
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<Eigen::Index>(width) * height);
  if (magic == "P2") {
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
      img.pixels[i] = static_cast<double>(read_pnm_int(in));
    }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::string buf(static_cast<std::size_t>(img.pixels.size()) * static_cast<std::size_t>(bytes), '\0');
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw IoError("truncated PGM data in " + path);
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
      if (bytes == 1) {
        img.pixels[i] = static_cast<double>(static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]));
      } else {
        const unsigned hi = static_cast<unsigned char>(buf[static_cast<std::size_t>(2 * i)]);
        const unsigned lo = static_cast<unsigned char>(buf[static_cast<std::size_t>(2 * i + 1)]);
        img.pixels[i] = static_cast<double>((hi << 8) | lo);
      }
    }
  }
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] > maxval) throw IoError("PGM sample above maxval in " + path);
  }
  img.validate();
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img, int maxval) {
  img.validate();
  if (maxval < 1 || maxval > 65535) throw ParameterError("write_pgm: invalid maxval");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image file: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  const int bytes = maxval > 255 ? 2 : 1;
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    const long v = std::lround(std::min(img.pixels[i], static_cast<double>(maxval)));
    if (bytes == 1) {
      out.put(static_cast<char>(static_cast<unsigned char>(v)));
    } else {
      out.put(static_cast<char>(static_cast<unsigned char>((v >> 8) & 0xff)));
      out.put(static_cast<char>(static_cast<unsigned char>(v & 0xff)));
    }
  }
  if (!out) throw IoError("short write on image file: " + path);
}

ImageDatasetResult extract_image_dataset(const std::string& root_dir, bool pmf_mode,
                                         const FeatureConfig& cfg) {
  cfg.validate();
  if (!fs::is_directory(root_dir)) throw IoError("not a directory: " + root_dir);
  ImageDatasetResult result;
  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root_dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("no class subdirectories under " + root_dir);

  const std::string mask_suffix = ".mask.pgm";
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    result.class_names.push_back(class_dirs[label]);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root_dir) / class_dirs[label])) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.size() >= mask_suffix.size() &&
          name.compare(name.size() - mask_suffix.size(), mask_suffix.size(), mask_suffix) == 0)
        continue;  // masks are side inputs, not images
      if (entry.path().extension() == ".pgm") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& file : files) {
      try {
        const GrayImage img = load_pgm(file);
        if (pmf_mode) {
          result.densities.push_back(image_to_pmf(img));
          result.labels.push_back(static_cast<int>(label));
        } else if (cfg.filter_bank == FilterBank::gradient5) {
          for (auto& d : gradient_covariance_descriptor(img, cfg)) {
            result.descriptors.push_back(std::move(d));
            result.labels.push_back(static_cast<int>(label));
          }
        } else {
          const std::string mask_path = file.substr(0, file.size() - 4) + mask_suffix;
          GrayImage mask;
          const bool has_mask = fs::exists(mask_path);
          if (has_mask) mask = load_pgm(mask_path);
          result.descriptors.push_back(
              texture_covariance_descriptor(img, has_mask ? &mask : nullptr, cfg));
          result.labels.push_back(static_cast<int>(label));
        }
      } catch (const std::exception& e) {
        log_info("skipping image " + file + ": " + e.what());
        result.skipped.push_back(file + ": " + e.what());
      }
    }
  }
  if (result.labels.empty()) throw IoError("no usable images under " + root_dir);
  return result;
}

}  // namespace sdl
