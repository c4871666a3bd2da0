#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "sdl/features.hpp"

using namespace sdl;
using sdltest::TempDir;

namespace {

GrayImage constant_image(Eigen::Index w, Eigen::Index h, double value) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels = Eigen::VectorXd::Constant(w * h, value);
  return img;
}

GrayImage ramp_image(Eigen::Index w, Eigen::Index h) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(w * h);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) img.pixels[y * w + x] = static_cast<double>(x + 2 * y);
  return img;
}

}  // namespace

TEST_CASE("image to pmf") {
  SUBCASE("constant image is uniform") {
    const DiscreteDensity d = image_to_pmf(constant_image(4, 3, 7.0));
    CHECK(tv_distance(d, DiscreteDensity::uniform(12)) <= 1e-15);
  }
  SUBCASE("hand-checked 2x2") {
    GrayImage img;
    img.width = 2;
    img.height = 2;
    img.pixels.resize(4);
    img.pixels << 1.0, 3.0, 0.0, 4.0;
    const DiscreteDensity d = image_to_pmf(img);
    CHECK(d[0] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(d[2] == 0.0);
    CHECK(d[3] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.values().sum() == 1.0);
  }
  SUBCASE("scale invariance") {
    sdl::Rng rng(1);
    GrayImage img;
    img.width = 5;
    img.height = 4;
    img.pixels.resize(20);
    for (Eigen::Index i = 0; i < 20; ++i) img.pixels[i] = rng.uniform();
    GrayImage scaled = img;
    scaled.pixels *= 37.5;
    CHECK(tv_distance(image_to_pmf(img), image_to_pmf(scaled)) <= 1e-12);
  }
  SUBCASE("all-zero image rejected") {
    CHECK_THROWS_AS(image_to_pmf(constant_image(2, 2, 0.0)), InvariantError);
  }
}

TEST_CASE("gradient covariance descriptors") {
  FeatureConfig cfg;
  cfg.block_size = 8;
  SUBCASE("constant block: only the intensity channel survives") {
    cfg.sigma = 0.5;
    const auto descs = gradient_covariance_descriptor(constant_image(8, 8, 3.0), cfg);
    REQUIRE(descs.size() == 1);
    const Eigen::MatrixXd m = descs[0].matrix();
    // F = (3,0,0,0,0) per pixel, 64 pixels: scatter(0,0) = 64*9, plus sigma I.
    CHECK(m(0, 0) == doctest::Approx(64.0 * 9.0 + 0.5).epsilon(1e-12));
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) {
        if (a == b) continue;
        CHECK(std::abs(m(a, b)) <= 1e-12);
      }
    CHECK(m(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("block grid count is exact") {
    cfg.block_size = 8;
    CHECK(gradient_covariance_descriptor(ramp_image(24, 16), cfg).size() == 3 * 2);
    CHECK(gradient_covariance_descriptor(ramp_image(27, 17), cfg).size() == 3 * 2);  // floor
    FeatureConfig cfg32;
    cfg32.block_size = 32;
    CHECK(gradient_covariance_descriptor(ramp_image(256, 256), cfg32).size() == 64);
  }
  SUBCASE("all descriptors are SPD with spectrum at least sigma") {
    cfg.sigma = 0.25;
    for (const auto& d : gradient_covariance_descriptor(ramp_image(32, 24), cfg)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.matrix(), Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= 0.25 - 1e-10);
      CHECK(d.dim() == 5);
    }
  }
  SUBCASE("block larger than image rejected") {
    cfg.block_size = 64;
    CHECK_THROWS_AS(gradient_covariance_descriptor(ramp_image(32, 32), cfg), DimensionError);
  }
}

TEST_CASE("texture covariance descriptors") {
  FeatureConfig cfg;
  cfg.filter_bank = FilterBank::texture_eth80;
  SUBCASE("constant image collapses to sigma I") {
    cfg.sigma = 0.75;
    const SpdMatrix d = texture_covariance_descriptor(constant_image(10, 10, 2.0), nullptr, cfg);
    CHECK((d.matrix() - 0.75 * Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-10);
  }
  SUBCASE("output is 6x6 SPD") {
    const SpdMatrix d = texture_covariance_descriptor(ramp_image(12, 12), nullptr, cfg);
    CHECK(d.dim() == 6);
  }
  SUBCASE("mask below 36 pixels rejected") {
    GrayImage mask = constant_image(12, 12, 0.0);
    for (int i = 0; i < 35; ++i) mask.pixels[i] = 1.0;
    CHECK_THROWS_AS(texture_covariance_descriptor(ramp_image(12, 12), &mask, cfg), InvariantError);
    mask.pixels[35] = 1.0;
    CHECK_NOTHROW(texture_covariance_descriptor(ramp_image(12, 12), &mask, cfg));
  }
  SUBCASE("mask restricts the statistics") {
    GrayImage img = ramp_image(12, 12);
    GrayImage mask = constant_image(12, 12, 1.0);
    const SpdMatrix full = texture_covariance_descriptor(img, &mask, cfg);
    const SpdMatrix none = texture_covariance_descriptor(img, nullptr, cfg);
    CHECK((full.matrix() - none.matrix()).norm() <= 1e-12);
    for (Eigen::Index i = 0; i < 72; ++i) mask.pixels[i] = 0.0;
    const SpdMatrix half = texture_covariance_descriptor(img, &mask, cfg);
    CHECK((half.matrix() - none.matrix()).norm() > 1e-8);
  }
}

TEST_CASE("pgm io") {
  TempDir dir("pgm");
  SUBCASE("binary round trip") {
    GrayImage img = ramp_image(7, 5);
    write_pgm(dir.file("a.pgm"), img, 255);
    const GrayImage back = load_pgm(dir.file("a.pgm"));
    CHECK(back.width == 7);
    CHECK(back.height == 5);
    CHECK((back.pixels - img.pixels).lpNorm<Eigen::Infinity>() <= 0.5);
  }
  SUBCASE("16-bit round trip") {
    GrayImage img = ramp_image(6, 4);
    img.pixels *= 900.0;
    write_pgm(dir.file("b.pgm"), img, 65535);
    const GrayImage back = load_pgm(dir.file("b.pgm"));
    CHECK((back.pixels - img.pixels).lpNorm<Eigen::Infinity>() <= 0.5);
  }
  SUBCASE("ascii P2 with comments") {
    std::ofstream out(dir.file("c.pgm"));
    out << "P2\n# a comment\n2 2\n# more\n255\n10 20\n30 40\n";
    out.close();
    const GrayImage img = load_pgm(dir.file("c.pgm"));
    CHECK(img.pixels[0] == 10.0);
    CHECK(img.pixels[3] == 40.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_pgm(dir.file("missing.pgm")), IoError);
    std::ofstream out(dir.file("bad.pgm"), std::ios::binary);
    out << "P5\n4 4\n255\nab";  // truncated
    out.close();
    CHECK_THROWS_AS(load_pgm(dir.file("bad.pgm")), IoError);
    std::ofstream out2(dir.file("notpgm.txt"));
    out2 << "hello";
    out2.close();
    CHECK_THROWS_AS(load_pgm(dir.file("notpgm.txt")), IoError);
  }
}

TEST_CASE("directory ingestion") {
  TempDir dir("dataset");
  namespace fs = std::filesystem;
  fs::create_directories(dir.path() / "catA");
  fs::create_directories(dir.path() / "catB");
  sdl::Rng rng(2);
  for (int i = 0; i < 3; ++i) {
    GrayImage img = ramp_image(8, 8);
    img.pixels[static_cast<Eigen::Index>(i)] += 5.0;
    write_pgm((dir.path() / "catA" / ("img" + std::to_string(i) + ".pgm")).string(), img);
  }
  {
    GrayImage img = ramp_image(8, 8);
    write_pgm((dir.path() / "catB" / "only.pgm").string(), img);
    // a malformed file that must be skipped and reported
    std::ofstream bad((dir.path() / "catB" / "broken.pgm").string());
    bad << "P5\n9 9\n255\nxx";
  }
  FeatureConfig cfg;
  SUBCASE("pmf mode with labels and skips") {
    const ImageDatasetResult res = extract_image_dataset(dir.path().string(), true, cfg);
    CHECK(res.densities.size() == 4);
    CHECK(res.labels == std::vector<int>{0, 0, 0, 1});
    CHECK(res.class_names == std::vector<std::string>{"catA", "catB"});
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].find("broken.pgm") != std::string::npos);
  }
  SUBCASE("descriptor mode") {
    cfg.block_size = 4;
    const ImageDatasetResult res = extract_image_dataset(dir.path().string(), false, cfg);
    CHECK(res.descriptors.size() == 4 * 4);  // 4 images, 2x2 blocks each
    CHECK(res.labels.size() == 16);
  }
  SUBCASE("deterministic ordering") {
    const ImageDatasetResult a = extract_image_dataset(dir.path().string(), true, cfg);
    const ImageDatasetResult b = extract_image_dataset(dir.path().string(), true, cfg);
    REQUIRE(a.densities.size() == b.densities.size());
    for (std::size_t i = 0; i < a.densities.size(); ++i)
      CHECK(tv_distance(a.densities[i], b.densities[i]) == 0.0);
  }
}

TEST_CASE("derivative filters annihilate constants") {
  FeatureConfig cfg;
  cfg.block_size = 6;
  cfg.sigma = 1.0;
  const auto descs = gradient_covariance_descriptor(constant_image(6, 6, 5.0), cfg);
  const Eigen::MatrixXd m = descs[0].matrix();
  for (int c = 1; c < 5; ++c) CHECK(m(c, c) == doctest::Approx(1.0).epsilon(1e-14));
}
