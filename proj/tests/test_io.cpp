#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "sdl/io.hpp"

using namespace sdl;
using sdltest::TempDir;

TEST_CASE("density file round trip") {
  TempDir dir("density_io");
  Rng rng(1);
  std::vector<DiscreteDensity> rows;
  for (int i = 0; i < 5; ++i) rows.emplace_back(rng.simplex_point(6));
  std::vector<int> labels{3, 1, 4, 1, 5};
  save_density_file(dir.file("d.txt"), rows, &labels);
  const DensityDataset back = load_density_file(dir.file("d.txt"));
  CHECK(back.bins == 6);
  CHECK(back.labels == labels);
  REQUIRE(back.densities.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(tv_distance(back.densities[i], rows[i]) <= 1e-15);

  SUBCASE("unlabeled rows load with label -1") {
    save_density_file(dir.file("u.txt"), rows, nullptr);
    const DensityDataset u = load_density_file(dir.file("u.txt"));
    CHECK(u.labels == std::vector<int>(5, -1));
  }
}

TEST_CASE("density loader normalization rules") {
  TempDir dir("density_rules");
  SUBCASE("small drift renormalized") {
    std::ofstream out(dir.file("ok.txt"));
    out << "0.5 0.5000004\n";
    out.close();
    const DensityDataset ds = load_density_file(dir.file("ok.txt"));
    CHECK(ds.densities[0].values().sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("large drift rejected") {
    std::ofstream out(dir.file("bad.txt"));
    out << "0.5 0.6\n";
    out.close();
    CHECK_THROWS_AS(load_density_file(dir.file("bad.txt")), IoError);
  }
  SUBCASE("negative rejected") {
    std::ofstream out(dir.file("neg.txt"));
    out << "-0.1 1.1\n";
    out.close();
    CHECK_THROWS_AS(load_density_file(dir.file("neg.txt")), IoError);
  }
  SUBCASE("header bins enforced") {
    std::ofstream out(dir.file("hdr.txt"));
    out << "# bins=3\n0.5 0.5\n";
    out.close();
    CHECK_THROWS_AS(load_density_file(dir.file("hdr.txt")), IoError);
  }
  SUBCASE("missing file names the path") {
    try {
      load_density_file(dir.file("nope.txt"));
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("nope.txt") != std::string::npos);
    }
  }
}

TEST_CASE("spd file round trip") {
  TempDir dir("spd_io");
  Rng rng(2);
  std::vector<SpdMatrix> mats;
  for (int i = 0; i < 4; ++i) mats.push_back(sdltest::random_spd(rng, 3));
  std::vector<int> labels{0, 1, 0, 1};
  save_spd_file(dir.file("s.txt"), mats, &labels);
  const SpdDataset back = load_spd_file(dir.file("s.txt"));
  CHECK(back.dim == 3);
  CHECK(back.labels == labels);
  REQUIRE(back.matrices.size() == 4);
  for (int i = 0; i < 4; ++i) {
    // 17 significant digits round-trip exactly.
    CHECK((back.matrices[static_cast<std::size_t>(i)].matrix() -
           mats[static_cast<std::size_t>(i)].matrix()).norm() == 0.0);
  }
  SUBCASE("bad header rejected") {
    std::ofstream out(dir.file("bad.txt"));
    out << "spdx 3 1\n";
    out.close();
    CHECK_THROWS_AS(load_spd_file(dir.file("bad.txt")), IoError);
  }
  SUBCASE("count mismatch rejected") {
    std::ofstream out(dir.file("short.txt"));
    out << "spd 2 2\n1 0 0 1\n";
    out.close();
    CHECK_THROWS_AS(load_spd_file(dir.file("short.txt")), IoError);
  }
  SUBCASE("non-spd row rejected with line number") {
    std::ofstream out(dir.file("ind.txt"));
    out << "spd 2 1\n1 2 2 1\n";
    out.close();
    try {
      load_spd_file(dir.file("ind.txt"));
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
}

TEST_CASE("codes file round trip") {
  TempDir dir("codes_io");
  Rng rng(3);
  Eigen::MatrixXd w(3, 4);
  for (int i = 0; i < 3; ++i) w.row(i) = rng.simplex_point(4).transpose();
  w(1, 2) = 0.0;
  w.row(1) /= w.row(1).sum();
  const CodeMatrix codes(w);
  save_codes_file(dir.file("c.txt"), codes);
  const CodeMatrix back = load_codes_file(dir.file("c.txt"));
  CHECK((back.weights() - codes.weights()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("density model round trip") {
  TempDir dir("dmodel");
  Rng rng(4);
  std::vector<DiscreteDensity> atoms;
  for (int j = 0; j < 3; ++j)
    atoms.push_back(smooth_density(DiscreteDensity(rng.simplex_point(5)), 1e-9));
  SdlConfig config;
  config.num_atoms = 3;
  config.seed = 99;
  config.divergence = Divergence::hellinger;
  DensityModel model{DensityDictionary(atoms), config, 0.125, 66.6, 42, true};
  save_density_model(dir.file("m.json"), model);
  const DensityModel back = load_density_model(dir.file("m.json"));
  CHECK(back.dictionary.size() == 3);
  CHECK(back.dictionary.bins() == 5);
  for (int j = 0; j < 3; ++j)
    CHECK((back.dictionary.atom(j).values() - atoms[static_cast<std::size_t>(j)].values()).norm() == 0.0);
  CHECK(back.config.seed == 99);
  CHECK(back.config.divergence == Divergence::hellinger);
  CHECK(back.final_objective == 0.125);
  CHECK(back.iterations == 42);
  CHECK(back.converged);
  CHECK_THROWS_AS(load_density_model(dir.file("missing.json")), IoError);
  SUBCASE("wrong format tag rejected") {
    std::ofstream out(dir.file("wrong.json"));
    out << "{\"format\": \"other\"}";
    out.close();
    CHECK_THROWS_AS(load_density_model(dir.file("wrong.json")), IoError);
  }
}

TEST_CASE("spd model round trip") {
  TempDir dir("smodel");
  Rng rng(5);
  std::vector<SpdMatrix> atoms;
  for (int j = 0; j < 2; ++j) atoms.push_back(sdltest::random_spd(rng, 4));
  SpdModel model{SpdDictionary(atoms), SdlConfig::spd_defaults(), 0.5, 75.0, 0.01, 10, false};
  save_spd_model(dir.file("m.json"), model);
  const SpdModel back = load_spd_model(dir.file("m.json"));
  CHECK(back.dictionary.size() == 2);
  CHECK(back.dictionary.dim() == 4);
  for (int j = 0; j < 2; ++j)
    CHECK((back.dictionary.atom(j).matrix() - atoms[static_cast<std::size_t>(j)].matrix()).norm() == 0.0);
  CHECK(back.mean_airm_error == 0.01);
  CHECK_FALSE(back.converged);
}

TEST_CASE("metrics record") {
  MetricsRecord m;
  m.mode = "density";
  m.objective = 1.5;
  m.sparsity = 80.0;
  m.recon_error = 0.01;
  m.wall_time_s = 2.0;
  m.iterations = 7;
  m.seed = 3;
  m.converged = true;
  const std::string j = m.to_json();
  CHECK(j.find("\"mode\":\"density\"") != std::string::npos);
  CHECK(j.find("\"sparsity\":80.0") != std::string::npos);
  CHECK(j.find("wall_time") == std::string::npos);  // excluded from the artifact
  CHECK(m.to_text().find("wall_time_s") != std::string::npos);
  m.sparsity = 101.0;
  CHECK_THROWS_AS(m.validate(), InvariantError);
}

TEST_CASE("code table export") {
  TempDir dir("table");
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 0.0, 0.25, 0.75;
  save_code_table(dir.file("t.txt"), CodeMatrix(w), {4, 7});
  const std::string text = sdltest::read_file(dir.file("t.txt"));
  CHECK(text.find("# label w0 w1") != std::string::npos);
  CHECK(text.find("4 1 0") != std::string::npos);
  CHECK(text.find("7 0.25 0.75") != std::string::npos);
}
