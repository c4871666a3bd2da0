#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sdl/spd.hpp"
#include "sdl/validate.hpp"

using namespace sdl;
using sdltest::random_spd;
using sdltest::random_symmetric;

namespace {

SpdMatrix scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return SpdMatrix(m);
}

SimplexWeights weights(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return SimplexWeights(x);
}

double kmeans_objective(const SpdSet& data, const SpdKmeansResult& res) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    acc += j_divergence(data[i], res.centers[static_cast<std::size_t>(res.assignments[i])]);
  return acc;
}

}  // namespace

TEST_CASE("construction validates symmetry and positivity") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(SpdMatrix{asym}, InvariantError);
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(SpdMatrix{indef}, InvariantError);
  CHECK_THROWS_AS(TangentMatrix{asym}, InvariantError);
  CHECK_NOTHROW(SpdMatrix::identity(3));
}

TEST_CASE("spd sqrt") {
  CHECK((spd_sqrt(SpdMatrix::identity(3)).matrix() - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-14);
  Eigen::MatrixXd d = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  const Eigen::MatrixXd root = spd_sqrt(SpdMatrix(d)).matrix();
  CHECK(root(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(root(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const SpdMatrix x = random_spd(rng, 5);
    const Eigen::MatrixXd s = spd_sqrt(x).matrix();
    CHECK((s * s - x.matrix()).norm() / x.matrix().norm() <= 1e-10);
    const Eigen::MatrixXd is = spd_inv_sqrt(x).matrix();
    CHECK((is * x.matrix() * is - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-10);
  }
}

TEST_CASE("exp and log maps") {
  Rng rng(4);
  SUBCASE("zero tangent is identity") {
    const SpdMatrix x = random_spd(rng, 4);
    CHECK((exp_map(x, TangentMatrix::zero(4)).matrix() - x.matrix()).norm() <= 1e-12);
    CHECK(log_map(x, x).matrix().norm() <= 1e-12);
  }
  SUBCASE("scalar closed forms") {
    CHECK(exp_map(scalar(1.0), TangentMatrix(Eigen::MatrixXd::Ones(1, 1))).matrix()(0, 0) ==
          doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    // x exp(v/x) at x=2, v=3
    CHECK(exp_map(scalar(2.0), TangentMatrix(3.0 * Eigen::MatrixXd::Ones(1, 1))).matrix()(0, 0) ==
          doctest::Approx(2.0 * std::exp(1.5)).epsilon(1e-12));
    CHECK(log_map(scalar(1.0), scalar(std::exp(1.0))).matrix()(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("mutual inverses") {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index n = 2 + rng.index(9);
      const SpdMatrix x = random_spd(rng, n);
      Eigen::MatrixXd v = random_symmetric(rng, n);
      v /= std::max(1.0, v.norm());
      const TangentMatrix back = log_map(x, exp_map(x, TangentMatrix(v)));
      CHECK((back.matrix() - v).norm() <= 1e-8);
      const SpdMatrix y = random_spd(rng, n);
      const SpdMatrix there = exp_map(x, log_map(x, y));
      CHECK((there.matrix() - y.matrix()).norm() <= 1e-8);
    }
  }
}

TEST_CASE("airm distance") {
  Rng rng(5);
  const SpdMatrix x = random_spd(rng, 3);
  CHECK(airm_distance(x, x) <= 1e-12);
  CHECK(airm_distance(scalar(1.0), scalar(4.0)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  SUBCASE("congruence invariance") {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index n = 2 + rng.index(4);
      const SpdMatrix a = random_spd(rng, n);
      const SpdMatrix b = random_spd(rng, n);
      Eigen::MatrixXd g(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
      g += 2.0 * Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd ga = g * a.matrix() * g.transpose();
      const Eigen::MatrixXd gb = g * b.matrix() * g.transpose();
      CHECK(std::abs(airm_distance(SpdMatrix(0.5 * (ga + ga.transpose())),
                                   SpdMatrix(0.5 * (gb + gb.transpose()))) -
                     airm_distance(a, b)) <= 1e-8);
    }
  }
  SUBCASE("triangle inequality") {
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::Index n = 2 + rng.index(3);
      const SpdMatrix a = random_spd(rng, n);
      const SpdMatrix b = random_spd(rng, n);
      const SpdMatrix c = random_spd(rng, n);
      CHECK(airm_distance(a, c) <= airm_distance(a, b) + airm_distance(b, c) + 1e-9);
    }
  }
}

TEST_CASE("j divergence") {
  Rng rng(6);
  const SpdMatrix x = random_spd(rng, 4);
  CHECK(std::abs(j_divergence(x, x)) <= 1e-12);
  CHECK(j_divergence(scalar(1.0), scalar(2.0)) == doctest::Approx(0.125).epsilon(1e-12));
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 2 + rng.index(4);
    const SpdMatrix a = random_spd(rng, n);
    const SpdMatrix b = random_spd(rng, n);
    CHECK(std::abs(j_divergence(a, b) - j_divergence(b, a)) <= 1e-12);
    CHECK(j_divergence(a, b) >= -1e-12);
    if (airm_distance(a, b) > 1e-5) CHECK(j_divergence(a, b) > 1e-10);
  }
}

TEST_CASE("symmetrized weighted kl center") {
  Rng rng(8);
  SUBCASE("all members equal") {
    const SpdMatrix x = random_spd(rng, 3);
    const SpdMatrix c = symmetrized_kl_center({x, x, x}, SimplexWeights::uniform(3));
    CHECK((c.matrix() - x.matrix()).norm() / x.matrix().norm() <= 1e-12);
  }
  SUBCASE("scalar closed forms") {
    const SpdMatrix c = symmetrized_kl_center({scalar(1.0), scalar(4.0)}, weights({0.5, 0.5}));
    CHECK(c.matrix()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    // A = 1.6, B = 0.85 -> sqrt(1.6/0.85)
    const SpdMatrix c2 = symmetrized_kl_center({scalar(1.0), scalar(4.0)}, weights({0.8, 0.2}));
    CHECK(c2.matrix()(0, 0) == doctest::Approx(std::sqrt(1.6 / 0.85)).epsilon(1e-12));
  }
  SUBCASE("matches the descent oracle") {
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::Index n = 2 + rng.index(4);
      const Eigen::Index count = 2 + rng.index(5);
      SpdSet set;
      for (Eigen::Index i = 0; i < count; ++i) set.push_back(random_spd(rng, n));
      SimplexWeights w(rng.simplex_point(count));
      const SpdMatrix closed = symmetrized_kl_center(set, w);
      const SpdMatrix numeric = numeric_symmetrized_center(set, w);
      CHECK((closed.matrix() - numeric.matrix()).norm() / numeric.matrix().norm() <= 1e-4);
    }
  }
  SUBCASE("diagonal case reduces elementwise") {
    const Eigen::Index n = 4, count = 3;
    SpdSet set;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
    SimplexWeights w(rng.simplex_point(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::VectorXd d(n);
      for (Eigen::Index c = 0; c < n; ++c) d[c] = 0.3 + 2.0 * rng.uniform();
      set.push_back(SpdMatrix(d.asDiagonal()));
      a += w[i] * d;
      b += w[i] * d.cwiseInverse();
    }
    const SpdMatrix c = symmetrized_kl_center(set, w);
    for (Eigen::Index i = 0; i < n; ++i)
      CHECK(std::abs(c.matrix()(i, i) - std::sqrt(a[i] / b[i])) <= 1e-10);
  }
}

TEST_CASE("spd kmeans") {
  Rng rng(21);
  SUBCASE("k equals N") {
    SpdSet data;
    for (int i = 0; i < 4; ++i) data.push_back(random_spd(rng, 3));
    const auto res = spd_kmeans(data, 4, 0);
    double worst = sdltest::match_atoms(res.centers, data, [](const SpdMatrix& a, const SpdMatrix& b) {
      return airm_distance(a, b);
    });
    CHECK(worst <= 1e-10);
  }
  SUBCASE("two tight clusters separate exactly") {
    SpdSet data;
    for (int i = 0; i < 6; ++i) {
      const double scale = i < 3 ? 1.0 : 10.0;
      Eigen::MatrixXd jitter = 0.01 * random_symmetric(rng, 2);
      Eigen::MatrixXd m = scale * Eigen::MatrixXd::Identity(2, 2) + jitter;
      data.push_back(SpdMatrix(0.5 * (m + m.transpose())));
    }
    const auto res = spd_kmeans(data, 2, 7);
    CHECK(res.assignments[0] == res.assignments[1]);
    CHECK(res.assignments[1] == res.assignments[2]);
    CHECK(res.assignments[3] == res.assignments[4]);
    CHECK(res.assignments[4] == res.assignments[5]);
    CHECK(res.assignments[0] != res.assignments[3]);
  }
  SUBCASE("k=1 gives the unweighted center") {
    SpdSet data;
    for (int i = 0; i < 5; ++i) data.push_back(random_spd(rng, 3));
    const auto res = spd_kmeans(data, 1, 3);
    const SpdMatrix expect = symmetrized_kl_center(data, SimplexWeights::uniform(5));
    CHECK((res.centers[0].matrix() - expect.matrix()).norm() / expect.matrix().norm() <= 1e-12);
  }
  SUBCASE("k > N rejected") {
    SpdSet data{random_spd(rng, 2)};
    CHECK_THROWS_AS(spd_kmeans(data, 2, 0), ParameterError);
  }
  SUBCASE("objective non-increasing across iterations") {
    SpdSet data;
    for (int i = 0; i < 12; ++i) data.push_back(random_spd(rng, 3));
    double prev = std::numeric_limits<double>::infinity();
    for (int iters = 1; iters <= 6; ++iters) {
      const auto res = spd_kmeans(data, 3, 99, iters);
      const double obj = kmeans_objective(data, res);
      CHECK(obj <= prev + 1e-9);
      prev = obj;
    }
  }
}

TEST_CASE("make spd") {
  CHECK((make_spd(Eigen::MatrixXd::Zero(3, 3), 1.0).matrix() - Eigen::MatrixXd::Identity(3, 3)).norm() <=
        1e-14);
  Eigen::MatrixXd rank1 = Eigen::MatrixXd::Zero(2, 2);
  rank1(0, 0) = 1.0;
  const Eigen::MatrixXd out = make_spd(rank1, 0.1).matrix();
  CHECK(out(0, 0) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(out(1, 1) == doctest::Approx(0.1).epsilon(1e-12));
  SUBCASE("spectral shift") {
    Rng rng(31);
    const Eigen::MatrixXd base = random_spd(rng, 4).matrix();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> before(base);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> after(make_spd(base, 0.25).matrix());
    CHECK((after.eigenvalues() - before.eigenvalues() -
           Eigen::VectorXd::Constant(4, 0.25)).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  SUBCASE("indefinite input rejected") {
    Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
    indef(1, 1) = -0.5;
    CHECK_THROWS_AS(make_spd(indef, 1.0), InvariantError);
    CHECK_THROWS_AS(make_spd(Eigen::MatrixXd::Identity(2, 2), 0.0), ParameterError);
  }
}
