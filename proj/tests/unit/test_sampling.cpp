#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "iwan/sampling.hpp"

using namespace iwan;

namespace {

struct Stats {
  double mean = 0.0;
  double var = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.var += (x - s.mean) * (x - s.mean);
  s.var /= static_cast<double>(v.size() - 1);
  return s;
}

std::vector<double> estimates(const BoxDomain& box, std::size_t n, int repeats, const Density& density,
                              double (*psi)(const Eigen::VectorXd&), std::uint64_t seed0) {
  std::vector<double> out;
  for (int r = 0; r < repeats; ++r) {
    const auto batch = sample_interior(box, n, density, seed0 + static_cast<std::uint64_t>(r));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = psi(batch.points.col(i));
    out.push_back(mc_integral(batch, v));
  }
  return out;
}

}  // namespace

TEST_CASE("box domain geometry") {
  const auto box = BoxDomain::cube(3, -1, 1);
  CHECK(box.volume() == 8.0);
  CHECK(box.face_area(0) == 4.0);
  CHECK(box.boundary_area() == 24.0);
  CHECK(box.boundary_area(1) == 8.0);
  CHECK(box.distance_to_boundary(Eigen::Vector3d(0.5, 0.0, -0.9)) == doctest::Approx(0.1));
  CHECK_THROWS_AS(BoxDomain(Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)), std::invalid_argument);
}

TEST_CASE("uniform interior weights equal the volume") {
  const auto box = BoxDomain::cube(2, -1, 1);
  const auto batch = sample_interior(box, 500, Density::uniform(), 7u);
  CHECK(batch.region == Region::interior);
  CHECK((batch.weights.array() == 4.0).all());
  for (Eigen::Index i = 0; i < 500; ++i) {
    CHECK((batch.points.col(i).array().abs() < 1.0).all());
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const auto box = BoxDomain::cube(2, -1, 1);
  const auto a = sample_interior(box, 1, Density::uniform(), 99u);
  const auto b = sample_interior(box, 1, Density::uniform(), 99u);
  CHECK((a.points.array() == b.points.array()).all());
  const auto ga = sample_interior(box, 50, Density::gaussian({-0.2, 0.2}, {1.0, 25.0}), 3u);
  const auto gb = sample_interior(box, 50, Density::gaussian({-0.2, 0.2}, {1.0, 25.0}), 3u);
  CHECK((ga.points.array() == gb.points.array()).all());
  CHECK((ga.weights.array() == gb.weights.array()).all());
  const auto ba = sample_boundary(box, 10, 4u);
  const auto bb = sample_boundary(box, 10, 4u);
  CHECK((ba.points.array() == bb.points.array()).all());
}

TEST_CASE("truncated normal coordinate mean") {
  const auto box = BoxDomain::cube(5, -1, 1);
  const std::size_t n = 100000;
  const auto batch = sample_interior(box, n, Density::gaussian({-0.2, 0.2}, {1.0, 25.0}), 17u);
  // Closed-form mean of N(0.2, 0.2^2) truncated to (-1, 1).
  const double mu = 0.2, sd = 0.2;
  const double a = (-1 - mu) / sd, b = (1 - mu) / sd;
  auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); };
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  const double z = cdf(b) - cdf(a);
  const double mean = mu + sd * (pdf(a) - pdf(b)) / z;
  const double var = sd * sd * (1 + (a * pdf(a) - b * pdf(b)) / z - std::pow((pdf(a) - pdf(b)) / z, 2));
  const double emp = batch.points.row(1).mean();
  CHECK(std::abs(emp - mean) < 3 * std::sqrt(var / n));
  // Coordinates beyond the first two stay uniform.
  CHECK(std::abs(batch.points.row(3).mean()) < 3 * std::sqrt(1.0 / 3.0 / n));
}

TEST_CASE("gaussian pdf integrates to one") {
  const auto box = BoxDomain::cube(2, -1, 1);
  const Density d = Density::gaussian({-0.2, 0.2}, {1.0, 25.0});
  const int m = 800;
  double total = 0.0;
  const double h = 2.0 / m;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      total += d.pdf(box, Eigen::Vector2d(-1 + (i + 0.5) * h, -1 + (j + 0.5) * h)) * h * h;
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(d.pdf(box, Eigen::Vector2d(1.5, 0)) == 0.0);
}

TEST_CASE("rejection cap") {
  // Nearly all mass sits far outside the box.
  const auto box = BoxDomain::cube(2, -1, 1);
  CHECK_THROWS_AS(sample_interior(box, 1, Density::gaussian({60.0, 0.0}, {100.0, 1.0}), 1u), SamplingError);
  CHECK_THROWS_AS(sample_interior(box, 1, Density::gaussian({0.0, 0.0}, {0.0, 1.0}), 1u), std::invalid_argument);
}

TEST_CASE("boundary sampling splits faces evenly") {
  const auto box = BoxDomain::cube(2, -1, 1);
  const auto batch = sample_boundary(box, 4, 1u);
  CHECK(batch.region == Region::boundary);
  std::vector<Eigen::Vector2d> expected = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK((batch.normals.col(i) - expected[static_cast<std::size_t>(i)]).norm() == 0.0);
  }
  CHECK(batch.weights.sum() / 4.0 * 4.0 == doctest::Approx(32.0));

  const auto big = sample_boundary(BoxDomain::cube(3, -1, 1), 1003, 2u);
  for (Eigen::Index i = 0; i < 1003; ++i) {
    int pinned = 0;
    for (int a = 0; a < 3; ++a) pinned += std::abs(big.points(a, i)) == 1.0 ? 1 : 0;
    REQUIRE(pinned == 1);
    REQUIRE(big.normals.col(i).norm() == 1.0);
    REQUIRE(big.normals.col(i).dot(big.points.col(i)) == 1.0);
  }
  // Mean weight equals the boundary area so constants integrate exactly.
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(1003);
  CHECK(mc_integral(big, ones) == doctest::Approx(24.0).epsilon(1e-14));
}

TEST_CASE("mc_integral") {
  const auto box = BoxDomain::cube(3, -1, 1);
  const auto batch = sample_interior(box, 100, Density::uniform(), 5u);
  CHECK(mc_integral(batch, Eigen::VectorXd::Ones(100)) == 8.0);
  CHECK_THROWS_AS(mc_integral(batch, Eigen::VectorXd::Ones(99)), std::invalid_argument);

  const auto sq = BoxDomain::cube(2, -1, 1);
  auto odd = estimates(sq, 1000, 100, Density::uniform(), [](const Eigen::VectorXd& x) { return x[0]; }, 1000);
  const Stats so = stats(odd);
  CHECK(std::abs(so.mean) < 3 * std::sqrt(so.var / 100));
}

TEST_CASE("estimator is unbiased and variance scales like 1/N") {
  const auto sq = BoxDomain::cube(2, -1, 1);
  auto psi = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
  const Stats s1 = stats(estimates(sq, 2500, 200, Density::uniform(), psi, 1));
  const Stats s4 = stats(estimates(sq, 10000, 200, Density::uniform(), psi, 5000));
  CHECK(std::abs(s1.mean - 4.0 / 3.0) < 4 * std::sqrt(s1.var / 200));
  CHECK(std::abs(s4.mean - 4.0 / 3.0) < 4 * std::sqrt(s4.var / 200));
  const double ratio = s1.var / s4.var;
  CHECK(ratio > 2.5);
  CHECK(ratio < 6.0);
}

TEST_CASE("importance sampling reduces variance for a concentrated integrand") {
  const auto box = BoxDomain::cube(5, -1, 1);
  auto psi = [](const Eigen::VectorXd& x) {
    return std::exp(-0.5 * ((x[0] + 0.2) * (x[0] + 0.2) + 25.0 * (x[1] - 0.2) * (x[1] - 0.2)));
  };
  const Stats su = stats(estimates(box, 10000, 100, Density::uniform(), psi, 1));
  const Stats sg = stats(estimates(box, 10000, 100, Density::gaussian({-0.2, 0.2}, {1.0, 25.0}), psi, 1));
  CHECK(sg.var < su.var);
  CHECK(std::abs(sg.mean - su.mean) < 4 * std::sqrt(su.var / 100 + sg.var / 100));
}
