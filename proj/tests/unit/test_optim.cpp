#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "iwan/optim.hpp"

using namespace iwan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("sgd without a ball is a plain gradient step") {
  OptimizerState s = OptimizerState::make(OptimizerKind::sgd, 0.1, kInf, 3);
  const Eigen::VectorXd p = vec({1.0, -2.0, 0.5});
  const Eigen::VectorXd g = vec({0.3, 0.0, -4.0});
  const Eigen::VectorXd next = step(s, p, g);
  CHECK(next == Eigen::VectorXd(p - 0.1 * g));
  CHECK(s.steps == 1);
}

TEST_CASE("adagrad first step is tau times the sign of the gradient") {
  OptimizerState s = OptimizerState::make(OptimizerKind::adagrad, 0.05, kInf, 3);
  const Eigen::VectorXd p = vec({0.0, 1.0, -1.0});
  const Eigen::VectorXd g = vec({2.0, -0.5, 1e-3});
  const Eigen::VectorXd next = step(s, p, g);
  for (int i = 0; i < 3; ++i) {
    CHECK(next[i] - p[i] == doctest::Approx(-0.05 * g[i] / std::sqrt(g[i] * g[i] + 1e-8)).epsilon(1e-14));
    CHECK(next[i] - p[i] == doctest::Approx(-0.05 * std::copysign(1.0, g[i])).epsilon(1e-2));
  }
  CHECK(s.first == g.cwiseAbs2());
}

TEST_CASE("adagrad accumulator never decreases") {
  OptimizerState s = OptimizerState::make(OptimizerKind::adagrad, 0.01, kInf, 5);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd g(5);
    for (int i = 0; i < 5; ++i) g[i] = n(rng);
    const Eigen::VectorXd before = s.first;
    p = step(s, p, g);
    CHECK((s.first.array() >= before.array()).all());
  }
}

TEST_CASE("adam first step has magnitude tau") {
  OptimizerState s = OptimizerState::make(OptimizerKind::adam, 0.01, kInf, 2);
  const Eigen::VectorXd p = vec({1.0, 1.0});
  const Eigen::VectorXd next = step(s, p, vec({3.0, -0.2}));
  CHECK(next[0] == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(next[1] == doctest::Approx(1.01).epsilon(1e-9));
}

TEST_CASE("projection keeps every iterate inside the ball") {
  const double bound = 2.0;  // radius 2
  for (OptimizerKind kind : {OptimizerKind::sgd, OptimizerKind::adagrad, OptimizerKind::adam}) {
    CAPTURE(to_string(kind));
    OptimizerState s = OptimizerState::make(kind, 0.5, bound, 4);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(4);
    for (int k = 0; k < 30; ++k) {
      p = step(s, p, Eigen::VectorXd::Constant(4, -3.0));
      CHECK(p.norm() <= 2.0 * (1.0 + 1e-12));
    }
    CHECK(p.norm() == doctest::Approx(2.0));
  }
  OptimizerState s = OptimizerState::make(OptimizerKind::sgd, 1.0, 0.5, 2);
  const Eigen::VectorXd next = step(s, vec({0.0, 0.0}), vec({-3.0, -4.0}));
  CHECK(next.norm() == doctest::Approx(1.0));
  CHECK(next[0] == doctest::Approx(0.6));
}

TEST_CASE("non-finite gradients abort without touching the state") {
  OptimizerState s = OptimizerState::make(OptimizerKind::adagrad, 0.1, kInf, 3);
  const Eigen::VectorXd p = vec({1.0, 2.0, 3.0});
  Eigen::VectorXd g = vec({1.0, std::nan(""), 0.0});
  CHECK_THROWS_AS(step(s, p, g), OptimizerAbort);
  CHECK(s.first.isZero());
  CHECK(s.steps == 0);
  g[1] = kInf;
  CHECK_THROWS_AS(step(s, p, g), OptimizerAbort);
  CHECK_THROWS_AS(step(s, p, vec({1.0, 2.0})), std::invalid_argument);
  CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), std::invalid_argument);
  CHECK(parse_optimizer_kind("adam") == OptimizerKind::adam);
  CHECK_THROWS_AS(OptimizerState::make(OptimizerKind::sgd, 0.0, kInf, 1), std::invalid_argument);
}

TEST_CASE("gradient mapping") {
  const Eigen::VectorXd g = vec({0.3, -0.7, 2.0});
  CHECK(gradient_mapping(vec({5.0, 1.0, -2.0}), g, 0.1, kInf) == g);
  // Origin, step stays inside the ball.
  const Eigen::VectorXd inside = gradient_mapping(Eigen::VectorXd::Zero(3), g, 0.1, 50.0);
  CHECK((inside - g).norm() < 1e-12);
  // On the sphere with the negative gradient pointing outward: the step is
  // projected back onto the starting point and the mapping vanishes.
  const Eigen::VectorXd on = vec({6.0, 8.0, 0.0});  // radius 10, B = 50
  const Eigen::VectorXd outward = -0.2 * on;
  CHECK(gradient_mapping(on, outward, 0.1, 50.0).norm() < 1e-12);
  // Gradient pointing outward (descent moves inward): unprojected, |G| = |grad|.
  const Eigen::VectorXd inward = 0.2 * on;
  CHECK(gradient_mapping(on, inward, 0.1, 50.0).norm() == doctest::Approx(inward.norm()));
  CHECK_THROWS_AS(gradient_mapping(on, g, 0.0, 50.0), std::invalid_argument);
}

TEST_CASE("g_norm reduction") {
  CHECK(g_norm_from_traces({{9.0}}) == 3.0);
  CHECK(g_norm_from_traces({{4.0, 1.0, 2.0}, {4.0, 3.0, 0.0}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(g_norm_from_traces({}), std::invalid_argument);

  // Gradient descent on |theta|^2 / 2 with exact gradients.
  OptimizerState s = OptimizerState::make(OptimizerKind::sgd, 0.2, kInf, 4);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(4, 1.0);
  std::vector<double> trace;
  for (int j = 0; j < 200; ++j) {
    trace.push_back(gradient_mapping(p, p, 0.2, kInf).squaredNorm());
    p = step(s, p, p);
  }
  CHECK(g_norm_from_traces({trace}) < 1e-12);
}

TEST_CASE("min squared gradient mapping falls with the sample size on a noisy convex toy") {
  // L(theta) = |theta|^2 / 2 with gradient noise of variance sigma^2 / N per coordinate.
  const int dim = 10;
  const int iterations = 150;
  const double tau = 0.1;
  std::vector<double> means;
  for (int n : {25, 100, 400}) {
    std::vector<std::vector<double>> runs;
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
      OptimizerState s = OptimizerState::make(OptimizerKind::sgd, tau, 50.0, dim);
      Eigen::VectorXd p = Eigen::VectorXd::Constant(dim, 1.0);
      std::vector<double> trace;
      for (int j = 0; j < iterations; ++j) {
        Eigen::VectorXd g = p;
        for (int i = 0; i < dim; ++i) g[i] += noise(rng);
        trace.push_back(gradient_mapping(p, p, tau, 50.0).squaredNorm());
        p = step(s, p, g);
      }
      runs.push_back(trace);
    }
    means.push_back(std::pow(g_norm_from_traces(runs), 2));
  }
  CHECK(means[1] < 1.2 * means[0]);
  CHECK(means[2] < 1.2 * means[1]);
  CHECK(means[2] < means[0]);
}
