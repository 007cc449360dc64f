#include <doctest.h>

#include <sstream>

#include "iwan/solver.hpp"

using namespace iwan;

namespace {

SolveConfig small_config() {
  SolveConfig c;
  c.iterations = 12;
  c.n_interior = 200;
  c.n_boundary = 40;
  c.u_shape = c.gamma_shape = c.test_shape = NetShape{4, 6};
  c.eval_cadence = 5;
  c.grid_per_axis = 20;
  c.seed = 42;
  return c;
}

std::string history_csv(const SolveHistory& h) {
  std::ostringstream out;
  write_history_csv(out, h);
  return out.str();
}

}  // namespace

TEST_CASE("zero iterations records only the initial state") {
  const ProblemSpec p = make_problem("test1", 2);
  SolveConfig c = small_config();
  c.iterations = 0;
  const SolveResult r = iwan_solve(p, c);
  REQUIRE(r.history.records.size() == 1);
  CHECK(r.history.records[0].iteration == 0);
  CHECK(r.history.grad_mapping_sq.empty());
  CHECK(r.final_error == r.history.records[0].rel_error);
}

TEST_CASE("history cadence and update counts") {
  const ProblemSpec p = make_problem("test1", 2);
  SolveConfig c = small_config();
  c.iterations = 7;
  c.eval_cadence = 3;
  c.inner_steps = 3;
  IwanSolver s(p, c);
  s.run();
  std::vector<int> its;
  for (const HistoryRecord& r : s.history().records) its.push_back(r.iteration);
  CHECK(its == std::vector<int>{0, 3, 6, 7});
  CHECK(s.history().grad_mapping_sq.size() == 7);
  CHECK(s.optimizer(Role::u).steps == 7);
  CHECK(s.optimizer(Role::gamma).steps == 7);
  CHECK(s.optimizer(Role::phi).steps == 21);
  CHECK(s.optimizer(Role::phibar).steps == 21);
  for (const HistoryRecord& r : s.history().records) {
    CHECK(std::isfinite(r.total));
    CHECK(r.total == doctest::Approx(c.beta_prime * r.e_value + c.beta * r.l_bdry));
  }
}

TEST_CASE("runs are deterministic") {
  const ProblemSpec p = make_problem("test6", 1, 0.01);
  const SolveConfig c = small_config();
  const SolveResult a = iwan_solve(p, c);
  const SolveResult b = iwan_solve(p, c);
  CHECK(history_csv(a.history) == history_csv(b.history));
  CHECK(a.nets.gamma.params == b.nets.gamma.params);
  SolveConfig other = c;
  other.seed = 43;
  CHECK(history_csv(iwan_solve(p, other).history) != history_csv(a.history));
}

TEST_CASE("fresh batches every iteration") {
  const ProblemSpec p = make_problem("test6", 2, 0.1);
  IwanSolver s(p, small_config());
  const TrainingBatch b1 = s.make_batch(1);
  const TrainingBatch b1again = s.make_batch(1);
  const TrainingBatch b2 = s.make_batch(2);
  CHECK(b1.interior.points == b1again.interior.points);
  CHECK(b1.u_b == b1again.u_b);
  CHECK(b1.interior.points != b2.interior.points);
  CHECK(b1.boundary.points != b2.boundary.points);
  REQUIRE(b1.initial.has_value());
  CHECK(b1.initial->points.cols() == 40);
  CHECK((b1.initial->points.row(2).array() == 0.0).all());
  // Lateral faces only.
  for (Eigen::Index i = 0; i < b1.boundary.points.cols(); ++i) CHECK(b1.boundary.normals(2, i) == 0.0);
}

TEST_CASE("update order switch") {
  const ProblemSpec p = make_problem("test1", 2);
  SolveConfig c = small_config();
  const SolveResult inter = iwan_solve(p, c);
  c.order = UpdateOrder::algorithm1;
  const SolveResult alg = iwan_solve(p, c);
  CHECK(inter.nets.u.params != alg.nets.u.params);
  // Iteration 0 happens before any update, so it is shared.
  CHECK(inter.history.records[0].rel_error == alg.history.records[0].rel_error);
}

TEST_CASE("checkpoint resume matches an unbroken run") {
  const ProblemSpec p = make_problem("test5", 2, 0.05);
  SolveConfig c = small_config();
  c.iterations = 15;
  c.optimizers = {OptimizerKind::adam, OptimizerKind::adagrad, OptimizerKind::adagrad, OptimizerKind::sgd};
  c.ball_bound = 200.0;

  IwanSolver unbroken(p, c);
  unbroken.run();

  IwanSolver first(p, c);
  first.advance(5);
  const std::vector<std::uint8_t> blob = first.checkpoint();
  IwanSolver resumed(p, c);
  resumed.restore(blob);
  CHECK(resumed.iteration() == 5);
  resumed.advance(10);
  CHECK(resumed.finished());
  for (Role r : {Role::u, Role::gamma, Role::phi, Role::phibar}) {
    CHECK(resumed.nets().get(r).params == unbroken.nets().get(r).params);
    CHECK(resumed.optimizer(r).first == unbroken.optimizer(r).first);
    CHECK(resumed.optimizer(r).second == unbroken.optimizer(r).second);
    CHECK(resumed.optimizer(r).steps == unbroken.optimizer(r).steps);
  }
  CHECK(history_csv(resumed.history()) == history_csv(unbroken.history()));
  CHECK(resumed.history().grad_mapping_sq == unbroken.history().grad_mapping_sq);

  // A checkpoint may be resumed with a larger iteration budget.
  SolveConfig longer = c;
  longer.iterations = 30;
  IwanSolver extended(p, longer);
  CHECK_NOTHROW(extended.restore(blob));
}

TEST_CASE("malformed checkpoints are rejected") {
  const ProblemSpec p = make_problem("test1", 2);
  const SolveConfig c = small_config();
  IwanSolver s(p, c);
  s.advance(2);
  const std::vector<std::uint8_t> blob = s.checkpoint();

  IwanSolver target(p, c);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, blob.size() / 2, blob.size() - 1}) {
    CAPTURE(cut);
    const std::vector<std::uint8_t> truncated(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(target.restore(truncated), CheckpointError);
  }
  std::vector<std::uint8_t> bad = blob;
  bad[0] = 'X';
  CHECK_THROWS_AS(target.restore(bad), CheckpointError);
  bad = blob;
  bad[8] = 99;  // version
  CHECK_THROWS_WITH_AS(target.restore(bad), doctest::Contains("version"), CheckpointError);
  bad = blob;
  bad.push_back(0);
  CHECK_THROWS_AS(target.restore(bad), CheckpointError);

  SolveConfig other = c;
  other.tau_theta = 0.02;
  IwanSolver mismatched(p, other);
  CHECK_THROWS_WITH_AS(mismatched.restore(blob), doctest::Contains("different"), CheckpointError);
  IwanSolver other_problem(make_problem("test2", 2), c);
  CHECK_THROWS_AS(other_problem.restore(blob), CheckpointError);
  // A failed restore leaves the solver untouched.
  CHECK(target.iteration() == 0);
}

TEST_CASE("config validation") {
  const ProblemSpec p = make_problem("test1", 3);
  SolveConfig c = small_config();
  c.n_boundary = 5;
  CHECK_THROWS_WITH_AS(IwanSolver(p, c), doctest::Contains("n_boundary"), std::invalid_argument);
  c = small_config();
  c.inner_steps = 0;
  CHECK_THROWS_AS(IwanSolver(p, c), std::invalid_argument);
  c = small_config();
  c.iterations = -1;
  CHECK_THROWS_AS(IwanSolver(p, c), std::invalid_argument);
  c = small_config();
  c.u_shape.depth = 1;
  CHECK_THROWS_AS(IwanSolver(p, c), std::invalid_argument);
  c = small_config();
  c.density = Density::gaussian(Eigen::Vector2d::Zero(), Eigen::Vector2d(-1.0, 1.0));
  CHECK_THROWS_AS(IwanSolver(p, c), std::invalid_argument);
  CHECK_THROWS_AS(parse_update_order("random"), std::invalid_argument);
}

TEST_CASE("divergent step sizes abort with a diagnostic") {
  const ProblemSpec p = make_problem("test1", 2);
  SolveConfig c = small_config();
  c.iterations = 50;
  c.optimizers = {OptimizerKind::sgd, OptimizerKind::sgd, OptimizerKind::sgd, OptimizerKind::sgd};
  c.tau_theta = 1e150;
  c.tau_eta = 1e150;
  CHECK_THROWS_AS(iwan_solve(p, c), OptimizerAbort);
}

TEST_CASE("g_norm over single and repeated runs") {
  const ProblemSpec p = make_problem("test1", 2);
  SolveConfig c = small_config();
  c.iterations = 1;
  IwanSolver s(p, [&] {
    SolveConfig cc = c;
    cc.seed = 9;
    return cc;
  }());
  s.run();
  CHECK(g_norm(p, c, 1, 9) == std::sqrt(s.history().grad_mapping_sq[0]));
  c.iterations = 6;
  const double g = g_norm(p, c, 3, 9);
  CHECK(std::isfinite(g));
  CHECK(g > 0.0);
}

TEST_CASE("history csv layout") {
  SolveHistory h;
  h.records.push_back(HistoryRecord{0, 1.5, 0.25, 2500.0, 0.75, 10.0, 3.0});
  std::ostringstream out, timing;
  write_history_csv(out, h);
  write_timing_csv(timing, h);
  CHECK(out.str() == "iteration,e_value,l_bdry,total,rel_error_gamma,grad_mapping_norm\n0,1.5,0.25,2500,0.75,10\n");
  CHECK(timing.str() == "iteration,elapsed_seconds\n0,3\n");
}
