#include <doctest.h>

#include <cmath>
#include <random>

#include "iwan/loss.hpp"

using namespace iwan;

namespace {

struct Fixture {
  ProblemSpec problem;
  TrainingBatch batch;
  NetworkQuad nets;
};

Network make_net(NetworkRole role, int input_dim, std::uint64_t seed) {
  Mlp mlp(schedule_spec(role, input_dim, 4, 6));
  ParamVector p = mlp.init_params(seed);
  return Network{std::move(mlp), std::move(p)};
}

Fixture make_fixture(const std::string& id, int dim, std::size_t n_int, std::size_t n_bd, double sigma = 0.0) {
  ProblemSpec problem = make_problem(id, dim, sigma);
  const BoxDomain& box = problem.input_domain();
  Rng ri = make_stream(11, stream::interior);
  Rng rb = make_stream(11, stream::boundary);
  Rng rn = make_stream(11, stream::noise);
  SampleBatch interior = sample_interior(box, n_int, Density::uniform(), ri);
  SampleBatch boundary = sample_boundary(box, n_bd, rb, problem.dim());
  std::optional<SampleBatch> initial;
  if (problem.time_dependent()) {
    Rng rs = make_stream(11, stream::initial_slab);
    initial = sample_face(box, problem.dim(), box.lower()[problem.dim()], n_bd / 2, rs);
  }
  TrainingBatch batch = make_training_batch(problem, std::move(interior), std::move(boundary), std::move(initial), rn);
  const int in = problem.input_dim();
  NetworkQuad nets{make_net(NetworkRole::solution, in, 1), make_net(NetworkRole::coefficient, in, 2),
                   make_net(NetworkRole::test, in, 3), make_net(NetworkRole::test, in, 4)};
  return Fixture{std::move(problem), std::move(batch), std::move(nets)};
}

// The scalar whose gradient loss_and_grads returns for `role`.
double objective(const Fixture& f, const NetworkQuad& nets, Role role, const LossWeights& w) {
  const LossBundle b = loss_and_grads(nets, role, f.batch, f.problem, w);
  const double pen_theta = w.penalty_theta * nets.get(role).params.squaredNorm();
  const double pen_eta = w.penalty_eta * nets.get(role).params.squaredNorm();
  if (role == Role::u || role == Role::gamma) return b.total + pen_theta;
  return -b.e_value + pen_eta;
}

void check_fd(Fixture& f, Role role, const LossWeights& w) {
  CAPTURE(f.problem.id());
  CAPTURE(to_string(role));
  const LossBundle b = loss_and_grads(f.nets, role, f.batch, f.problem, w);
  REQUIRE(!b.degenerate);
  const ParamVector& g = b.grad;
  const double scale = g.cwiseAbs().maxCoeff();
  REQUIRE(scale > 0.0);
  std::mt19937_64 pick(static_cast<std::uint64_t>(role) + 99);
  std::uniform_int_distribution<Eigen::Index> idx(0, g.size() - 1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index j = idx(pick);
    NetworkQuad plus = f.nets;
    NetworkQuad minus = f.nets;
    const double h = 1e-6;
    plus.get(role).params[j] += h;
    minus.get(role).params[j] -= h;
    const double fd = (objective(f, plus, role, w) - objective(f, minus, role, w)) / (2.0 * h);
    CAPTURE(j);
    CHECK(std::abs(fd - g[j]) <= 1e-4 * (std::abs(g[j]) + 1e-2 * scale));
  }
}

BatchEval truth_fields(const ProblemSpec& p, const Eigen::MatrixXd& pts, bool gamma) {
  BatchEval e;
  e.values.resize(pts.cols());
  e.input_grads = Eigen::MatrixXd::Zero(p.input_dim(), pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const TruthPoint t = p.eval_truth(pts.col(i));
    e.values[i] = gamma ? t.gamma : t.u;
    if (!gamma) {
      e.input_grads.col(i).head(p.dim()) = t.grad_u;
      if (p.time_dependent()) e.input_grads(p.dim(), i) = t.u_t;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("cutoff vanishes on faces and is one at the center") {
  const BoxDomain box = BoxDomain::cube(3, -1.0, 1.0);
  CHECK(cutoff_phi0(box, box.center()).value == doctest::Approx(1.0));
  Eigen::VectorXd x(3);
  x << 1.0, 0.3, -0.2;
  CHECK(cutoff_phi0(box, x).value == 0.0);
  x << 0.3, -1.0, 0.5;
  CHECK(cutoff_phi0(box, x).value == 0.0);
  // Only the first axis constrained.
  x << 0.0, 1.0, 1.0;
  CHECK(cutoff_phi0(box, x, 1).value == doctest::Approx(1.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd z(3);
    for (int i = 0; i < 3; ++i) z[i] = u(rng);
    const CutoffValue c = cutoff_phi0(box, z);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd zp = z, zm = z;
      zp[i] += 1e-6;
      zm[i] -= 1e-6;
      const double fd = (cutoff_phi0(box, zp).value - cutoff_phi0(box, zm).value) / 2e-6;
      CHECK(std::abs(fd - c.grad[i]) < 1e-8);
    }
  }
}

TEST_CASE("zero test network is flagged degenerate") {
  Fixture f = make_fixture("test1", 2, 200, 80);
  f.nets.phi.params.setZero();
  const WeakResidual r = weak_residual(f.nets, f.batch, f.problem);
  CHECK(r.degenerate);
  CHECK(r.e_value == 0.0);
  const LossBundle b = loss_and_grads(f.nets, Role::phi, f.batch, f.problem, LossWeights{});
  CHECK(b.degenerate);
  CHECK(b.grad.isZero());
  CHECK(std::isfinite(b.total));
}

TEST_CASE("parameter gradients match finite differences, dirichlet") {
  Fixture f = make_fixture("test1", 2, 300, 120);
  const LossWeights w{10.0, 1.0, 0.0, 0.0};
  for (Role r : {Role::u, Role::gamma, Role::phi, Role::phibar}) check_fd(f, r, w);
}

TEST_CASE("parameter gradients match finite differences, flux boundary") {
  Fixture f = make_fixture("test5", 2, 300, 120);
  const LossWeights w{10.0, 1.0, 1e-3, 1e-3};
  for (Role r : {Role::u, Role::gamma, Role::phi, Role::phibar}) check_fd(f, r, w);
}

TEST_CASE("parameter gradients match finite differences, parabolic") {
  Fixture f = make_fixture("test6", 2, 300, 120, 0.05);
  const LossWeights w{10.0, 1.0, 0.0, 0.0};
  for (Role r : {Role::u, Role::gamma, Role::phi, Role::phibar}) check_fd(f, r, w);
}

TEST_CASE("boundary loss of a shifted truth is the perimeter times the shift squared") {
  Fixture f = make_fixture("test1", 2, 10, 400);
  const double delta = 0.1;
  BatchEval u = truth_fields(f.problem, f.batch.boundary.points, false);
  const BatchEval g = truth_fields(f.problem, f.batch.boundary.points, true);
  CHECK(boundary_loss_from_fields(f.problem, f.batch, u, g.values) == doctest::Approx(0.0).epsilon(1e-12));
  u.values.array() += delta;
  CHECK(boundary_loss_from_fields(f.problem, f.batch, u, g.values) == doctest::Approx(8.0 * delta * delta));
}

TEST_CASE("flux boundary only sees gamma du/dn") {
  Fixture f = make_fixture("test5", 2, 10, 200);
  BatchEval u = truth_fields(f.problem, f.batch.boundary.points, false);
  BatchEval g = truth_fields(f.problem, f.batch.boundary.points, true);
  const double base = boundary_loss_from_fields(f.problem, f.batch, u, g.values);
  CHECK(base == doctest::Approx(0.0).epsilon(1e-12));
  u.values.array() += 3.0;
  CHECK(boundary_loss_from_fields(f.problem, f.batch, u, g.values) == doctest::Approx(0.0).epsilon(1e-12));
  // Scaling gamma by 2 and du/dn by 1/2 leaves the flux unchanged.
  g.values *= 2.0;
  u.input_grads *= 0.5;
  CHECK(boundary_loss_from_fields(f.problem, f.batch, u, g.values) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("weak residual vanishes at the truth up to Monte-Carlo error") {
  for (const char* id : {"test1", "test2", "test5", "test6"}) {
    CAPTURE(id);
    Fixture f = make_fixture(id, 2, 20000, 10);
    const Eigen::MatrixXd& x = f.batch.interior.points;
    const BatchEval u = truth_fields(f.problem, x, false);
    const BatchEval g = truth_fields(f.problem, x, true);
    const BatchEval test = f.nets.phi.mlp.forward_batch(f.nets.phi.params, x, true);
    Eigen::VectorXd h;
    const WeakResidual r = weak_residual_from_fields(f.problem, f.batch, u, g.values, test, &h);
    const double n = static_cast<double>(h.size());
    const double se = std::sqrt((h.array() - h.mean()).square().sum() / (n - 1.0) / n);
    CHECK(std::abs(r.integral) < 4.0 * se + 1e-12);
    // A wrong coefficient leaves a residual well above that.
    const Eigen::VectorXd g2 = (g.values.array() * 1.5).matrix();
    const WeakResidual wrong = weak_residual_from_fields(f.problem, f.batch, u, g2, test);
    if (std::string(id) != "test5") CHECK(std::abs(wrong.integral) > 8.0 * se);
  }
}

TEST_CASE("zero primal networks with zero source give zero interior gradients") {
  Fixture f = make_fixture("test5", 2, 200, 80);
  f.nets.u.params.setZero();
  f.nets.gamma.params.setZero();
  const LossWeights w{0.0, 1.0, 0.0, 0.0};
  for (Role r : {Role::u, Role::gamma, Role::phi}) {
    const LossBundle b = loss_and_grads(f.nets, r, f.batch, f.problem, w);
    // f is zero up to rounding in the closed-form derivatives.
    CHECK(b.e_value < 1e-28);
    CHECK(b.grad.lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("assembler cache reuses forward passes only for identical parameters") {
  Fixture f = make_fixture("test1", 2, 200, 80);
  LossAssembler a(f.problem, f.batch, LossWeights{});
  const WeakResidual r1 = a.weak_residual(f.nets.u, f.nets.gamma, f.nets.phi);
  NetworkQuad changed = f.nets;
  changed.u.params *= 1.1;
  const WeakResidual r2 = a.weak_residual(changed.u, changed.gamma, changed.phi);
  const WeakResidual fresh = weak_residual(changed, f.batch, f.problem);
  CHECK(r1.integral != r2.integral);
  CHECK(r2.integral == fresh.integral);
  CHECK(a.weak_residual(f.nets.u, f.nets.gamma, f.nets.phi).integral == r1.integral);
}
