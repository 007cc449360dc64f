#include "iwan/loss.hpp"

#include <stdexcept>

namespace iwan {

const char* to_string(Role role) {
  switch (role) {
    case Role::u: return "u";
    case Role::gamma: return "gamma";
    case Role::phi: return "phi";
    case Role::phibar: return "phibar";
  }
  return "unknown";
}

Network& NetworkQuad::get(Role role) {
  return const_cast<Network&>(static_cast<const NetworkQuad&>(*this).get(role));
}

const Network& NetworkQuad::get(Role role) const {
  switch (role) {
    case Role::u: return u;
    case Role::gamma: return gamma;
    case Role::phi: return phi;
    case Role::phibar: return phibar;
  }
  throw std::logic_error("unhandled role");
}

CutoffValue cutoff_phi0(const BoxDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x, int axes) {
  const int n = axes < 0 ? domain.dim() : axes;
  if (n > domain.dim() || x.size() != domain.dim()) {
    throw std::invalid_argument("cutoff_phi0: dimension mismatch");
  }
  Eigen::VectorXd factor(n), slope(n);
  for (int i = 0; i < n; ++i) {
    const double lo = domain.lower()[i];
    const double hi = domain.upper()[i];
    const double half = 0.5 * (hi - lo);
    const double scale = 1.0 / (half * half);
    factor[i] = (x[i] - lo) * (hi - x[i]) * scale;
    slope[i] = (hi + lo - 2.0 * x[i]) * scale;
  }
  CutoffValue out;
  out.value = factor.prod();
  out.grad = Eigen::VectorXd::Zero(x.size());
  for (int i = 0; i < n; ++i) {
    double others = slope[i];
    for (int k = 0; k < n; ++k) {
      if (k != i) others *= factor[k];
    }
    out.grad[i] = others;
  }
  return out;
}

TrainingBatch make_training_batch(const ProblemSpec& problem, SampleBatch interior, SampleBatch boundary,
                                  std::optional<SampleBatch> initial, Rng& noise) {
  if (interior.region != Region::interior || boundary.region != Region::boundary) {
    throw std::invalid_argument("make_training_batch: batches passed in the wrong regions");
  }
  const int d = problem.dim();
  TrainingBatch b;
  b.source = problem.source_batch(interior.points);
  const Eigen::Index n = interior.points.cols();
  b.phi0.resize(n);
  b.phi0_grad.resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const CutoffValue c = cutoff_phi0(problem.input_domain(), interior.points.col(i), d);
    b.phi0[i] = c.value;
    b.phi0_grad.col(i) = c.grad.head(d);
  }
  b.interior = std::move(interior);

  const Eigen::Index nb = boundary.points.cols();
  b.u_b.resize(nb);
  b.gamma_b.resize(nb);
  b.u_n.resize(nb);
  b.flux.resize(nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const BoundaryValues v = problem.boundary_data(boundary.points.col(i), boundary.normals.col(i), noise);
    b.u_b[i] = v.u;
    b.gamma_b[i] = v.gamma;
    b.u_n[i] = v.u_n;
    b.flux[i] = v.flux;
  }
  b.boundary = std::move(boundary);

  if (problem.boundary_kind() == BoundaryKind::thermal_mixed) {
    if (!initial) {
      throw std::invalid_argument("make_training_batch: " + problem.id() + " needs an initial-slab batch");
    }
    b.u_i.resize(initial->points.cols());
    for (Eigen::Index i = 0; i < b.u_i.size(); ++i) {
      b.u_i[i] = problem.initial_data(initial->points.col(i), noise);
    }
    b.initial = std::move(initial);
  }
  return b;
}

namespace {

struct InteriorSums {
  WeakResidual residual;
  Eigen::VectorXd phi;
  Eigen::MatrixXd grad_phi;
};

InteriorSums interior_sums(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                           const Eigen::VectorXd& gamma, const BatchEval& test, Eigen::VectorXd* integrand) {
  const int dim = problem.dim();
  const Eigen::Index n = batch.interior.points.cols();
  if (u.values.size() != n || gamma.size() != n || test.values.size() != n || u.input_grads.cols() != n ||
      test.input_grads.cols() != n) {
    throw std::invalid_argument("weak residual: field lengths do not match the interior batch");
  }
  InteriorSums out;
  out.phi = batch.phi0.cwiseProduct(test.values);
  out.grad_phi = test.input_grads.topRows(dim).array().rowwise() * batch.phi0.transpose().array() +
                 batch.phi0_grad.array().rowwise() * test.values.transpose().array();
  const Eigen::ArrayXd flux = (u.input_grads.topRows(dim).array() * out.grad_phi.array()).colwise().sum().transpose();
  Eigen::ArrayXd h = gamma.array() * flux - batch.source.array() * out.phi.array();
  if (problem.time_dependent()) {
    h += u.input_grads.row(dim).transpose().array() * out.phi.array();
  }
  const Eigen::ArrayXd& w = batch.interior.weights.array();
  const double inv_n = 1.0 / static_cast<double>(n);
  WeakResidual& r = out.residual;
  r.integral = (w * h).sum() * inv_n;
  r.norm = (w * out.phi.array().square()).sum() * inv_n;
  if (r.norm < kDegenerateNorm) {
    r.degenerate = true;
    r.e_value = 0.0;
  } else {
    r.e_value = r.integral * r.integral / r.norm;
  }
  if (integrand) {
    *integrand = (w * h).matrix();
  }
  return out;
}

struct BoundarySeeds {
  Eigen::VectorXd u_value;
  Eigen::MatrixXd u_grad;
  Eigen::VectorXd u_initial;
  Eigen::VectorXd gamma;
};

// Boundary estimate and, when `seeds` is given, its derivatives with respect
// to u, grad u and gamma at every point.
double boundary_sums(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                     const Eigen::VectorXd& gamma, const Eigen::VectorXd* u_initial, BoundarySeeds* seeds) {
  const int dim = problem.dim();
  const SampleBatch& bd = batch.boundary;
  const Eigen::Index n = bd.points.cols();
  if (u.values.size() != n || u.input_grads.cols() != n || gamma.size() != n) {
    throw std::invalid_argument("boundary loss: field lengths do not match the boundary batch");
  }
  const Eigen::ArrayXd dn =
      (u.input_grads.topRows(dim).array() * bd.normals.topRows(dim).array()).colwise().sum().transpose();
  const Eigen::ArrayXd& w = bd.weights.array();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::ArrayXd g = gamma.array();

  Eigen::ArrayXd du, ddn, dg;
  double loss = 0.0;
  if (problem.boundary_kind() == BoundaryKind::neumann_flux) {
    const Eigen::ArrayXd r = g * dn - batch.flux.array();
    loss = (w * r.square()).sum() * inv_n;
    du = Eigen::ArrayXd::Zero(n);
    ddn = 2.0 * w * r * g * inv_n;
    dg = 2.0 * w * r * dn * inv_n;
  } else {
    const Eigen::ArrayXd ru = u.values.array() - batch.u_b.array();
    const Eigen::ArrayXd rg = g - batch.gamma_b.array();
    const Eigen::ArrayXd rn = dn - batch.u_n.array();
    loss = (w * (ru.square() + rg.square() + rn.square())).sum() * inv_n;
    du = 2.0 * w * ru * inv_n;
    ddn = 2.0 * w * rn * inv_n;
    dg = 2.0 * w * rg * inv_n;
  }
  if (seeds) {
    seeds->u_value = du.matrix();
    seeds->u_grad = bd.normals.array().rowwise() * ddn.transpose();
    if (problem.time_dependent()) {
      seeds->u_grad.row(dim).setZero();
    }
    seeds->gamma = dg.matrix();
  }

  if (batch.initial) {
    if (!u_initial || u_initial->size() != batch.initial->points.cols()) {
      throw std::invalid_argument("boundary loss: initial-slab values missing or of the wrong length");
    }
    const Eigen::ArrayXd r = u_initial->array() - batch.u_i.array();
    const Eigen::ArrayXd& wi = batch.initial->weights.array();
    const double inv_ni = 1.0 / static_cast<double>(r.size());
    loss += (wi * r.square()).sum() * inv_ni;
    if (seeds) {
      seeds->u_initial = (2.0 * wi * r * inv_ni).matrix();
    }
  }
  return loss;
}

}  // namespace

double boundary_loss_from_fields(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                                 const Eigen::VectorXd& gamma, const Eigen::VectorXd* u_initial) {
  return boundary_sums(problem, batch, u, gamma, u_initial, nullptr);
}

WeakResidual weak_residual_from_fields(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                                       const Eigen::VectorXd& gamma, const BatchEval& test,
                                       Eigen::VectorXd* integrand) {
  return interior_sums(problem, batch, u, gamma, test, integrand).residual;
}

LossAssembler::LossAssembler(const ProblemSpec& problem, const TrainingBatch& batch, LossWeights weights)
    : problem_(problem), batch_(batch), weights_(weights), dim_(problem.dim()) {}

const Mlp::Recording& LossAssembler::recording(Slot slot, const Network& net, const Eigen::MatrixXd& points,
                                               bool with_grad) {
  Cache& c = cache_[slot];
  const bool hit = c.mlp == &net.mlp && (c.with_grad || !with_grad) && c.rec.params.size() == net.params.size() &&
                   (c.rec.params.array() == net.params.array()).all();
  if (!hit) {
    c.mlp = &net.mlp;
    c.with_grad = with_grad;
    c.rec = net.mlp.record_batch(net.params, points, with_grad);
  }
  return c.rec;
}

LossAssembler::Interior LossAssembler::interior(const Network& u, const Network& gamma, const Network& test,
                                                Slot test_slot) {
  const Eigen::MatrixXd& x = batch_.interior.points;
  const BatchEval& fu = fields(u_in, u, x, true);
  const BatchEval& fg = fields(gamma_in, gamma, x, false);
  const BatchEval& ft = fields(test_slot, test, x, true);
  InteriorSums sums = interior_sums(problem_, batch_, fu, fg.values, ft, nullptr);
  return Interior{sums.residual, std::move(sums.phi), std::move(sums.grad_phi)};
}

double LossAssembler::boundary_terms(const Network& u, const Network& gamma, Eigen::VectorXd* u_value_seed,
                                     Eigen::MatrixXd* u_grad_seed, Eigen::VectorXd* u_init_seed,
                                     Eigen::VectorXd* gamma_seed) {
  const BatchEval& fu = fields(u_bd, u, batch_.boundary.points, true);
  const BatchEval& fg = fields(gamma_bd, gamma, batch_.boundary.points, false);
  const Eigen::VectorXd* u_initial = nullptr;
  if (batch_.initial) {
    u_initial = &fields(u_init, u, batch_.initial->points, false).values;
  }
  BoundarySeeds seeds;
  const double loss = boundary_sums(problem_, batch_, fu, fg.values, u_initial, &seeds);
  if (u_value_seed) *u_value_seed = std::move(seeds.u_value);
  if (u_grad_seed) *u_grad_seed = std::move(seeds.u_grad);
  if (u_init_seed) *u_init_seed = std::move(seeds.u_initial);
  if (gamma_seed) *gamma_seed = std::move(seeds.gamma);
  return loss;
}

WeakResidual LossAssembler::weak_residual(const Network& u, const Network& gamma, const Network& test) {
  return interior(u, gamma, test, test_in).residual;
}

double LossAssembler::boundary_loss(const Network& u, const Network& gamma) {
  return boundary_terms(u, gamma, nullptr, nullptr, nullptr, nullptr);
}

LossBundle LossAssembler::loss_and_grads(const NetworkQuad& nets, Role which) {
  const bool second_pair = which == Role::gamma || which == Role::phibar;
  const Network& test = second_pair ? nets.phibar : nets.phi;
  const Interior in = interior(nets.u, nets.gamma, test, second_pair ? test2_in : test_in);
  const WeakResidual& r = in.residual;
  const Eigen::MatrixXd& x = batch_.interior.points;
  const Eigen::Index n = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::ArrayXd& w = batch_.interior.weights.array();
  // dE = c dI - (E / N_phi) dN_phi
  const double c = r.degenerate ? 0.0 : 2.0 * r.integral / r.norm;

  LossBundle out;
  out.role = which;
  out.e_value = r.e_value;
  out.l_int = r.e_value;
  out.degenerate = r.degenerate;

  const Network& net = nets.get(which);
  if (which == Role::u || which == Role::gamma) {
    Eigen::VectorXd bu_value, bu_init, bg;
    Eigen::MatrixXd bu_grad;
    const bool is_u = which == Role::u;
    out.l_bdry = boundary_terms(nets.u, nets.gamma, is_u ? &bu_value : nullptr, is_u ? &bu_grad : nullptr,
                                is_u ? &bu_init : nullptr, is_u ? nullptr : &bg);
    out.total = weights_.beta_prime * out.l_int + weights_.beta * out.l_bdry;

    const double scale = weights_.beta_prime * c * inv_n;
    const BatchEval& fg = fields(gamma_in, nets.gamma, x, false);
    if (is_u) {
      Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(net.mlp.input_dim(), n);
      seed.topRows(dim_) = in.grad_phi.array().rowwise() * (scale * w * fg.values.array()).transpose();
      if (problem_.time_dependent()) {
        seed.row(dim_) = (scale * w * in.phi.array()).transpose().matrix();
      }
      out.grad = net.mlp.vjp(recording(u_in, net, x, true), Eigen::VectorXd::Zero(n), seed);
      out.grad += net.mlp.vjp(recording(u_bd, net, batch_.boundary.points, true), weights_.beta * bu_value,
                              weights_.beta * bu_grad);
      if (batch_.initial) {
        out.grad += net.mlp.vjp(recording(u_init, net, batch_.initial->points, false), weights_.beta * bu_init,
                                Eigen::MatrixXd());
      }
    } else {
      const BatchEval& fu = fields(u_in, nets.u, x, true);
      const Eigen::ArrayXd flux =
          (fu.input_grads.topRows(dim_).array() * in.grad_phi.array()).colwise().sum().transpose();
      out.grad = net.mlp.vjp(recording(gamma_in, net, x, false), (scale * w * flux).matrix(), Eigen::MatrixXd());
      out.grad += net.mlp.vjp(recording(gamma_bd, net, batch_.boundary.points, false), weights_.beta * bg,
                              Eigen::MatrixXd());
    }
    if (weights_.penalty_theta > 0.0) {
      out.grad += 2.0 * weights_.penalty_theta * net.params;
    }
    return out;
  }

  out.l_bdry = boundary_terms(nets.u, nets.gamma, nullptr, nullptr, nullptr, nullptr);
  out.total = weights_.beta_prime * out.l_int + weights_.beta * out.l_bdry;
  out.grad = ParamVector::Zero(net.params.size());
  if (!r.degenerate) {
    const BatchEval& fu = fields(u_in, nets.u, x, true);
    const BatchEval& fg = fields(gamma_in, nets.gamma, x, false);
    const Eigen::ArrayXd& phi0 = batch_.phi0.array();
    const Eigen::ArrayXd gu_dot_gphi0 =
        (fu.input_grads.topRows(dim_).array() * batch_.phi0_grad.array()).colwise().sum().transpose();
    Eigen::ArrayXd di_dp = fg.values.array() * gu_dot_gphi0 - batch_.source.array() * phi0;
    if (problem_.time_dependent()) {
      di_dp += fu.input_grads.row(dim_).transpose().array() * phi0;
    }
    const double ratio = r.e_value / r.norm;
    const Eigen::VectorXd value_seed = (inv_n * w * (c * di_dp - ratio * 2.0 * in.phi.array() * phi0)).matrix();
    Eigen::MatrixXd grad_seed = Eigen::MatrixXd::Zero(net.mlp.input_dim(), n);
    grad_seed.topRows(dim_) =
        fu.input_grads.topRows(dim_).array().rowwise() * (c * inv_n * w * fg.values.array() * phi0).transpose();
    out.grad = -net.mlp.vjp(recording(second_pair ? test2_in : test_in, net, x, true), value_seed, grad_seed);
  }
  if (weights_.penalty_eta > 0.0) {
    out.grad += 2.0 * weights_.penalty_eta * net.params;
  }
  return out;
}

WeakResidual weak_residual(const NetworkQuad& nets, const TrainingBatch& batch, const ProblemSpec& problem) {
  LossAssembler a(problem, batch, LossWeights{});
  return a.weak_residual(nets.u, nets.gamma, nets.phi);
}

double boundary_loss(const NetworkQuad& nets, const TrainingBatch& batch, const ProblemSpec& problem) {
  LossAssembler a(problem, batch, LossWeights{});
  return a.boundary_loss(nets.u, nets.gamma);
}

LossBundle loss_and_grads(const NetworkQuad& nets, Role which, const TrainingBatch& batch, const ProblemSpec& problem,
                          const LossWeights& weights) {
  LossAssembler a(problem, batch, weights);
  return a.loss_and_grads(nets, which);
}

}  // namespace iwan
