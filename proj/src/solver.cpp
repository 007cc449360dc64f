#include "iwan/solver.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

namespace iwan {

namespace {

constexpr char kMagic[8] = {'I', 'W', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr Role kRoles[4] = {Role::u, Role::gamma, Role::phi, Role::phibar};

int index_of(Role role) { return static_cast<int>(role); }

NetworkRole network_role(Role role) {
  switch (role) {
    case Role::u: return NetworkRole::solution;
    case Role::gamma: return NetworkRole::coefficient;
    default: return NetworkRole::test;
  }
}

SolveConfig validated(const ProblemSpec& problem, SolveConfig config) {
  config.validate(problem);
  return config;
}

Network initial_net(const ProblemSpec& problem, const SolveConfig& config, Role role) {
  const NetShape& shape = role == Role::u ? config.u_shape : role == Role::gamma ? config.gamma_shape : config.test_shape;
  Mlp mlp(schedule_spec(network_role(role), problem.input_dim(), shape.depth, shape.width));
  Rng init = make_stream(config.seed, stream::init, static_cast<std::uint64_t>(index_of(role)));
  ParamVector p = project_ball(mlp.init_params(init()), config.ball_bound);
  return Network{std::move(mlp), std::move(p)};
}

NetworkQuad initial_nets(const ProblemSpec& problem, const SolveConfig& config) {
  return NetworkQuad{initial_net(problem, config, Role::u), initial_net(problem, config, Role::gamma),
                     initial_net(problem, config, Role::phi), initial_net(problem, config, Role::phibar)};
}

class BlobWriter {
 public:
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::VectorXd vec() {
    const std::uint64_t n = u64();
    if (n > (bytes_.size() - pos_) / 8) throw CheckpointError("checkpoint truncated inside a vector");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  bool magic() {
    need(sizeof(kMagic));
    const bool ok = std::memcmp(bytes_.data() + pos_, kMagic, sizeof(kMagic)) == 0;
    pos_ += sizeof(kMagic);
    return ok;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(UpdateOrder order) {
  return order == UpdateOrder::interleaved ? "interleaved" : "algorithm1";
}

UpdateOrder parse_update_order(const std::string& name) {
  if (name == "interleaved") return UpdateOrder::interleaved;
  if (name == "algorithm1") return UpdateOrder::algorithm1;
  throw std::invalid_argument("unknown update order '" + name + "' (expected interleaved or algorithm1)");
}

void SolveConfig::validate(const ProblemSpec& problem) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("solve config: " + what); };
  if (iterations < 0) fail("iterations must be >= 0");
  if (inner_steps < 1) fail("inner_steps must be >= 1");
  if (!(tau_theta > 0.0) || !(tau_eta > 0.0)) fail("step sizes must be positive");
  if (!(beta >= 0.0) || !(beta_prime >= 0.0)) fail("beta and beta_prime must be non-negative");
  if (n_interior < 1) fail("n_interior must be >= 1");
  const std::size_t faces = 2 * static_cast<std::size_t>(problem.dim());
  if (n_boundary < faces) fail("n_boundary must be >= " + std::to_string(faces) + " (two per spatial dimension)");
  if (!(ball_bound > 0.0)) fail("ball_bound must be positive");
  if (eval_cadence < 1) fail("eval_cadence must be >= 1");
  if (!(penalty_theta >= 0.0) || !(penalty_eta >= 0.0)) fail("penalties must be non-negative");
  if (grid_per_axis < 2) fail("grid_per_axis must be >= 2");
  for (const NetShape* s : {&u_shape, &gamma_shape, &test_shape}) {
    if (s->depth < 2 || s->width < 1) fail("network depth must be >= 2 and width >= 1");
  }
  density.validate(problem.input_domain());
}

std::uint64_t config_hash(const ProblemSpec& problem, const SolveConfig& c) {
  std::ostringstream s;
  s << problem.id() << '|' << problem.dim() << '|' << format_double(problem.noise_sigma()) << '|' << c.inner_steps
    << '|' << format_double(c.tau_theta) << '|' << format_double(c.tau_eta) << '|' << format_double(c.beta) << '|'
    << format_double(c.beta_prime) << '|' << c.n_interior << '|' << c.n_boundary << '|' << c.initial_points() << '|';
  for (OptimizerKind k : c.optimizers) s << to_string(k) << '|';
  s << format_double(c.ball_bound) << '|' << c.seed << '|' << c.eval_cadence << '|' << to_string(c.order) << '|';
  for (const NetShape& n : {c.u_shape, c.gamma_shape, c.test_shape}) s << n.depth << 'x' << n.width << '|';
  s << static_cast<int>(c.density.kind) << '|' << format_double(c.density.mean[0]) << ','
    << format_double(c.density.mean[1]) << ',' << format_double(c.density.inverse_covariance_diag[0]) << ','
    << format_double(c.density.inverse_covariance_diag[1]) << '|' << format_double(c.penalty_theta) << '|'
    << format_double(c.penalty_eta) << '|' << c.grid_per_axis;
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void write_history_csv(std::ostream& out, const SolveHistory& history) {
  out << "iteration,e_value,l_bdry,total,rel_error_gamma,grad_mapping_norm\n";
  for (const HistoryRecord& r : history.records) {
    out << r.iteration << ',' << format_double(r.e_value) << ',' << format_double(r.l_bdry) << ','
        << format_double(r.total) << ',' << format_double(r.rel_error) << ',' << format_double(r.grad_mapping)
        << '\n';
  }
}

void write_timing_csv(std::ostream& out, const SolveHistory& history) {
  out << "iteration,elapsed_seconds\n";
  for (const HistoryRecord& r : history.records) out << r.iteration << ',' << format_double(r.elapsed) << '\n';
}

IwanSolver::IwanSolver(const ProblemSpec& problem, SolveConfig config)
    : problem_(problem),
      config_(validated(problem, std::move(config))),
      grid_(problem.input_domain(), config_.seed, config_.grid_per_axis),
      grid_truth_(problem.gamma_batch(grid_.points())),
      nets_(initial_nets(problem, config_)),
      start_(std::chrono::steady_clock::now()) {
  for (Role role : kRoles) {
    const int i = index_of(role);
    const double tau = role == Role::u || role == Role::gamma ? config_.tau_theta : config_.tau_eta;
    opt_[i] = OptimizerState::make(config_.optimizers[i], tau, config_.ball_bound, nets_.get(role).params.size());
  }
  record_initial();
}

TrainingBatch IwanSolver::make_batch(int j) const {
  const auto idx = static_cast<std::uint64_t>(j);
  const BoxDomain& box = problem_.input_domain();
  Rng ri = make_stream(config_.seed, stream::interior, idx);
  Rng rb = make_stream(config_.seed, stream::boundary, idx);
  Rng rn = make_stream(config_.seed, stream::noise, idx);
  SampleBatch interior = sample_interior(box, config_.n_interior, config_.density, ri);
  SampleBatch boundary = sample_boundary(box, config_.n_boundary, rb, problem_.dim());
  std::optional<SampleBatch> initial;
  if (problem_.boundary_kind() == BoundaryKind::thermal_mixed) {
    Rng rs = make_stream(config_.seed, stream::initial_slab, idx);
    initial = sample_face(box, problem_.dim(), box.lower()[problem_.dim()], config_.initial_points(), rs);
  }
  return make_training_batch(problem_, std::move(interior), std::move(boundary), std::move(initial), rn);
}

double IwanSolver::update_theta(LossAssembler& a, Role role, LossBundle* bundle_out) {
  Network& net = nets_.get(role);
  OptimizerState& s = opt_[index_of(role)];
  LossBundle b = a.loss_and_grads(nets_, role);
  const double g = gradient_mapping(net.params, b.grad, s.step_size, s.ball_bound).squaredNorm();
  try {
    net.params = step(s, net.params, b.grad);
  } catch (const OptimizerAbort& e) {
    throw OptimizerAbort(std::string(to_string(role)) + " update at iteration " + std::to_string(iteration_ + 1) +
                         ": " + e.what());
  }
  if (bundle_out) *bundle_out = std::move(b);
  return g;
}

void IwanSolver::update_eta(LossAssembler& a, Role role) {
  Network& net = nets_.get(role);
  OptimizerState& s = opt_[index_of(role)];
  for (int k = 0; k < config_.inner_steps; ++k) {
    const LossBundle b = a.loss_and_grads(nets_, role);
    try {
      net.params = step(s, net.params, b.grad);
    } catch (const OptimizerAbort& e) {
      throw OptimizerAbort(std::string(to_string(role)) + " update at iteration " + std::to_string(iteration_ + 1) +
                           ": " + e.what());
    }
  }
}

void IwanSolver::iterate() {
  const int j = iteration_ + 1;
  const TrainingBatch batch = make_batch(j);
  LossAssembler a(problem_, batch, LossWeights{config_.beta, config_.beta_prime, config_.penalty_theta,
                                               config_.penalty_eta});
  LossBundle u_bundle;
  double g = 0.0;
  if (config_.order == UpdateOrder::interleaved) {
    g += update_theta(a, Role::u, &u_bundle);
    update_eta(a, Role::phi);
    g += update_theta(a, Role::gamma, nullptr);
    update_eta(a, Role::phibar);
  } else {
    update_eta(a, Role::phi);
    update_eta(a, Role::phibar);
    g += update_theta(a, Role::u, &u_bundle);
    g += update_theta(a, Role::gamma, nullptr);
  }
  history_.grad_mapping_sq.push_back(g);
  iteration_ = j;
  if (j % config_.eval_cadence == 0 || j == config_.iterations) record(j, u_bundle, g);
}

void IwanSolver::advance(int count) {
  for (int k = 0; k < count && !finished(); ++k) iterate();
}

void IwanSolver::record_initial() {
  const TrainingBatch batch = make_batch(0);
  LossAssembler a(problem_, batch, LossWeights{config_.beta, config_.beta_prime, config_.penalty_theta,
                                               config_.penalty_eta});
  const LossBundle u = a.loss_and_grads(nets_, Role::u);
  const LossBundle gamma = a.loss_and_grads(nets_, Role::gamma);
  const OptimizerState& su = opt_[index_of(Role::u)];
  const OptimizerState& sg = opt_[index_of(Role::gamma)];
  const double g = gradient_mapping(nets_.u.params, u.grad, su.step_size, su.ball_bound).squaredNorm() +
                   gradient_mapping(nets_.gamma.params, gamma.grad, sg.step_size, sg.ball_bound).squaredNorm();
  record(0, u, g);
}

void IwanSolver::record(int j, const LossBundle& u_bundle, double grad_mapping_sq) {
  HistoryRecord r;
  r.iteration = j;
  r.e_value = u_bundle.e_value;
  r.l_bdry = u_bundle.l_bdry;
  r.total = u_bundle.total;
  r.rel_error = gamma_error();
  r.grad_mapping = std::sqrt(grad_mapping_sq);
  r.elapsed = elapsed_offset_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  history_.records.push_back(r);
}

double IwanSolver::gamma_error() const {
  const Eigen::VectorXd g = nets_.gamma.mlp.forward_batch(nets_.gamma.params, grid_.points(), false).values;
  return relative_l2(g, grid_truth_);
}

FieldEvaluator IwanSolver::gamma_field() const {
  return [net = nets_.gamma](const Eigen::MatrixXd& pts) { return net.mlp.forward_batch(net.params, pts, false).values; };
}

std::vector<std::uint8_t> IwanSolver::checkpoint() const {
  BlobWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(config_hash(problem_, config_));
  w.i64(iteration_);
  w.f64(elapsed_offset_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  for (Role role : kRoles) {
    const OptimizerState& s = opt_[index_of(role)];
    w.vec(nets_.get(role).params);
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.i64(s.steps);
    w.vec(s.first);
    w.vec(s.second);
  }
  w.u64(history_.records.size());
  for (const HistoryRecord& r : history_.records) {
    w.i64(r.iteration);
    for (double v : {r.e_value, r.l_bdry, r.total, r.rel_error, r.grad_mapping, r.elapsed}) w.f64(v);
  }
  w.vec(Eigen::Map<const Eigen::VectorXd>(history_.grad_mapping_sq.data(),
                                          static_cast<Eigen::Index>(history_.grad_mapping_sq.size())));
  return w.take();
}

void IwanSolver::restore(std::span<const std::uint8_t> blob) {
  BlobReader r(blob);
  if (!r.magic()) throw CheckpointError("not an iwan checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  if (r.u64() != config_hash(problem_, config_)) {
    throw CheckpointError("checkpoint was written under a different problem or configuration");
  }
  const std::int64_t iteration = r.i64();
  const double elapsed = r.f64();
  std::array<ParamVector, 4> params;
  std::array<OptimizerState, 4> opt = opt_;
  for (Role role : kRoles) {
    const int i = index_of(role);
    params[i] = r.vec();
    if (params[i].size() != nets_.get(role).params.size()) {
      throw CheckpointError(std::string("checkpoint parameter count mismatch for ") + to_string(role));
    }
    if (r.u32() != static_cast<std::uint32_t>(opt[i].kind)) {
      throw CheckpointError(std::string("checkpoint optimizer kind mismatch for ") + to_string(role));
    }
    opt[i].steps = r.i64();
    opt[i].first = r.vec();
    opt[i].second = r.vec();
  }
  SolveHistory history;
  const std::uint64_t records = r.u64();
  for (std::uint64_t k = 0; k < records; ++k) {
    HistoryRecord h;
    h.iteration = static_cast<int>(r.i64());
    h.e_value = r.f64();
    h.l_bdry = r.f64();
    h.total = r.f64();
    h.rel_error = r.f64();
    h.grad_mapping = r.f64();
    h.elapsed = r.f64();
    history.records.push_back(h);
  }
  const Eigen::VectorXd sq = r.vec();
  history.grad_mapping_sq.assign(sq.data(), sq.data() + sq.size());
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  if (iteration < 0 || static_cast<std::size_t>(iteration) != history.grad_mapping_sq.size()) {
    throw CheckpointError("checkpoint iteration count is inconsistent");
  }

  for (Role role : kRoles) nets_.get(role).params = std::move(params[index_of(role)]);
  opt_ = std::move(opt);
  history_ = std::move(history);
  iteration_ = static_cast<int>(iteration);
  elapsed_offset_ = elapsed;
  start_ = std::chrono::steady_clock::now();
}

SolveResult iwan_solve(const ProblemSpec& problem, const SolveConfig& config) {
  IwanSolver solver(problem, config);
  solver.run();
  SolveResult out{solver.nets(), solver.history(), solver.history().records.back().rel_error};
  return out;
}

double g_norm(const ProblemSpec& problem, SolveConfig config, int runs, std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("g_norm: runs must be >= 1");
  std::vector<std::vector<double>> traces;
  for (int r = 0; r < runs; ++r) {
    config.seed = seed + static_cast<std::uint64_t>(r);
    IwanSolver solver(problem, config);
    solver.run();
    traces.push_back(solver.history().grad_mapping_sq);
  }
  return g_norm_from_traces(traces);
}

}  // namespace iwan
