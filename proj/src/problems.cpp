#include "iwan/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace iwan {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSmoothing = 0.02;

// Anisotropic squared distance sum_i s_i (x_i - c_i)^2 over the leading
// coordinates that carry a weight; the rest of x is ignored.
struct Quadratic {
  std::vector<double> weights;
  std::vector<double> center;

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double q = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double d = x[static_cast<Eigen::Index>(i)] - center[i];
      q += weights[i] * d * d;
    }
    return q;
  }
  void add_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, double scale, Eigen::VectorXd& g) const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      g[k] += scale * 2.0 * weights[i] * (x[k] - center[i]);
    }
  }
};

// Weights for a problem of dimension d: the listed leading entries, then
// `tail` for every remaining axis.
std::vector<double> diag(int d, std::vector<double> head, double tail) {
  head.resize(static_cast<std::size_t>(d), tail);
  return head;
}

std::vector<double> point(int d, std::vector<double> head) {
  head.resize(static_cast<std::size_t>(d), 0.0);
  return head;
}

// 1 / (1 + exp(z)) without overflow.
double logistic_tail(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

// a / (1 + exp(z1) + exp(z2)) and the factors exp(zk) / (1 + ...)^2 used in
// its gradient, evaluated in shifted form so that large exponents are safe.
struct SoftBox {
  double value;
  double w1;
  double w2;
};

SoftBox soft_box(double a, double z1, double z2) {
  const double m = std::max({0.0, z1, z2});
  const double e0 = std::exp(-m);
  const double e1 = std::exp(z1 - m);
  const double e2 = std::exp(z2 - m);
  const double sum = e0 + e1 + e2;
  const double inv = e0 / sum;  // 1 / (1 + exp z1 + exp z2)
  return {a * inv, a * (e1 / sum) * inv, a * (e2 / sum) * inv};
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// u = |x|^2.
void set_square_norm(const Eigen::Ref<const Eigen::VectorXd>& x, TruthPoint& p) {
  p.u = x.squaredNorm();
  p.grad_u = 2.0 * x;
  p.lap_u = 2.0 * static_cast<double>(x.size());
}

// u = cos(|x|^2).
void set_cos_square_norm(const Eigen::Ref<const Eigen::VectorXd>& x, TruthPoint& p) {
  const double r2 = x.squaredNorm();
  const double s = std::sin(r2);
  const double c = std::cos(r2);
  p.u = c;
  p.grad_u = -2.0 * s * x;
  p.lap_u = -2.0 * static_cast<double>(x.size()) * s - 4.0 * r2 * c;
}

class Analytic1d final : public GroundTruth {
 public:
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p;
    set_square_norm(x, p);
    p.gamma = 1.0;
    p.grad_gamma = Eigen::VectorXd::Zero(x.size());
    return p;
  }
};

// gamma = 2 (exp(-|x - c1|^2_S1) + exp(-|x - c2|^2_S2)), u = cos(|x|^2).
class SmoothTwoBump final : public GroundTruth {
 public:
  SmoothTwoBump()
      : bumps_{Quadratic{diag(2, {1.25, 5.0}, 0.0), point(2, {-0.5, 0.5})},
               Quadratic{diag(2, {5.0, 1.8}, 0.0), point(2, {0.5, -0.5})}} {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p;
    set_cos_square_norm(x, p);
    p.grad_gamma = Eigen::VectorXd::Zero(x.size());
    for (const auto& q : bumps_) {
      const double e = 2.0 * std::exp(-q.value(x));
      p.gamma += e;
      q.add_gradient(x, -e, p.grad_gamma);
    }
    return p;
  }

 private:
  std::vector<Quadratic> bumps_;
};

// gamma = base + sum_j a_j / (1 + exp((|x - c_j|^2_Sj - r_j^2) / 0.02)), u = |x|^2.
class SmoothedEllipses final : public GroundTruth {
 public:
  struct Ellipse {
    Quadratic q;
    double radius;
    double height;
  };
  SmoothedEllipses(double base, std::vector<Ellipse> ellipses) : base_(base), ellipses_(std::move(ellipses)) {}

  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p;
    set_square_norm(x, p);
    p.gamma = base_;
    p.grad_gamma = Eigen::VectorXd::Zero(x.size());
    for (const auto& e : ellipses_) {
      const double w = logistic_tail((e.q.value(x) - e.radius * e.radius) / kSmoothing);
      p.gamma += e.height * w;
      // d/dq of a / (1 + delta) is -a w (1 - w) / 0.02.
      e.q.add_gradient(x, -e.height * w * (1.0 - w) / kSmoothing, p.grad_gamma);
    }
    return p;
  }

 private:
  double base_;
  std::vector<Ellipse> ellipses_;
};

// Soft rectangle term a / (1 + exp((|x_i - c_i| - r_i)/0.02) + exp((|x_j - c_j| - r_j)/0.02)).
struct SoftRect {
  int axis1;
  double c1;
  double r1;
  int axis2;
  double c2;
  double r2;
  double height;

  void accumulate(const Eigen::Ref<const Eigen::VectorXd>& x, TruthPoint& p) const {
    const double d1 = x[axis1] - c1;
    const double d2 = x[axis2] - c2;
    const SoftBox b = soft_box(height, (std::abs(d1) - r1) / kSmoothing, (std::abs(d2) - r2) / kSmoothing);
    p.gamma += b.value;
    p.grad_gamma[axis1] -= b.w1 * sign(d1) / kSmoothing;
    p.grad_gamma[axis2] -= b.w2 * sign(d2) / kSmoothing;
  }
};

// Test 4(2): one smoothed ellipse plus a soft rectangle that is unbounded along x2 < 0.6.
class EllipseAndBar final : public GroundTruth {
 public:
  EllipseAndBar()
      : ellipse_(0.5, {{Quadratic{diag(2, {1.0, 4.0}, 0.0), point(2, {0.55, 0.0})}, 0.4, 1.5}}),
        bar_{0, -0.5, 0.15, 1, 0.0, 0.6, 1.5} {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p = ellipse_.eval(x);
    bar_.accumulate(x, p);
    return p;
  }

 private:
  SmoothedEllipses ellipse_;
  SoftRect bar_;
};

// Test 4(3): three soft rectangles forming a non-convex shape.
class ThreeRects final : public GroundTruth {
 public:
  ThreeRects()
      : rects_{{0, -0.5, 0.15, 1, 0.0, 0.8, 1.5},
               {0, -0.1, 0.55, 1, 0.6, 0.2, 1.5},
               {0, -0.1, 0.55, 1, -0.6, 0.2, 1.5}} {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p;
    set_square_norm(x, p);
    p.gamma = 0.5;
    p.grad_gamma = Eigen::VectorXd::Zero(x.size());
    for (const auto& r : rects_) {
      r.accumulate(x, p);
    }
    return p;
  }

 private:
  std::vector<SoftRect> rects_;
};

// Test 5 on (0,1)^d: gamma = exp(a (x1 - x1^2)) / pi, u = exp(-a (x1 - x1^2)) prod_{i>1} sin(pi x_i),
// a = (d - 1) pi^2 / 2, so that div(gamma grad u) = 0.
class EitProduct final : public GroundTruth {
 public:
  explicit EitProduct(int d) : a_((d - 1) * kPi * kPi / 2.0) {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    const Eigen::Index d = x.size();
    const double g = x[0] - x[0] * x[0];
    const double gp = 1.0 - 2.0 * x[0];
    TruthPoint p;
    p.gamma = std::exp(a_ * g) / kPi;
    p.grad_gamma = Eigen::VectorXd::Zero(d);
    p.grad_gamma[0] = a_ * gp * p.gamma;

    const double e = std::exp(-a_ * g);
    Eigen::VectorXd s(d), c(d);
    for (Eigen::Index i = 1; i < d; ++i) {
      s[i] = std::sin(kPi * x[i]);
      c[i] = std::cos(kPi * x[i]);
    }
    double prod = 1.0;
    for (Eigen::Index i = 1; i < d; ++i) prod *= s[i];
    p.u = e * prod;
    p.grad_u = Eigen::VectorXd::Zero(d);
    p.grad_u[0] = -a_ * gp * p.u;
    for (Eigen::Index i = 1; i < d; ++i) {
      double others = 1.0;
      for (Eigen::Index k = 1; k < d; ++k) {
        if (k != i) others *= s[k];
      }
      p.grad_u[i] = e * kPi * c[i] * others;
    }
    // d2/dx1^2 of exp(-a g) is (a^2 g'^2 + 2a) exp(-a g); each sine contributes -pi^2.
    p.lap_u = (a_ * a_ * gp * gp + 2.0 * a_) * p.u - static_cast<double>(d - 1) * kPi * kPi * p.u;
    return p;
  }

 private:
  double a_;
};

// Test 6 on (0,1)^d x [0,1]: u = s(t) sum_i sin(pi x_i), s(t) = exp(-3t/2)/5,
// gamma = k1 + k2 u.
class Thermal final : public GroundTruth {
 public:
  static constexpr double k1 = 1.5;
  static constexpr double k2 = 0.6;

  explicit Thermal(int d) : d_(d) {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& z) const override {
    const double t = z[d_];
    const double s = std::exp(-1.5 * t) / 5.0;
    TruthPoint p;
    p.grad_u.resize(d_);
    double sum = 0.0;
    for (int i = 0; i < d_; ++i) {
      sum += std::sin(kPi * z[i]);
      p.grad_u[i] = kPi * s * std::cos(kPi * z[i]);
    }
    p.u = s * sum;
    p.lap_u = -kPi * kPi * p.u;
    p.u_t = -1.5 * p.u;
    p.gamma = k1 + k2 * p.u;
    p.grad_gamma = k2 * p.grad_u;
    return p;
  }

 private:
  int d_;
};

// Test 8: gamma = 2 exp(-|x - c|^2_S / 2), u = cos(|x|^2).
class NarrowGaussian final : public GroundTruth {
 public:
  NarrowGaussian() : q_{diag(2, {4.0, 100.0}, 0.0), point(2, {-0.2, 0.2})} {}
  TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    TruthPoint p;
    set_cos_square_norm(x, p);
    p.gamma = 2.0 * std::exp(-0.5 * q_.value(x));
    p.grad_gamma = Eigen::VectorXd::Zero(x.size());
    q_.add_gradient(x, -0.5 * p.gamma, p.grad_gamma);
    return p;
  }

 private:
  Quadratic q_;
};

std::shared_ptr<const GroundTruth> ellipses_test2(int d) {
  return std::make_shared<SmoothedEllipses>(
      0.5, std::vector<SmoothedEllipses::Ellipse>{
               {Quadratic{diag(d, {0.81, 2.0}, 0.09), point(d, {0.1, 0.3})}, 0.6, 1.5}});
}

std::shared_ptr<const GroundTruth> ellipses_test4_1(int d) {
  return std::make_shared<SmoothedEllipses>(
      0.5, std::vector<SmoothedEllipses::Ellipse>{
               {Quadratic{diag(d, {0.81, 2.0}, 0.09), point(d, {-0.5, -0.5})}, 0.4, 3.5},
               {Quadratic{diag(d, {2.0, 0.81}, 0.09), point(d, {0.5, 0.5})}, 0.4, 1.5}});
}

}  // namespace

double apply_noise(double value, double sigma, Rng& rng) {
  if (sigma < 0.0) {
    throw std::invalid_argument("apply_noise: sigma must be >= 0");
  }
  if (sigma == 0.0) {
    return value;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double e = std::clamp(normal(rng), -kNoiseTruncation, kNoiseTruncation);
  return value * (1.0 + sigma * e);
}

const std::vector<ProblemInfo>& problem_catalog() {
  static const std::vector<ProblemInfo> catalog = {
      {"analytic1d", "u = x^2, gamma = 1, f = -2 on (-1,1)", 1, 1, 1},
      {"test1", "smooth two-bump gamma, u = cos|x|^2 on (-1,1)^d", 2, -1, 5},
      {"test2", "smoothed piecewise-constant ellipse gamma, u = |x|^2 on (-1,1)^d", 2, -1, 5},
      {"test3", "test2 with noisy boundary measurements", 2, -1, 5},
      {"test4_1", "two smoothed ellipses, u = |x|^2 on (-1,1)^d", 2, -1, 5},
      {"test4_2", "ellipse plus soft bar with corners, u = |x|^2 on (-1,1)^d", 2, -1, 5},
      {"test4_3", "three soft rectangles (non-convex), u = |x|^2 on (-1,1)^d", 2, -1, 5},
      {"test5", "EIT problem with flux boundary data, f = 0 on (0,1)^d", 2, -1, 5},
      {"test6", "inverse thermal conductivity on (0,1)^d x [0,1]", 1, -1, 5},
      {"test8", "narrow Gaussian gamma, u = cos|x|^2 on (-1,1)^d", 2, -1, 5},
  };
  return catalog;
}

ProblemSpec::ProblemSpec(std::string id, int dim, double noise_sigma, PdeKind pde, BoundaryKind boundary,
                         BoxDomain spatial, double final_time, std::shared_ptr<const GroundTruth> truth)
    : id_(std::move(id)),
      dim_(dim),
      noise_sigma_(noise_sigma),
      pde_(pde),
      boundary_(boundary),
      spatial_(spatial),
      input_(spatial),
      final_time_(final_time),
      truth_(std::move(truth)) {
  if (!(noise_sigma_ >= 0.0 && noise_sigma_ <= 1.0)) {
    throw std::invalid_argument("noise sigma must lie in [0, 1]");
  }
  if (pde_ == PdeKind::parabolic) {
    Eigen::VectorXd lo(dim_ + 1), hi(dim_ + 1);
    lo << spatial_.lower(), 0.0;
    hi << spatial_.upper(), final_time_;
    input_ = BoxDomain(lo, hi);
  }
}

TruthPoint ProblemSpec::eval_truth(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (!input_.contains(z, 1e-12)) {
    throw std::out_of_range("eval_truth: point outside the domain of " + id_);
  }
  return truth_->eval(z);
}

double ProblemSpec::source(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  const TruthPoint p = eval_truth(z);
  return p.u_t - p.grad_gamma.dot(p.grad_u) - p.gamma * p.lap_u;
}

Eigen::VectorXd ProblemSpec::source_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::VectorXd f(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    f[i] = source(points.col(i));
  }
  return f;
}

Eigen::VectorXd ProblemSpec::gamma_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::VectorXd g(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    g[i] = eval_truth(points.col(i)).gamma;
  }
  return g;
}

BoundaryValues ProblemSpec::boundary_data(const Eigen::Ref<const Eigen::VectorXd>& z,
                                          const Eigen::Ref<const Eigen::VectorXd>& normal, Rng& rng) const {
  if (z.size() != input_dim() || normal.size() != input_dim()) {
    throw std::invalid_argument("boundary_data: dimension mismatch");
  }
  if (!input_.contains(z, 1e-12) || spatial_.distance_to_boundary(z.head(dim_)) > 1e-12) {
    throw std::invalid_argument("boundary_data: point is not on the boundary of " + id_);
  }
  const TruthPoint p = truth_->eval(z);
  const double u_n = p.grad_u.dot(normal.head(dim_));
  BoundaryValues b;
  b.u = apply_noise(p.u, noise_sigma_, rng);
  b.gamma = apply_noise(p.gamma, noise_sigma_, rng);
  b.u_n = apply_noise(u_n, noise_sigma_, rng);
  b.flux = apply_noise(p.gamma * u_n, noise_sigma_, rng);
  return b;
}

double ProblemSpec::initial_data(const Eigen::Ref<const Eigen::VectorXd>& z, Rng& rng) const {
  if (pde_ != PdeKind::parabolic) {
    throw std::logic_error("initial_data: " + id_ + " is not time dependent");
  }
  if (z.size() != input_dim() || std::abs(z[dim_]) > 1e-12) {
    throw std::invalid_argument("initial_data: point is not on the t = 0 slab");
  }
  return apply_noise(truth_->eval(z).u, noise_sigma_, rng);
}

double ProblemSpec::consistency_residual(const Eigen::Ref<const Eigen::VectorXd>& z, double h) const {
  const TruthPoint p = eval_truth(z);
  const double f = p.u_t - p.grad_gamma.dot(p.grad_u) - p.gamma * p.lap_u;
  Eigen::VectorXd zp = z;
  Eigen::VectorXd zm = z;
  double div = 0.0;
  for (int i = 0; i < dim_; ++i) {
    zp[i] += h;
    zm[i] -= h;
    const TruthPoint a = truth_->eval(zp);
    const TruthPoint b = truth_->eval(zm);
    div += (a.gamma * a.grad_u[i] - b.gamma * b.grad_u[i]) / (2.0 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  double u_t = 0.0;
  if (pde_ == PdeKind::parabolic) {
    zp[dim_] += h;
    zm[dim_] -= h;
    u_t = (truth_->eval(zp).u - truth_->eval(zm).u) / (2.0 * h);
  }
  return std::abs(u_t - div - f);
}

double ProblemSpec::max_consistency_error(int count, std::uint64_t seed, double h) const {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd lo = input_.lower();
  const Eigen::VectorXd span = input_.upper() - input_.lower();
  double worst = 0.0;
  Eigen::VectorXd z(input_dim());
  for (int n = 0; n < count;) {
    for (int i = 0; i < input_dim(); ++i) {
      z[i] = lo[i] + unit(rng) * span[i];
    }
    if (((z - lo).array() <= 2 * h).any() || ((input_.upper() - z).array() <= 2 * h).any()) {
      continue;
    }
    worst = std::max(worst, consistency_residual(z, h) / (1.0 + std::abs(source(z))));
    ++n;
  }
  return worst;
}

ProblemSpec make_problem(const std::string& id, int dim, double noise_sigma) {
  const auto& catalog = problem_catalog();
  const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const ProblemInfo& p) { return p.id == id; });
  if (it == catalog.end()) {
    throw std::invalid_argument("unknown problem id '" + id + "'");
  }
  if (dim < it->min_dim || (it->max_dim > 0 && dim > it->max_dim)) {
    throw std::invalid_argument("problem " + id + " does not support dimension " + std::to_string(dim));
  }
  const BoxDomain centered = BoxDomain::cube(dim, -1.0, 1.0);
  const BoxDomain unit = BoxDomain::cube(dim, 0.0, 1.0);
  const auto elliptic = [&](BoundaryKind kind, const BoxDomain& box, std::shared_ptr<const GroundTruth> truth) {
    return ProblemSpec(id, dim, noise_sigma, PdeKind::elliptic, kind, box, 0.0, std::move(truth));
  };

  std::optional<ProblemSpec> spec;
  if (id == "analytic1d") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, std::make_shared<Analytic1d>());
  } else if (id == "test1") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, std::make_shared<SmoothTwoBump>());
  } else if (id == "test2" || id == "test3") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, ellipses_test2(dim));
  } else if (id == "test4_1") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, ellipses_test4_1(dim));
  } else if (id == "test4_2") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, std::make_shared<EllipseAndBar>());
  } else if (id == "test4_3") {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, std::make_shared<ThreeRects>());
  } else if (id == "test5") {
    spec = elliptic(BoundaryKind::neumann_flux, unit, std::make_shared<EitProduct>(dim));
  } else if (id == "test6") {
    spec = ProblemSpec(id, dim, noise_sigma, PdeKind::parabolic, BoundaryKind::thermal_mixed, unit, 1.0,
                       std::make_shared<Thermal>(dim));
  } else {
    spec = elliptic(BoundaryKind::dirichlet_full, centered, std::make_shared<NarrowGaussian>());
  }

  const double err = spec->max_consistency_error(100, 20240601);
  if (!(err < kConsistencyTolerance)) {
    throw std::logic_error("problem " + id + " fails its consistency check (relative residual " +
                           std::to_string(err) + ")");
  }
  return *std::move(spec);
}

std::string to_string(PdeKind kind) { return kind == PdeKind::elliptic ? "elliptic" : "parabolic"; }

std::string to_string(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::dirichlet_full: return "dirichlet_full";
    case BoundaryKind::neumann_flux: return "neumann_flux";
    case BoundaryKind::thermal_mixed: return "thermal_mixed";
  }
  return "unknown";
}

}  // namespace iwan
