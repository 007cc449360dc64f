#include "iwan/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace iwan {

namespace {

void check_same(const GridField& a, const GridField& b, const char* what) {
  if (a.n != b.n || a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() || a.h != b.h) {
    throw std::invalid_argument(std::string(what) + ": grid fields differ in shape");
  }
}

Eigen::MatrixXd interior_mask(int n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m.block(1, 1, n - 2, n - 2).setOnes();
  return m;
}

}  // namespace

GridField GridField::on(const BoxDomain& box, int n) {
  if (box.dim() != 2) throw std::invalid_argument("GridField: needs a two-dimensional box");
  if (n < 3) throw std::invalid_argument("GridField: n must be >= 3");
  const double wx = box.upper()[0] - box.lower()[0];
  const double wy = box.upper()[1] - box.lower()[1];
  if (std::abs(wx - wy) > 1e-12 * std::max(wx, wy)) throw std::invalid_argument("GridField: box must be square");
  GridField g;
  g.n = n;
  g.h = wx / (n - 1);
  g.x0 = box.lower()[0];
  g.y0 = box.lower()[1];
  g.values = Eigen::MatrixXd::Zero(n, n);
  return g;
}

GridField GridField::sample(const BoxDomain& box, int n, const std::function<double(double, double)>& field) {
  GridField g = on(box, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g.values(i, j) = field(g.x(i), g.y(j));
  }
  return g;
}

double GridField::interpolate(double px, double py) const {
  const double s = std::clamp((px - x0) / h, 0.0, static_cast<double>(n - 1));
  const double t = std::clamp((py - y0) / h, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(s), n - 2);
  const int j = std::min(static_cast<int>(t), n - 2);
  const double a = s - i;
  const double b = t - j;
  return (1 - a) * (1 - b) * values(i, j) + a * (1 - b) * values(i + 1, j) + (1 - a) * b * values(i, j + 1) +
         a * b * values(i + 1, j + 1);
}

GridField fd_residual(const GridField& u, const GridField& gamma, const GridField& f) {
  check_same(u, gamma, "fd_residual");
  check_same(u, f, "fd_residual");
  const int n = u.n;
  const double inv_h2 = 1.0 / (u.h * u.h);
  const Eigen::MatrixXd& U = u.values;
  const Eigen::MatrixXd& G = gamma.values;
  GridField r = u;
  r.values.setZero();
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double ge = 0.5 * (G(i, j) + G(i + 1, j));
      const double gw = 0.5 * (G(i, j) + G(i - 1, j));
      const double gn = 0.5 * (G(i, j) + G(i, j + 1));
      const double gs = 0.5 * (G(i, j) + G(i, j - 1));
      const double div = ge * (U(i + 1, j) - U(i, j)) - gw * (U(i, j) - U(i - 1, j)) + gn * (U(i, j + 1) - U(i, j)) -
                         gs * (U(i, j) - U(i, j - 1));
      r.values(i, j) = -div * inv_h2 - f.values(i, j);
    }
  }
  return r;
}

double tv(const GridField& gamma) {
  const int n = gamma.n;
  const Eigen::MatrixXd& G = gamma.values;
  double total = 0.0;
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double dx = (G(i + 1, j) - G(i, j)) / gamma.h;
      const double dy = (G(i, j + 1) - G(i, j)) / gamma.h;
      total += std::sqrt(dx * dx + dy * dy + kTvSmoothing * kTvSmoothing);
    }
  }
  return total;
}

FdmObjective fdm_objective(const GridField& u, const GridField& gamma, const GridField& f, double lambda) {
  const GridField r = fd_residual(u, gamma, f);
  const int n = u.n;
  const double m = static_cast<double>((n - 2) * (n - 2));
  const double inv_h2 = 1.0 / (u.h * u.h);
  const Eigen::MatrixXd& U = u.values;
  const Eigen::MatrixXd& G = gamma.values;
  FdmObjective out;
  out.grad_u = Eigen::MatrixXd::Zero(n, n);
  out.grad_gamma = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double res = r.values(i, j);
      out.mse += res * res;
      const double c = 2.0 * res / m * inv_h2;  // d(mse)/d(r) times the -1/h^2 of the stencil, sign folded below
      const double ge = 0.5 * (G(i, j) + G(i + 1, j));
      const double gw = 0.5 * (G(i, j) + G(i - 1, j));
      const double gn = 0.5 * (G(i, j) + G(i, j + 1));
      const double gs = 0.5 * (G(i, j) + G(i, j - 1));
      out.grad_u(i, j) += c * (ge + gw + gn + gs);
      out.grad_u(i + 1, j) -= c * ge;
      out.grad_u(i - 1, j) -= c * gw;
      out.grad_u(i, j + 1) -= c * gn;
      out.grad_u(i, j - 1) -= c * gs;
      const double de = U(i + 1, j) - U(i, j);
      const double dw = U(i, j) - U(i - 1, j);
      const double dn = U(i, j + 1) - U(i, j);
      const double ds = U(i, j) - U(i, j - 1);
      out.grad_gamma(i, j) -= 0.5 * c * (de - dw + dn - ds);
      out.grad_gamma(i + 1, j) -= 0.5 * c * de;
      out.grad_gamma(i - 1, j) += 0.5 * c * dw;
      out.grad_gamma(i, j + 1) -= 0.5 * c * dn;
      out.grad_gamma(i, j - 1) += 0.5 * c * ds;
    }
  }
  out.mse /= m;
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double dx = (G(i + 1, j) - G(i, j)) / gamma.h;
      const double dy = (G(i, j + 1) - G(i, j)) / gamma.h;
      const double t = std::sqrt(dx * dx + dy * dy + kTvSmoothing * kTvSmoothing);
      out.tv += t;
      const double s = lambda / (t * gamma.h);
      out.grad_gamma(i + 1, j) += s * dx;
      out.grad_gamma(i, j + 1) += s * dy;
      out.grad_gamma(i, j) -= s * (dx + dy);
    }
  }
  out.value = out.mse + lambda * out.tv;
  return out;
}

FdmResult fdm_solve(const GridField& u0, const GridField& gamma0, const GridField& f, const FdmConfig& config) {
  check_same(u0, gamma0, "fdm_solve");
  check_same(u0, f, "fdm_solve");
  if (!(config.lambda >= 0.0)) throw std::invalid_argument("fdm_solve: lambda must be non-negative");
  if (!(config.step > 0.0)) throw std::invalid_argument("fdm_solve: step must be positive");
  if (config.iterations < 0) throw std::invalid_argument("fdm_solve: iterations must be >= 0");
  const Eigen::MatrixXd mask = interior_mask(u0.n);
  FdmResult res{u0, gamma0, {}};
  FdmObjective obj = fdm_objective(res.u, res.gamma, f, config.lambda);
  res.trace.push_back(obj.value);

  double step = config.step;
  Eigen::MatrixXd prev_gu, prev_gg, prev_u, prev_g;
  int rising = 0;
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd gu = obj.grad_u.cwiseProduct(mask);
    const Eigen::MatrixXd gg = obj.grad_gamma.cwiseProduct(mask);
    const double gsq = gu.squaredNorm() + gg.squaredNorm();
    if (gsq == 0.0) break;
    if (config.backtracking && it > 0) {
      // Barzilai-Borwein trial step from the last displacement.
      const double ss = (res.u.values - prev_u).squaredNorm() + (res.gamma.values - prev_g).squaredNorm();
      const double sy = ((res.u.values - prev_u).cwiseProduct(gu - prev_gu)).sum() +
                        ((res.gamma.values - prev_g).cwiseProduct(gg - prev_gg)).sum();
      if (sy > 0.0 && std::isfinite(ss / sy)) step = ss / sy;
    }
    prev_u = res.u.values;
    prev_g = res.gamma.values;
    prev_gu = gu;
    prev_gg = gg;

    GridField u_try = res.u;
    GridField g_try = res.gamma;
    FdmObjective trial;
    for (int halvings = 0;; ++halvings) {
      u_try.values = res.u.values - step * gu;
      g_try.values = res.gamma.values - step * gg;
      trial = fdm_objective(u_try, g_try, f, config.lambda);
      if (!config.backtracking || trial.value <= obj.value - 1e-4 * step * gsq) break;
      if (halvings >= 60) break;
      step *= 0.5;
    }
    if (config.backtracking && !(trial.value <= obj.value)) break;  // no descent at machine precision
    rising = trial.value > obj.value ? rising + 1 : 0;
    if (!std::isfinite(trial.value) || rising >= kFdmDivergenceWindow) {
      throw FdmDivergence("fdm_solve: objective rose for " + std::to_string(rising) +
                          " consecutive iterations (step " + format_double(step) + ", iteration " +
                          std::to_string(it + 1) + ")");
    }
    res.u = std::move(u_try);
    res.gamma = std::move(g_try);
    obj = std::move(trial);
    res.trace.push_back(obj.value);
  }
  return res;
}

FdmResult fdm_solve(const ProblemSpec& problem, const FdmConfig& config, Rng& noise) {
  if (problem.dim() != 2 || problem.time_dependent()) {
    throw std::invalid_argument("fdm_solve: needs an elliptic problem with d = 2, got " + problem.id() + " with d = " +
                                std::to_string(problem.dim()));
  }
  if (problem.boundary_kind() != BoundaryKind::dirichlet_full) {
    throw std::invalid_argument("fdm_solve: needs Dirichlet data for u and gamma");
  }
  const BoxDomain& box = problem.spatial_domain();
  const int n = config.n;
  GridField u = GridField::on(box, n);
  GridField gamma = GridField::on(box, n);
  const GridField f = GridField::sample(box, n, [&](double x, double y) { return problem.source(Eigen::Vector2d(x, y)); });

  // Boundary nodes, walked face by face; corners take the x1-face normal.
  double gamma_sum = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool on_x = i == 0 || i == n - 1;
      const bool on_y = j == 0 || j == n - 1;
      if (!on_x && !on_y) continue;
      Eigen::Vector2d z(u.x(i), u.y(j));
      if (i == n - 1) z[0] = box.upper()[0];
      if (j == n - 1) z[1] = box.upper()[1];
      Eigen::Vector2d normal = Eigen::Vector2d::Zero();
      if (on_x) {
        normal[0] = i == 0 ? -1.0 : 1.0;
      } else {
        normal[1] = j == 0 ? -1.0 : 1.0;
      }
      const BoundaryValues v = problem.boundary_data(z, normal, noise);
      u.values(i, j) = v.u;
      gamma.values(i, j) = v.gamma;
      gamma_sum += v.gamma;
      ++count;
    }
  }
  const double gamma_mean = gamma_sum / count;
  const Eigen::MatrixXd& B = u.values;
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      const double s = static_cast<double>(i) / (n - 1);
      const double t = static_cast<double>(j) / (n - 1);
      const double coons = (1 - s) * B(0, j) + s * B(n - 1, j) + (1 - t) * B(i, 0) + t * B(i, n - 1) -
                           ((1 - s) * (1 - t) * B(0, 0) + s * (1 - t) * B(n - 1, 0) + (1 - s) * t * B(0, n - 1) +
                            s * t * B(n - 1, n - 1));
      u.values(i, j) = coons;
      gamma.values(i, j) = gamma_mean;
    }
  }
  return fdm_solve(u, gamma, f, config);
}

FieldEvaluator grid_evaluator(const GridField& field) {
  return [field](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd out(pts.cols());
    for (Eigen::Index c = 0; c < pts.cols(); ++c) out[c] = field.interpolate(pts(0, c), pts(1, c));
    return out;
  };
}

}  // namespace iwan
