#include "iwan/eval.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

#include "iwan/rng.hpp"

namespace iwan {

namespace {

double mesh(double lo, double hi, int i, int n) {
  if (i == n - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

double parse_double(std::string_view text, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("slice csv line " + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

TestGrid::TestGrid(const BoxDomain& domain, std::uint64_t seed, int per_axis) : seed_(seed) {
  if (per_axis < 2) {
    throw std::invalid_argument("TestGrid: need at least two points per axis");
  }
  const int dim = domain.dim();
  const Eigen::VectorXd& lo = domain.lower();
  const Eigen::VectorXd& hi = domain.upper();
  const int total = per_axis * per_axis;
  points_.resize(dim, total);
  if (dim == 1) {
    for (int i = 0; i < total; ++i) points_(0, i) = mesh(lo[0], hi[0], i, total);
    return;
  }
  Rng rng = make_stream(seed, stream::grid);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      const int c = i * per_axis + j;
      points_(0, c) = mesh(lo[0], hi[0], i, per_axis);
      points_(1, c) = mesh(lo[1], hi[1], j, per_axis);
      for (int k = 2; k < dim; ++k) points_(k, c) = lo[k] + (hi[k] - lo[k]) * unit(rng);
    }
  }
}

double relative_l2(const Eigen::VectorXd& candidate, const Eigen::VectorXd& truth) {
  if (candidate.size() != truth.size()) {
    throw std::invalid_argument("relative_l2: length mismatch");
  }
  const double denom = truth.norm();
  if (denom == 0.0) {
    throw std::invalid_argument("relative_l2: reference field is identically zero");
  }
  return (candidate - truth).norm() / denom;
}

double relative_l2(const FieldEvaluator& candidate, const FieldEvaluator& truth, const TestGrid& grid) {
  return relative_l2(candidate(grid.points()), truth(grid.points()));
}

std::vector<double> moving_average(const std::vector<double>& trace, std::size_t window) {
  if (trace.empty()) throw std::invalid_argument("moving_average: empty trace");
  if (window == 0) throw std::invalid_argument("moving_average: window must be at least 1");
  std::vector<double> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = first; k <= i; ++k) sum += trace[k];
    out[i] = sum / static_cast<double>(i + 1 - first);
  }
  return out;
}

Eigen::MatrixXd slice_points(const BoxDomain& domain, int per_axis) {
  const int dim = domain.dim();
  const Eigen::VectorXd mid = domain.center();
  const int total = per_axis * per_axis;
  Eigen::MatrixXd pts(dim, total);
  for (int c = 0; c < total; ++c) pts.col(c) = mid;
  if (dim == 1) {
    for (int i = 0; i < total; ++i) pts(0, i) = mesh(domain.lower()[0], domain.upper()[0], i, total);
    return pts;
  }
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      pts(0, i * per_axis + j) = mesh(domain.lower()[0], domain.upper()[0], i, per_axis);
      pts(1, i * per_axis + j) = mesh(domain.lower()[1], domain.upper()[1], j, per_axis);
    }
  }
  return pts;
}

SliceTable export_field(const FieldEvaluator& field, const BoxDomain& domain, int per_axis) {
  if (per_axis < 2) throw std::invalid_argument("export_field: need at least two points per axis");
  const Eigen::MatrixXd pts = slice_points(domain, per_axis);
  const Eigen::VectorXd v = field(pts);
  if (v.size() != pts.cols()) throw std::invalid_argument("export_field: evaluator returned the wrong length");
  SliceTable t;
  if (domain.dim() == 1) {
    t.x1 = pts.row(0).transpose();
    t.x2 = Eigen::VectorXd::Zero(1);
    t.values = v;
    return t;
  }
  t.x1.resize(per_axis);
  t.x2.resize(per_axis);
  for (int i = 0; i < per_axis; ++i) {
    t.x1[i] = pts(0, i * per_axis);
    t.x2[i] = pts(1, i);
  }
  t.values.resize(per_axis, per_axis);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) t.values(i, j) = v[i * per_axis + j];
  }
  return t;
}

SliceTable abs_difference(const SliceTable& a, const SliceTable& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() || a.x1 != b.x1 || a.x2 != b.x2) {
    throw std::invalid_argument("abs_difference: slices differ in shape or coordinates");
  }
  SliceTable out = a;
  out.values = (a.values - b.values).cwiseAbs();
  return out;
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_slice_csv(std::ostream& out, const SliceTable& table, const std::string& column) {
  out << "x1,x2," << column << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      out << format_double(table.x1[i]) << ',' << format_double(table.x2[j]) << ','
          << format_double(table.values(i, j)) << '\n';
    }
  }
}

SliceTable read_slice_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("x1,x2,", 0) != 0) {
    throw std::runtime_error("slice csv: missing x1,x2,<value> header");
  }
  std::vector<double> x1, x2, v;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw std::runtime_error("slice csv line " + std::to_string(lineno) + ": expected three columns");
    }
    const std::string_view s(line);
    x1.push_back(parse_double(s.substr(0, c1), lineno));
    x2.push_back(parse_double(s.substr(c1 + 1, c2 - c1 - 1), lineno));
    v.push_back(parse_double(s.substr(c2 + 1), lineno));
  }
  // Row-major order: x1 is constant along a row.
  std::size_t cols = 1;
  while (cols < x2.size() && x1[cols] == x1[0]) ++cols;
  if (x2.empty() || x2.size() % cols != 0) {
    throw std::runtime_error("slice csv: rows do not form a rectangular table");
  }
  const std::size_t rows = x2.size() / cols;
  SliceTable t;
  t.x1.resize(static_cast<Eigen::Index>(rows));
  t.x2.resize(static_cast<Eigen::Index>(cols));
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    t.x1[static_cast<Eigen::Index>(i)] = x1[i * cols];
    for (std::size_t j = 0; j < cols; ++j) {
      if (i == 0) t.x2[static_cast<Eigen::Index>(j)] = x2[j];
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i * cols + j];
    }
  }
  return t;
}

}  // namespace iwan
