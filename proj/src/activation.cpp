#include "iwan/activation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iwan {
namespace {

// Below this magnitude the quotient forms of sinc'' lose more than ~1e-11
// relative accuracy; the degree-8 series is exact to rounding well past it.
constexpr double kSincSeriesThreshold = 1e-2;

inline ActivationValue sinc_eval(double z) {
  if (std::abs(z) < kSincSeriesThreshold) {
    const double z2 = z * z;
    const double value = 1.0 + z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (-1.0 / 5040.0 + z2 / 362880.0)));
    const double d1 = z * (-1.0 / 3.0 + z2 * (1.0 / 30.0 + z2 * (-1.0 / 840.0 + z2 / 45360.0)));
    const double d2 = -1.0 / 3.0 + z2 * (1.0 / 10.0 + z2 * (-1.0 / 168.0 + z2 / 6480.0));
    return {value, d1, d2};
  }
  const double s = std::sin(z);
  const double c = std::cos(z);
  const double inv = 1.0 / z;
  const double value = s * inv;
  const double d1 = (c - value) * inv;
  const double d2 = -value - 2.0 * d1 * inv;
  return {value, d1, d2};
}

inline ActivationValue tanh_eval(double z) {
  const double t = std::tanh(z);
  const double d1 = 1.0 - t * t;
  return {t, d1, -2.0 * t * d1};
}

inline ActivationValue softplus_eval(double z) {
  const double e = std::exp(-std::abs(z));
  const double value = std::max(z, 0.0) + std::log1p(e);
  const double s = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return {value, s, s * (1.0 - s)};
}

inline ActivationValue elu_eval(double z) {
  if (z > 0.0) {
    return {z, 1.0, 0.0};
  }
  const double m = std::expm1(z);
  return {m, m + 1.0, m + 1.0};
}

inline ActivationValue sigmoid_eval(double z) {
  const double e = std::exp(-std::abs(z));
  const double s = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  const double d1 = s * (1.0 - s);
  return {s, d1, d1 * (1.0 - 2.0 * s)};
}

inline ActivationValue identity_eval(double z) { return {z, 1.0, 0.0}; }

template <ActivationValue (*F)(double)>
void apply_all(std::size_t n, const double* z, double* value, double* d1, double* d2) {
  if (d2) {
    for (std::size_t i = 0; i < n; ++i) {
      const ActivationValue a = F(z[i]);
      value[i] = a.value;
      d1[i] = a.d1;
      d2[i] = a.d2;
    }
  } else if (d1) {
    for (std::size_t i = 0; i < n; ++i) {
      const ActivationValue a = F(z[i]);
      value[i] = a.value;
      d1[i] = a.d1;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) value[i] = F(z[i]).value;
  }
}

}  // namespace

ActivationValue activation_eval(Activation kind, double z) {
  switch (kind) {
    case Activation::identity: return identity_eval(z);
    case Activation::tanh: return tanh_eval(z);
    case Activation::softplus: return softplus_eval(z);
    case Activation::sinc: return sinc_eval(z);
    case Activation::elu: return elu_eval(z);
    case Activation::sigmoid: return sigmoid_eval(z);
  }
  throw std::logic_error("unhandled activation kind");
}

void activation_apply(Activation kind, std::size_t n, const double* z, double* value, double* d1, double* d2) {
  if (d2 && !d1) throw std::invalid_argument("activation_apply: d2 requested without d1");
  switch (kind) {
    case Activation::identity: return apply_all<identity_eval>(n, z, value, d1, d2);
    case Activation::tanh: return apply_all<tanh_eval>(n, z, value, d1, d2);
    case Activation::softplus: return apply_all<softplus_eval>(n, z, value, d1, d2);
    case Activation::sinc: return apply_all<sinc_eval>(n, z, value, d1, d2);
    case Activation::elu: return apply_all<elu_eval>(n, z, value, d1, d2);
    case Activation::sigmoid: return apply_all<sigmoid_eval>(n, z, value, d1, d2);
  }
  throw std::logic_error("unhandled activation kind");
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::sinc: return "sinc";
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  for (Activation a : {Activation::identity, Activation::tanh, Activation::softplus, Activation::sinc,
                       Activation::elu, Activation::sigmoid}) {
    if (to_string(a) == name) {
      return a;
    }
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

}  // namespace iwan
