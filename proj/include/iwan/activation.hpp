#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace iwan {

enum class Activation { identity, tanh, softplus, sinc, elu, sigmoid };

/// Value and first two derivatives of an activation at one point.
struct ActivationValue {
  double value;
  double d1;
  double d2;
};

/// Evaluates f(z), f'(z) and f''(z). Total for every kind.
///
/// sinc is sin(z)/z with the removable singularity filled in; near zero it is
/// evaluated from its Taylor series to avoid cancellation in the quotient
/// forms of the derivatives. elu uses alpha = 1.
ActivationValue activation_eval(Activation kind, double z);

/// activation_eval over n contiguous entries. d1 and d2 may be null when
/// those derivatives are not wanted.
void activation_apply(Activation kind, std::size_t n, const double* z, double* value, double* d1, double* d2);

std::string_view to_string(Activation kind);

/// Throws std::invalid_argument on an unknown name.
Activation activation_from_string(std::string_view name);

}  // namespace iwan
