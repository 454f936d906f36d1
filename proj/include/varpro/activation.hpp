#pragma once

#include "varpro/types.hpp"

#include <string>

namespace varpro {

enum class Activation { Cos, Sin, Gaussian, Gelu };

const char* to_string(Activation a);

/// Parses "cos", "sin", "gaussian", "gelu". Throws contract_error otherwise.
Activation parse_activation(const std::string& name);

struct ActivationValue {
    double value;
    double d1;
    double d2;
};

/// Value and first two derivatives, all analytic.
ActivationValue activation_eval(Activation kind, double x);

/// Elementwise activation over a matrix of pre-activations.
/// Fills value and derivative matrices up to the requested order:
/// d1/d2 may be null when not needed; d3 (used by the parameter-derivative
/// reverse pass) is filled only when non-null.
void activation_arrays(Activation kind, const Matrix& z, Matrix& value, Matrix* d1, Matrix* d2,
                       Matrix* d3);

}  // namespace varpro
