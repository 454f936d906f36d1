#pragma once

#include "varpro/types.hpp"

#include <functional>
#include <vector>

namespace varpro {

/// Trust-region Gauss-Newton configuration.
///
/// max_iterations == 0 evaluates the cost at the start point and takes no
/// step (the pure random-basis reduction: only the linear weights are fit).
struct NlsqConfig {
    int max_iterations = 100;
    double ftol = 1e-8;
    double xtol = 1e-8;
    double gtol = 1e-8;
    /// <= 0 selects ||theta0|| (or 1 when theta0 == 0).
    double initial_trust_radius = 0.0;
};

/// Reported stopping reason. The corresponding inequality holds at the final
/// iterate:
///   Ftol:    cost_prev - cost <= ftol * cost_prev  (last accepted step)
///   Xtol:    ||step|| <= xtol * (xtol + ||theta||), or the trust radius
///            collapsed below that bound
///   Gtol:    ||J^T r||_inf <= gtol * max(1, cost)
///   MaxIter: iteration limit reached
enum class Termination { Ftol, Xtol, Gtol, MaxIter };

const char* to_string(Termination t);

struct NlsqResult {
    Vector theta;
    double cost = 0.0;  // 0.5 * ||r||^2
    int iterations = 0;
    Termination termination = Termination::MaxIter;
    /// Initial cost followed by the cost after each accepted step;
    /// strictly decreasing.
    std::vector<double> cost_history;
};

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Minimizes 0.5 * ||r(theta)||^2 by Gauss-Newton steps restricted to a trust
/// region (Levenberg-style damped subproblem solved through one SVD of the
/// Jacobian per iteration). The Jacobian is caller-supplied; no internal
/// finite differencing.
NlsqResult minimize(const ResidualFn& residual_fn, const JacobianFn& jacobian_fn, Vector theta0,
                    const NlsqConfig& config = {});

/// Approximately minimizes ||J s + r|| subject to ||s|| <= radius.
/// Returns the minimum-norm Gauss-Newton step whenever it fits inside the
/// radius; otherwise a damped step on the boundary.
Vector trust_region_step(const Matrix& jacobian, const Vector& residual, double radius);

}  // namespace varpro
