#pragma once

#include "varpro/problems.hpp"
#include "varpro/varpro.hpp"

#include <optional>
#include <vector>

namespace varpro {

struct NewtonConfig {
    int max_iterations = 20;
    /// Relative tolerance applied to the rms-normalized residual and
    /// increment norms (grid-size independent):
    ///   rms(R) <= tolerance * max(1, rms([f; g]))
    ///   rms(dU) <= tolerance * max(1, rms(u))
    double tolerance = 1e-8;
};

struct NewtonReport {
    int iterations = 0;  // linearized solves performed
    bool converged = false;
    std::vector<double> residual_rms;   // rms(R) at the top of each iteration
    std::vector<double> increment_rms;  // rms(dU) after each solve
    int gn_iterations = 0;
    int subiterations = 0;
};

struct NewtonOutcome {
    Vector theta;
    Vector beta;
    double final_cost = 0.0;  // cost of the last linearized solve
    NewtonReport report;
};

/// Field state (value and derivatives up to `order`) of the network at every
/// row of `points`.
std::vector<PointState> network_states(const Architecture& arch, const Vector& theta,
                                       const Vector& beta, const Matrix& points,
                                       const DomainBox& box, int order);

/// Residual of the nonlinear system at a field state, row for row:
/// PDE rows f - L u - F(u), boundary rows g - B u - G(u), periodic rows the
/// negated constraint mismatch.
Vector nonlinear_residual(const BvpSpec& problem, const CollocationSet& colloc,
                          const std::vector<PointState>& states);

/// Linearizes the nonlinear problem about the field state w: PDE rows become
/// (L + F'(w)) u = f - F(w) + F'(w) w and boundary rows (B + G'(w)) u =
/// g - G(w) + G'(w) w. With zero nonlinear terms the rows come back unchanged.
/// Throws numeric_error (naming the point) if F or F' is non-finite at w.
std::vector<LinearRow> linearize(const BvpSpec& problem, const CollocationSet& colloc,
                                 const std::vector<PointState>& w);

/// Newton iteration for a nonlinear problem; each step solves the linearized
/// system, written in terms of the updated field, with the variable-projection
/// solve. The iterate is carried by the network coefficients: theta warm-starts
/// each inner solve. Non-convergence is reported, not thrown.
///
/// The default initial guess is the zero field (beta = 0) with the supplied
/// theta0; pass beta0 to start from a known network state.
NewtonOutcome newton_varpro_solve(const BvpSpec& problem, const CollocationSet& colloc,
                                  const Architecture& arch, const NewtonConfig& newton,
                                  const PerturbConfig& perturb, const NlsqConfig& nlsq_config,
                                  const Vector& theta0, std::optional<Vector> beta0 = {});

}  // namespace varpro
