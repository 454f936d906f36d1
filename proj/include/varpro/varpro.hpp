#pragma once

#include "varpro/linalg.hpp"
#include "varpro/network.hpp"
#include "varpro/nlsq.hpp"
#include "varpro/row_spec.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace varpro {

/// Collocation system H(theta) beta = S for the current theta, together with
/// the minimum-norm least-squares output weights and the factorization that
/// produced them. Rows of H follow the row list (PDE rows, then boundary
/// rows); S holds the row right-hand sides.
struct AssembledSystem {
    Matrix h;
    Vector s;
    Vector beta_ls;
    Vector theta;  // the theta this system was assembled for
    LstsqSvd fact;
};

/// Restart-perturbation settings for the outer solve.
struct PerturbConfig {
    double delta = 0.0;          // maximum perturbation magnitude (>= 0)
    double preference_p = 0.5;   // probability of reusing the preferred magnitude
    int max_subiterations = 0;
    double cost_threshold = 1e-12;  // on the returned cost 0.5*||r||^2
    std::uint64_t seed = 0;
};

/// Separable collocation problem: owns the row list, the collocation points
/// and a single-slot cache of (theta, H, beta_ls, forward trace).
///
/// The cache is keyed on bit-exact equality of theta: the optimizer re-calls
/// residual and jacobian with identical vectors, and approximate matching
/// would risk stale systems.
class VarProProblem {
public:
    VarProProblem(Architecture arch, DomainBox box, Matrix points, std::vector<LinearRow> rows);

    Index theta_size() const { return arch_.hidden_param_count(); }
    Index residual_size() const { return static_cast<Index>(rows_.size()); }
    Index output_width() const { return arch_.last_hidden(); }

    const Architecture& arch() const { return arch_; }
    const DomainBox& box() const { return box_; }
    const Matrix& points() const { return points_; }
    const std::vector<LinearRow>& rows() const { return rows_; }
    const Vector& rhs() const { return rhs_; }

    /// Builds (or retrieves) H, S and the least-squares output weights for
    /// this theta.
    const AssembledSystem& assemble(const Vector& theta);

    /// Reduced residual r(theta) = H(theta) beta_ls(theta) - S.
    Vector residual(const Vector& theta);

    /// Approximate reduced Jacobian J0 - H K with K the least-squares solution
    /// of H K = J0 and J0 the beta-frozen parameter derivative of the rows
    /// (the projected first term of the variable-projection Jacobian; the
    /// second term is dropped).
    Matrix jacobian(const Vector& theta);

    /// Number of from-scratch assemblies performed (cache misses).
    long assembly_count() const { return assembly_count_; }

private:
    Architecture arch_;
    DomainBox box_;
    Matrix points_;
    std::vector<LinearRow> rows_;
    Vector rhs_;
    int order_ = 0;

    bool cached_ = false;
    AssembledSystem sys_;
    ForwardTrace trace_;
    long assembly_count_ = 0;
};

struct VarProResult {
    Vector theta;
    Vector beta;
    double cost = 0.0;
    int gn_iterations = 0;       // accumulated over all starts
    int subiterations_used = 0;  // restarts actually executed
    Termination termination = Termination::MaxIter;  // of the best start
    std::vector<double> start_costs;                 // converged cost per start
};

/// Outer solve: minimize the reduced problem from theta0; while the converged
/// cost stays above the threshold, restart from the best theta plus a uniform
/// perturbation whose magnitude adapts to previously successful magnitudes;
/// finally solve for the output weights at the best theta.
VarProResult varpro_solve(VarProProblem& problem, const Vector& theta0,
                          const PerturbConfig& perturb, const NlsqConfig& nlsq_config);

}  // namespace varpro
