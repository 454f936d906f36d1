#pragma once

#include "varpro/network.hpp"
#include "varpro/nonlinearity.hpp"
#include "varpro/row_spec.hpp"
#include "varpro/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace varpro {

using ScalarField = std::function<double(const Vector&)>;

/// One boundary or initial condition: a linear functional on a box face, or a
/// value-matching constraint between two opposite faces of one dimension.
struct BoundaryCondition {
    RowRole role = RowRole::Boundary;  // Boundary, Initial or PeriodicPair
    Index dim = 0;
    int side = 0;       // 0 -> lower face, 1 -> upper face (faces only)
    DiffCoeffs op;      // e.g. {value: 1} for a Dirichlet row, {first[t]: 1} for d/dt
    ScalarField rhs;    // boundary/initial data; null on periodic pairs (rhs 0)
};

/// A boundary/initial-value problem on a box: linear operator, boundary
/// conditions, source, optional nonlinear terms and (for manufactured
/// problems) the exact solution.
struct BvpSpec {
    std::string name;
    DomainBox box;
    int pde_order = 2;
    std::function<DiffCoeffs(const Vector&)> lhs;  // linear-operator coefficients at a point
    ScalarField source;                            // f
    std::vector<BoundaryCondition> bcs;
    ScalarField exact;  // optional closed form
    std::optional<NonlinearTerms> nonlinear;
    Index time_dim = -1;  // -1 for stationary problems; otherwise the time coordinate
    int time_order = 0;   // order of time derivatives (1 or 2)

    bool time_dependent() const { return time_dim >= 0; }
};

/// Uniform tensor collocation grid plus the residual rows it induces:
/// one PDE row per grid point (boundary points included), then boundary rows
/// per condition in declaration order. Corner points lying on several faces
/// contribute one row per condition; nothing is deduplicated.
struct CollocationSet {
    Matrix points;  // N x d
    std::vector<LinearRow> rows;
    Index q1 = 0;
    Index n_points = 0;
    Index n_boundary_rows = 0;
};

/// Builds the Q1^d uniform grid (endpoints included) on the problem's box and
/// its rows. Initial conditions are imposed only on the initial-time face.
CollocationSet build_collocation(const BvpSpec& problem, Index q1);

/// Benchmark catalog. Entries: poisson2d, advection1d, helmholtz_nl, burgers,
/// klein_gordon. Sources are hand-derived closed forms consistent with each
/// entry's exact solution.
BvpSpec catalog_entry(const std::string& name);
std::vector<std::string> catalog_names();

struct ErrorReport {
    double max_error = 0.0;
    double rms_error = 0.0;
};

/// Max / rms error of the network field against the exact solution on a
/// uniform q2^d test grid over the problem's box.
ErrorReport evaluate_errors(const Architecture& arch, const Vector& theta, const Vector& beta,
                            const BvpSpec& problem, Index q2);

/// Outcome of one time-block solve, as produced by the caller's solver.
struct BlockOutcome {
    Vector theta;
    Vector beta;
    double cost = 0.0;
    int gn_iterations = 0;
    int newton_iterations = 0;
    int subiterations = 0;
    bool success = true;
    bool newton_converged = true;
    Vector final_residual;  // residual of the assembled system at (theta, beta)
};

struct BlockReport {
    BlockOutcome outcome;
    DomainBox box;
    ErrorReport errors;
};

struct MarchResult {
    std::vector<BlockReport> blocks;
    ErrorReport overall;
    bool completed = true;
};

using BlockSolver =
    std::function<BlockOutcome(const BvpSpec& block_problem, const CollocationSet&, int block)>;

/// Splits the temporal extent into n_blocks uniform blocks and solves them in
/// order. Block k+1 takes its initial-condition data from block k's network
/// evaluated at the interface time (each initial condition's functional is
/// applied to the previous network, so u and du/dt hand-offs both work).
/// A failed block aborts the march with a partial report.
MarchResult block_march(const BvpSpec& problem, const Architecture& arch, Index q1, Index q2,
                        int n_blocks, const BlockSolver& solve);

}  // namespace varpro
