#include "varpro/problems.hpp"

#include <cmath>
#include <numbers>

namespace varpro {

namespace {

constexpr double kPi = std::numbers::pi;

// 1-D factor with hand-derived derivatives; every manufactured solution below
// is a product of two of these.
struct Factor {
    std::function<double(double)> f, d1, d2;
};

// --- poisson2d / exact solution factor --------------------------------------
// p(s) = 2 cos(1.5 pi s + 0.4 pi) + 1.5 cos(3 pi s - 0.2 pi) + 1 / (1 + s^2)
Factor poisson_factor() {
    Factor p;
    p.f = [](double s) {
        return 2.0 * std::cos(1.5 * kPi * s + 0.4 * kPi) +
               1.5 * std::cos(3.0 * kPi * s - 0.2 * kPi) + 1.0 / (1.0 + s * s);
    };
    p.d1 = [](double s) {
        const double q = 1.0 + s * s;
        return -3.0 * kPi * std::sin(1.5 * kPi * s + 0.4 * kPi) -
               4.5 * kPi * std::sin(3.0 * kPi * s - 0.2 * kPi) - 2.0 * s / (q * q);
    };
    p.d2 = [](double s) {
        const double q = 1.0 + s * s;
        return -4.5 * kPi * kPi * std::cos(1.5 * kPi * s + 0.4 * kPi) -
               13.5 * kPi * kPi * std::cos(3.0 * kPi * s - 0.2 * kPi) +
               (6.0 * s * s - 2.0) / (q * q * q);
    };
    return p;
}

// --- helmholtz_nl exact solution factor --------------------------------------
// q(s) = 2.5 cos(1.5 pi s - 0.4 pi) + 1.5 cos(3 pi s + 0.3 pi) + sinh(s)
Factor helmholtz_factor() {
    Factor q;
    q.f = [](double s) {
        return 2.5 * std::cos(1.5 * kPi * s - 0.4 * kPi) +
               1.5 * std::cos(3.0 * kPi * s + 0.3 * kPi) + 0.5 * (std::exp(s) - std::exp(-s));
    };
    q.d1 = [](double s) {
        return -3.75 * kPi * std::sin(1.5 * kPi * s - 0.4 * kPi) -
               4.5 * kPi * std::sin(3.0 * kPi * s + 0.3 * kPi) +
               0.5 * (std::exp(s) + std::exp(-s));
    };
    q.d2 = [](double s) {
        return -5.625 * kPi * kPi * std::cos(1.5 * kPi * s - 0.4 * kPi) -
               13.5 * kPi * kPi * std::cos(3.0 * kPi * s + 0.3 * kPi) +
               0.5 * (std::exp(s) - std::exp(-s));
    };
    return q;
}

// --- burgers exact solution factor (same form in x and t) ---------------------
// b(s) = 2 cos(pi s + 2 pi / 5) + 1.5 cos(2 pi s - 3 pi / 5)
Factor burgers_factor() {
    Factor b;
    b.f = [](double s) {
        return 2.0 * std::cos(kPi * s + 0.4 * kPi) + 1.5 * std::cos(2.0 * kPi * s - 0.6 * kPi);
    };
    b.d1 = [](double s) {
        return -2.0 * kPi * std::sin(kPi * s + 0.4 * kPi) -
               3.0 * kPi * std::sin(2.0 * kPi * s - 0.6 * kPi);
    };
    b.d2 = [](double s) {
        return -2.0 * kPi * kPi * std::cos(kPi * s + 0.4 * kPi) -
               6.0 * kPi * kPi * std::cos(2.0 * kPi * s - 0.6 * kPi);
    };
    return b;
}

// --- klein_gordon exact solution factor ---------------------------------------
// k(s) = 2 cos(pi s + pi / 5) + 1.8 cos(2 pi s + 7 pi / 20)
Factor klein_gordon_factor() {
    Factor k;
    k.f = [](double s) {
        return 2.0 * std::cos(kPi * s + 0.2 * kPi) + 1.8 * std::cos(2.0 * kPi * s + 0.35 * kPi);
    };
    k.d1 = [](double s) {
        return -2.0 * kPi * std::sin(kPi * s + 0.2 * kPi) -
               3.6 * kPi * std::sin(2.0 * kPi * s + 0.35 * kPi);
    };
    k.d2 = [](double s) {
        return -2.0 * kPi * kPi * std::cos(kPi * s + 0.2 * kPi) -
               7.2 * kPi * kPi * std::cos(2.0 * kPi * s + 0.35 * kPi);
    };
    return k;
}

ScalarField product_field(const Factor& a, const Factor& b) {
    return [a, b](const Vector& x) { return a.f(x[0]) * b.f(x[1]); };
}

BoundaryCondition dirichlet_edge(Index dim, int side, const ScalarField& value,
                                 RowRole role = RowRole::Boundary) {
    BoundaryCondition bc;
    bc.role = role;
    bc.dim = dim;
    bc.side = side;
    bc.op.value = 1.0;
    bc.rhs = value;
    return bc;
}

BvpSpec make_poisson() {
    BvpSpec p;
    p.name = "poisson2d";
    p.box.intervals = {{0.0, 1.0}, {0.0, 1.0}};
    p.pde_order = 2;
    const Factor f = poisson_factor();
    p.exact = product_field(f, f);
    p.source = [f](const Vector& x) { return f.d2(x[0]) * f.f(x[1]) + f.f(x[0]) * f.d2(x[1]); };
    DiffCoeffs lap;
    lap.second_at(0, 0, 2) = 1.0;
    lap.second_at(1, 1, 2) = 1.0;
    p.lhs = [lap](const Vector&) { return lap; };
    // Edge order: y = 0, y = 1, x = 0, x = 1.
    p.bcs.push_back(dirichlet_edge(1, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(1, 1, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 1, p.exact));
    return p;
}

BvpSpec make_advection() {
    BvpSpec p;
    p.name = "advection1d";
    p.box.intervals = {{0.0, 3.0}, {0.0, 10.0}};
    p.pde_order = 1;
    p.time_dim = 1;
    p.time_order = 1;
    const double c = -2.0;  // wave speed
    p.exact = [](const Vector& x) { return std::sin(2.0 * kPi / 3.0 * (x[0] - 2.0 * x[1] - 2.0)); };
    p.source = [](const Vector&) { return 0.0; };
    DiffCoeffs op;  // du/dt - c du/dx
    op.first[1] = 1.0;
    op.first[0] = -c;
    p.lhs = [op](const Vector&) { return op; };

    BoundaryCondition periodic;  // u(0, t) = u(3, t), value matching only
    periodic.role = RowRole::PeriodicPair;
    periodic.dim = 0;
    periodic.op.value = 1.0;
    p.bcs.push_back(periodic);
    p.bcs.push_back(dirichlet_edge(1, 0, p.exact, RowRole::Initial));
    return p;
}

BvpSpec make_helmholtz() {
    BvpSpec p;
    p.name = "helmholtz_nl";
    p.box.intervals = {{0.0, 1.0}, {0.0, 1.0}};
    p.pde_order = 2;
    const Factor q = helmholtz_factor();
    p.exact = product_field(q, q);
    const ScalarField exact = p.exact;
    p.source = [q, exact](const Vector& x) {
        const double u = exact(x);
        return q.d2(x[0]) * q.f(x[1]) + q.f(x[0]) * q.d2(x[1]) - 100.0 * u +
               5.0 * std::cos(2.0 * u);
    };
    DiffCoeffs op;  // laplacian - 100 u
    op.second_at(0, 0, 2) = 1.0;
    op.second_at(1, 1, 2) = 1.0;
    op.value = -100.0;
    p.lhs = [op](const Vector&) { return op; };
    p.bcs.push_back(dirichlet_edge(1, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(1, 1, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 1, p.exact));

    NonlinearTerms nl;
    nl.f = [](const PointState& s) { return 5.0 * std::cos(2.0 * s.u); };
    nl.f_prime = [](const PointState& s) {
        DiffCoeffs c;
        c.value = -10.0 * std::sin(2.0 * s.u);
        return c;
    };
    p.nonlinear = nl;
    return p;
}

BvpSpec make_burgers() {
    BvpSpec p;
    p.name = "burgers";
    p.box.intervals = {{0.0, 1.0}, {0.0, 1.0}};
    p.pde_order = 2;
    p.time_dim = 1;
    p.time_order = 1;
    const double nu = 0.05;
    const Factor b = burgers_factor();
    p.exact = product_field(b, b);
    p.source = [b, nu](const Vector& x) {
        const double xv = b.f(x[0]), tv = b.f(x[1]);
        const double u = xv * tv;
        const double u_t = xv * b.d1(x[1]);
        const double u_x = b.d1(x[0]) * tv;
        const double u_xx = b.d2(x[0]) * tv;
        return u_t + u * u_x - nu * u_xx;
    };
    DiffCoeffs op;  // du/dt - nu d2u/dx2
    op.first[1] = 1.0;
    op.second_at(0, 0, 2) = -nu;
    p.lhs = [op](const Vector&) { return op; };
    p.bcs.push_back(dirichlet_edge(0, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 1, p.exact));
    p.bcs.push_back(dirichlet_edge(1, 0, p.exact, RowRole::Initial));

    NonlinearTerms nl;  // F(u) = u du/dx
    nl.f = [](const PointState& s) { return s.u * s.du[0]; };
    nl.f_prime = [](const PointState& s) {
        DiffCoeffs c;
        c.value = s.du[0];
        c.first[0] = s.u;
        return c;
    };
    p.nonlinear = nl;
    return p;
}

BvpSpec make_klein_gordon() {
    BvpSpec p;
    p.name = "klein_gordon";
    p.box.intervals = {{0.0, 1.0}, {0.0, 2.0}};
    p.pde_order = 2;
    p.time_dim = 1;
    p.time_order = 2;
    const Factor k = klein_gordon_factor();
    p.exact = product_field(k, k);
    p.source = [k](const Vector& x) {
        const double u = k.f(x[0]) * k.f(x[1]);
        return k.f(x[0]) * k.d2(x[1]) - k.d2(x[0]) * k.f(x[1]) + u + std::sin(u);
    };
    DiffCoeffs op;  // d2u/dt2 - d2u/dx2 + u
    op.second_at(1, 1, 2) = 1.0;
    op.second_at(0, 0, 2) = -1.0;
    op.value = 1.0;
    p.lhs = [op](const Vector&) { return op; };
    p.bcs.push_back(dirichlet_edge(0, 0, p.exact));
    p.bcs.push_back(dirichlet_edge(0, 1, p.exact));
    p.bcs.push_back(dirichlet_edge(1, 0, p.exact, RowRole::Initial));  // u(x, 0)
    BoundaryCondition velocity;  // du/dt (x, 0)
    velocity.role = RowRole::Initial;
    velocity.dim = 1;
    velocity.side = 0;
    velocity.op.first[1] = 1.0;
    velocity.rhs = [k](const Vector& x) { return k.f(x[0]) * k.d1(x[1]); };
    p.bcs.push_back(velocity);

    NonlinearTerms nl;  // F(u) = sin(u)
    nl.f = [](const PointState& s) { return std::sin(s.u); };
    nl.f_prime = [](const PointState& s) {
        DiffCoeffs c;
        c.value = std::cos(s.u);
        return c;
    };
    p.nonlinear = nl;
    return p;
}

std::vector<Index> tensor_index(Index p, Index q1, Index d) {
    std::vector<Index> idx(d);
    for (Index k = d - 1; k >= 0; --k) {
        idx[k] = p % q1;
        p /= q1;
    }
    return idx;
}

Index flat_index(const std::vector<Index>& idx, Index q1) {
    Index p = 0;
    for (Index v : idx) p = p * q1 + v;
    return p;
}

}  // namespace

BvpSpec catalog_entry(const std::string& name) {
    if (name == "poisson2d") return make_poisson();
    if (name == "advection1d") return make_advection();
    if (name == "helmholtz_nl") return make_helmholtz();
    if (name == "burgers") return make_burgers();
    if (name == "klein_gordon") return make_klein_gordon();
    throw contract_error("unknown problem '" + name + "'");
}

std::vector<std::string> catalog_names() {
    return {"poisson2d", "advection1d", "helmholtz_nl", "burgers", "klein_gordon"};
}

CollocationSet build_collocation(const BvpSpec& problem, Index q1) {
    require(q1 >= 2, "need at least two grid points per direction");
    problem.box.validate();
    const Index d = problem.box.dim();

    Index n = 1;
    for (Index k = 0; k < d; ++k) n *= q1;

    CollocationSet cs;
    cs.q1 = q1;
    cs.n_points = n;
    cs.points.resize(n, d);
    for (Index p = 0; p < n; ++p) {
        const auto idx = tensor_index(p, q1, d);
        for (Index k = 0; k < d; ++k) {
            const double frac = static_cast<double>(idx[k]) / static_cast<double>(q1 - 1);
            cs.points(p, k) = problem.box.lo(k) + frac * (problem.box.hi(k) - problem.box.lo(k));
        }
    }

    // PDE rows on every collocation point, boundary points included.
    cs.rows.reserve(static_cast<std::size_t>(n));
    for (Index p = 0; p < n; ++p) {
        LinearRow row;
        row.role = RowRole::Pde;
        row.point_a = p;
        row.coeffs = problem.lhs(cs.points.row(p));
        row.rhs = problem.source(cs.points.row(p));
        cs.rows.push_back(row);
    }

    for (std::size_t bi = 0; bi < problem.bcs.size(); ++bi) {
        const auto& bc = problem.bcs[bi];
        require(bc.dim >= 0 && bc.dim < d, "boundary condition references missing dimension");
        if (bc.role == RowRole::PeriodicPair) {
            for (Index p = 0; p < n; ++p) {
                auto idx = tensor_index(p, q1, d);
                if (idx[bc.dim] != 0) continue;
                auto other = idx;
                other[bc.dim] = q1 - 1;
                LinearRow row;
                row.role = RowRole::PeriodicPair;
                row.point_a = p;
                row.point_b = flat_index(other, q1);
                row.coeffs = bc.op;
                row.rhs = 0.0;
                row.bc_index = static_cast<int>(bi);
                cs.rows.push_back(row);
            }
        } else {
            const Index face = bc.side == 0 ? 0 : q1 - 1;
            for (Index p = 0; p < n; ++p) {
                if (tensor_index(p, q1, d)[bc.dim] != face) continue;
                LinearRow row;
                row.role = bc.role;
                row.point_a = p;
                row.coeffs = bc.op;
                row.rhs = bc.rhs ? bc.rhs(cs.points.row(p)) : 0.0;
                row.bc_index = static_cast<int>(bi);
                cs.rows.push_back(row);
            }
        }
    }

    cs.n_boundary_rows = static_cast<Index>(cs.rows.size()) - n;
    return cs;
}

ErrorReport evaluate_errors(const Architecture& arch, const Vector& theta, const Vector& beta,
                            const BvpSpec& problem, Index q2) {
    require(static_cast<bool>(problem.exact), "problem has no exact solution to compare against");
    require(q2 >= 2, "need at least two test points per direction");
    const Index d = problem.box.dim();
    Index n = 1;
    for (Index k = 0; k < d; ++k) n *= q2;

    Matrix pts(n, d);
    for (Index p = 0; p < n; ++p) {
        const auto idx = tensor_index(p, q2, d);
        for (Index k = 0; k < d; ++k) {
            const double frac = static_cast<double>(idx[k]) / static_cast<double>(q2 - 1);
            pts(p, k) = problem.box.lo(k) + frac * (problem.box.hi(k) - problem.box.lo(k));
        }
    }

    const Vector u = network_output(arch, theta, beta, pts, problem.box);
    ErrorReport rep;
    double sumsq = 0.0;
    for (Index p = 0; p < n; ++p) {
        const double err = std::abs(u[p] - problem.exact(pts.row(p)));
        rep.max_error = std::max(rep.max_error, err);
        sumsq += err * err;
    }
    rep.rms_error = std::sqrt(sumsq / static_cast<double>(n));
    return rep;
}

namespace {

// Initial-condition data for the next block: the condition's functional
// applied to the previous block's network at the interface time.
ScalarField interface_data(const Architecture& arch, Vector theta, Vector beta, DomainBox prev_box,
                           DiffCoeffs op, Index time_dim, double t_interface) {
    return [arch, theta = std::move(theta), beta = std::move(beta), prev_box = std::move(prev_box),
            op, time_dim, t_interface](const Vector& x) {
        Matrix pt(1, x.size());
        pt.row(0) = x;
        pt(0, time_dim) = t_interface;
        const HiddenEval he = hidden_eval(arch, theta, pt, prev_box, op.max_order());
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(arch.last_hidden());
        accumulate_row(row, he, 0, op, 1.0);
        return row.dot(beta);
    };
}

}  // namespace

MarchResult block_march(const BvpSpec& problem, const Architecture& arch, Index q1, Index q2,
                        int n_blocks, const BlockSolver& solve) {
    require(n_blocks >= 1, "need at least one time block");
    if (n_blocks > 1) require(problem.time_dependent(), "block marching needs a time coordinate");

    MarchResult out;
    const Index td = problem.time_dependent() ? problem.time_dim : problem.box.dim() - 1;
    const double t0 = problem.box.lo(td);
    const double dt = (problem.box.hi(td) - t0) / static_cast<double>(n_blocks);

    double total_sumsq = 0.0;
    double total_count = 0.0;

    BvpSpec block = problem;
    for (int b = 0; b < n_blocks; ++b) {
        block.box = problem.box;
        block.box.intervals[td] = {t0 + b * dt, t0 + (b + 1) * dt};

        CollocationSet colloc = build_collocation(block, q1);
        BlockReport rep;
        rep.outcome = solve(block, colloc, b);
        rep.box = block.box;
        if (rep.outcome.success)
            rep.errors = evaluate_errors(arch, rep.outcome.theta, rep.outcome.beta, block, q2);
        out.blocks.push_back(rep);
        if (!rep.outcome.success) {
            out.completed = false;
            break;
        }

        Index n = 1;
        for (Index k = 0; k < block.box.dim(); ++k) n *= q2;
        total_sumsq += rep.errors.rms_error * rep.errors.rms_error * static_cast<double>(n);
        total_count += static_cast<double>(n);
        out.overall.max_error = std::max(out.overall.max_error, rep.errors.max_error);

        // Hand the terminal state of this block to the next block's initial
        // conditions: each initial functional is applied to this network.
        if (b + 1 < n_blocks) {
            const double t_interface = block.box.hi(td);
            for (auto& bc : block.bcs) {
                if (bc.role != RowRole::Initial) continue;
                bc.rhs = interface_data(arch, rep.outcome.theta, rep.outcome.beta, block.box,
                                        bc.op, td, t_interface);
            }
        }
    }
    if (total_count > 0) out.overall.rms_error = std::sqrt(total_sumsq / total_count);
    return out;
}

}  // namespace varpro
