#include "varpro/newton.hpp"

#include <cmath>
#include <string>

namespace varpro {

namespace {

double rms(const Vector& v) {
    return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

int required_order(const CollocationSet& colloc) {
    int order = 0;
    for (const auto& row : colloc.rows) order = std::max(order, row.coeffs.max_order());
    return order;
}

}  // namespace

std::vector<PointState> network_states(const Architecture& arch, const Vector& theta,
                                       const Vector& beta, const Matrix& points,
                                       const DomainBox& box, int order) {
    require(beta.size() == arch.last_hidden(), "beta has wrong length");
    const HiddenEval he = hidden_eval(arch, theta, points, box, order);
    const Index d = box.dim();
    std::vector<PointState> states(static_cast<std::size_t>(points.rows()));
    for (Index p = 0; p < points.rows(); ++p) {
        auto& s = states[static_cast<std::size_t>(p)];
        s.u = he.psi.row(p).dot(beta);
        if (order >= 1)
            for (Index k = 0; k < d; ++k) s.du[k] = he.grad[k].row(p).dot(beta);
        if (order >= 2)
            for (Index i = 0; i < sym_count(d); ++i) s.d2u[i] = he.hess[i].row(p).dot(beta);
    }
    return states;
}

Vector nonlinear_residual(const BvpSpec& problem, const CollocationSet& colloc,
                          const std::vector<PointState>& states) {
    require(states.size() == static_cast<std::size_t>(colloc.n_points),
            "state list does not cover the collocation set");
    const NonlinearTerms* nl = problem.nonlinear ? &*problem.nonlinear : nullptr;

    Vector r(static_cast<Index>(colloc.rows.size()));
    for (std::size_t i = 0; i < colloc.rows.size(); ++i) {
        const auto& row = colloc.rows[i];
        const PointState& a = states[static_cast<std::size_t>(row.point_a)];
        double value = row.rhs - a.apply(row.coeffs);
        if (row.is_pair()) {
            value += states[static_cast<std::size_t>(row.point_b)].apply(row.coeffs);
        } else if (row.role == RowRole::Pde) {
            if (nl && nl->f) value -= nl->f(a);
        } else {
            if (nl && nl->g) value -= nl->g(a);
        }
        r[static_cast<Index>(i)] = value;
    }
    return r;
}

std::vector<LinearRow> linearize(const BvpSpec& problem, const CollocationSet& colloc,
                                 const std::vector<PointState>& w) {
    require(w.size() == static_cast<std::size_t>(colloc.n_points),
            "state list does not cover the collocation set");
    std::vector<LinearRow> rows = colloc.rows;
    if (!problem.nonlinear) return rows;
    const NonlinearTerms& nl = *problem.nonlinear;

    for (auto& row : rows) {
        if (row.is_pair()) continue;  // value-matching constraints stay linear
        const PointState& state = w[static_cast<std::size_t>(row.point_a)];

        const bool pde = row.role == RowRole::Pde;
        const auto& term = pde ? nl.f : nl.g;
        const auto& term_prime = pde ? nl.f_prime : nl.g_prime;
        if (!term) continue;
        require(static_cast<bool>(term_prime), "nonlinear term without a linearization");

        const double f_w = term(state);
        const DiffCoeffs lin = term_prime(state);
        const double lin_at_w = state.apply(lin);
        if (!std::isfinite(f_w) || !std::isfinite(lin_at_w))
            throw numeric_error("nonlinear term is non-finite at collocation point " +
                                std::to_string(row.point_a));
        row.coeffs += lin;
        row.rhs += -f_w + lin_at_w;
    }
    return rows;
}

NewtonOutcome newton_varpro_solve(const BvpSpec& problem, const CollocationSet& colloc,
                                  const Architecture& arch, const NewtonConfig& newton,
                                  const PerturbConfig& perturb, const NlsqConfig& nlsq_config,
                                  const Vector& theta0, std::optional<Vector> beta0) {
    require(problem.nonlinear.has_value(), "problem carries no nonlinear terms");
    require(newton.tolerance > 0.0, "newton tolerance must be positive");
    require(newton.max_iterations >= 0, "newton iteration limit must be >= 0");
    arch.validate();

    const int order = required_order(colloc);

    NewtonOutcome out;
    out.theta = theta0;
    out.beta = beta0.value_or(Vector::Zero(arch.last_hidden()));
    require(out.beta.size() == arch.last_hidden(), "beta0 has wrong length");

    Vector rhs(static_cast<Index>(colloc.rows.size()));
    for (std::size_t i = 0; i < colloc.rows.size(); ++i)
        rhs[static_cast<Index>(i)] = colloc.rows[i].rhs;
    const double scale = std::max(1.0, rms(rhs));

    auto states = network_states(arch, out.theta, out.beta, colloc.points, problem.box, order);

    for (int k = 0;; ++k) {
        const Vector r = nonlinear_residual(problem, colloc, states);
        out.report.residual_rms.push_back(rms(r));
        if (out.report.residual_rms.back() <= newton.tolerance * scale) {
            out.report.converged = true;
            break;
        }
        if (k >= newton.max_iterations) break;

        const auto rows = linearize(problem, colloc, states);
        VarProProblem inner(arch, problem.box, colloc.points, rows);
        const VarProResult vr = varpro_solve(inner, out.theta, perturb, nlsq_config);
        out.theta = vr.theta;
        out.beta = vr.beta;
        out.final_cost = vr.cost;
        out.report.gn_iterations += vr.gn_iterations;
        out.report.subiterations += vr.subiterations_used;
        ++out.report.iterations;

        auto next = network_states(arch, out.theta, out.beta, colloc.points, problem.box, order);
        Vector du(colloc.n_points);
        Vector u_new(colloc.n_points);
        for (Index p = 0; p < colloc.n_points; ++p) {
            du[p] = next[static_cast<std::size_t>(p)].u - states[static_cast<std::size_t>(p)].u;
            u_new[p] = next[static_cast<std::size_t>(p)].u;
        }
        out.report.increment_rms.push_back(rms(du));
        states = std::move(next);
        if (out.report.increment_rms.back() <= newton.tolerance * std::max(1.0, rms(u_new))) {
            out.report.converged = true;
            break;
        }
    }

    return out;
}

}  // namespace varpro
