#include "varpro/varpro.hpp"

#include "varpro/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varpro {

VarProProblem::VarProProblem(Architecture arch, DomainBox box, Matrix points,
                             std::vector<LinearRow> rows)
    : arch_(std::move(arch)), box_(std::move(box)), points_(std::move(points)),
      rows_(std::move(rows)) {
    arch_.validate();
    box_.validate();
    require(!rows_.empty(), "collocation system has no rows");
    rhs_.resize(static_cast<Index>(rows_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& row = rows_[i];
        require(row.point_a >= 0 && row.point_a < points_.rows(), "row references missing point");
        require(row.point_b < points_.rows(), "row references missing pair point");
        order_ = std::max(order_, row.coeffs.max_order());
        rhs_[static_cast<Index>(i)] = row.rhs;
    }
    require(order_ <= 2, "rows request derivative order beyond 2");
}

const AssembledSystem& VarProProblem::assemble(const Vector& theta) {
    require(theta.size() == theta_size(), "theta has wrong length");
    if (cached_ && sys_.theta.size() == theta.size() && sys_.theta == theta) return sys_;

    trace_ = forward_trace(arch_, theta, points_, box_, order_);

    const Index n_rows = residual_size();
    const Index m = output_width();
    sys_.h = Matrix::Zero(n_rows, m);
    for (Index i = 0; i < n_rows; ++i) {
        const auto& row = rows_[static_cast<std::size_t>(i)];
        accumulate_row(sys_.h.row(i), trace_, row.point_a, row.coeffs, 1.0);
        if (row.is_pair()) accumulate_row(sys_.h.row(i), trace_, row.point_b, row.coeffs, -1.0);
    }

    sys_.s = rhs_;
    sys_.fact.compute(sys_.h);
    sys_.beta_ls = sys_.fact.solve(sys_.s);
    sys_.theta = theta;
    cached_ = true;
    ++assembly_count_;
    return sys_;
}

Vector VarProProblem::residual(const Vector& theta) {
    const AssembledSystem& sys = assemble(theta);
    return sys.h * sys.beta_ls - sys.s;
}

Matrix VarProProblem::jacobian(const Vector& theta) {
    const AssembledSystem& sys = assemble(theta);
    const Matrix j0 = param_jacobian_rows(trace_, sys.beta_ls, rows_);
    const Matrix k = sys.fact.solve(j0);
    Matrix j = j0;
    j.noalias() -= sys.h * k;
    return j;
}

VarProResult varpro_solve(VarProProblem& problem, const Vector& theta0,
                          const PerturbConfig& perturb, const NlsqConfig& nlsq_config) {
    require(perturb.delta >= 0.0, "perturbation magnitude must be >= 0");
    require(perturb.preference_p >= 0.0 && perturb.preference_p <= 1.0,
            "preference probability must be in [0, 1]");
    require(perturb.max_subiterations >= 0, "max_subiterations must be >= 0");
    require(perturb.cost_threshold >= 0.0, "cost threshold must be >= 0");

    const auto residual_fn = [&](const Vector& t) { return problem.residual(t); };
    const auto jacobian_fn = [&](const Vector& t) { return problem.jacobian(t); };

    VarProResult out;
    NlsqResult best = minimize(residual_fn, jacobian_fn, theta0, nlsq_config);
    out.gn_iterations = best.iterations;
    out.start_costs.push_back(best.cost);

    if (best.cost > perturb.cost_threshold && perturb.max_subiterations > 0) {
        UniformStream rng(perturb.seed, stream_id::perturbation);
        std::optional<double> delta_pref;
        for (int i = 0; i < perturb.max_subiterations; ++i) {
            ++out.subiterations_used;
            const double xi = rng.next();
            double bound = perturb.delta;
            if (delta_pref && xi < perturb.preference_p)
                bound = std::min(1.1 * (*delta_pref), perturb.delta);
            const double delta1 = rng.next() * bound;
            Vector start = best.theta + rng.draw(problem.theta_size(), -delta1, delta1);

            bool failed = false;
            NlsqResult attempt;
            try {
                attempt = minimize(residual_fn, jacobian_fn, std::move(start), nlsq_config);
            } catch (const numeric_error&) {
                failed = true;  // keep the best iterate and try another restart
            }
            if (!failed) {
                out.gn_iterations += attempt.iterations;
                out.start_costs.push_back(attempt.cost);
                if (attempt.cost < best.cost) {
                    best = std::move(attempt);
                    delta_pref = delta1;
                }
            } else {
                out.start_costs.push_back(std::numeric_limits<double>::infinity());
            }
            if (best.cost <= perturb.cost_threshold) break;
        }
    }

    const AssembledSystem& sys = problem.assemble(best.theta);
    out.theta = best.theta;
    out.beta = sys.beta_ls;
    out.cost = best.cost;
    out.termination = best.termination;
    return out;
}

}  // namespace varpro
