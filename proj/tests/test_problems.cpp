#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "varpro/newton.hpp"
#include "varpro/rng.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace varpro;

namespace {

// Nonlinear PDE residual of a closed-form field, with every derivative taken
// by fourth-order finite differences of the field itself.
double pde_residual_fd(const BvpSpec& problem, const Vector& x, double h) {
    const auto& u = problem.exact;
    const Index d = problem.box.dim();
    PointState state;
    state.u = u(x);
    auto along = [&](Index k) {
        return [&, k](double s) {
            Vector y = x;
            y[k] = s;
            return u(y);
        };
    };
    for (Index k = 0; k < d; ++k) {
        state.du[k] = oracles::d1_order4(along(k), x[k], h);
        state.d2u[sym_index(k, k, d)] = oracles::d2_order4(along(k), x[k], h);
    }
    if (d == 2) {
        auto f2 = [&](double a, double b) {
            Vector y(2);
            y << a, b;
            return u(y);
        };
        state.d2u[sym_index(0, 1, 2)] = oracles::dxy(f2, x[0], x[1], h);
    }
    double lhs = state.apply(problem.lhs(x));
    if (problem.nonlinear && problem.nonlinear->f) lhs += problem.nonlinear->f(state);
    return lhs - problem.source(x);
}

}  // namespace

TEST_CASE("catalog spot values") {
    const BvpSpec advection = catalog_entry("advection1d");
    Vector x(2);
    x << 2.0, 0.0;
    CHECK(advection.exact(x) == doctest::Approx(0.0));  // sin(0)

    const BvpSpec poisson = catalog_entry("poisson2d");
    std::mt19937 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Vector p = oracles::random_vector(rng, 2, 0.0, 1.0);
        Vector q(2);
        q << p[1], p[0];
        CHECK(poisson.exact(p) == doctest::Approx(poisson.exact(q)).epsilon(1e-14));
    }

    CHECK_THROWS_AS(catalog_entry("nonexistent"), contract_error);
}

TEST_CASE("burgers source matches the finite-difference composition of the exact field") {
    const BvpSpec burgers = catalog_entry("burgers");
    const double nu = 0.05;
    std::mt19937 rng(17);
    auto u = burgers.exact;
    for (int i = 0; i < 25; ++i) {
        Vector x = oracles::random_vector(rng, 2, 0.05, 0.95);
        auto fx = [&](double s) {
            Vector y = x;
            y[0] = s;
            return u(y);
        };
        auto ft = [&](double s) {
            Vector y = x;
            y[1] = s;
            return u(y);
        };
        const double h = 2e-3;
        const double u_t = oracles::d1_order4(ft, x[1], h);
        const double u_x = oracles::d1_order4(fx, x[0], h);
        const double u_xx = oracles::d2_order4(fx, x[0], h);
        const double f_fd = u_t + u(x) * u_x - nu * u_xx;
        CHECK(burgers.source(x) ==
              doctest::Approx(f_fd).epsilon(1e-6).scale(1.0 + std::abs(f_fd)));
    }
}

TEST_CASE("manufactured sources are consistent for every catalog entry") {
    std::mt19937 rng(2025);
    for (const auto& name : catalog_names()) {
        const BvpSpec problem = catalog_entry(name);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            Vector x(problem.box.dim());
            for (Index k = 0; k < problem.box.dim(); ++k) {
                const double span = problem.box.hi(k) - problem.box.lo(k);
                x[k] = problem.box.lo(k) + span * (0.05 + 0.9 * oracles::random_vector(rng, 1)[0] * 0.5 + 0.45 * 0.0);
            }
            const double h = 1e-3 * (problem.box.hi(0) - problem.box.lo(0));
            const double res = pde_residual_fd(problem, x, h);
            worst = std::max(worst, std::abs(res) / (1.0 + std::abs(problem.source(x))));
        }
        INFO(name, " worst relative residual ", worst);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("boundary-condition data agrees with the exact field on each face") {
    std::mt19937 rng(7);
    for (const auto& name : catalog_names()) {
        const BvpSpec problem = catalog_entry(name);
        const CollocationSet colloc = build_collocation(problem, 6);
        const auto states = [&] {
            std::vector<PointState> s(static_cast<std::size_t>(colloc.n_points));
            return s;
        }();
        (void)states;
        for (const auto& row : colloc.rows) {
            if (row.role != RowRole::Boundary && row.role != RowRole::Initial) continue;
            if (row.coeffs.max_order() > 0) continue;  // velocity rows checked elsewhere
            const Vector x = colloc.points.row(row.point_a);
            CHECK(row.rhs == doctest::Approx(problem.exact(x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("collocation grid counts") {
    const BvpSpec poisson = catalog_entry("poisson2d");
    const CollocationSet c1 = build_collocation(poisson, 3);
    CHECK(c1.n_points == 9);
    // Corner points sit on two edges: 4 edges x 3 points = 12 boundary rows.
    CHECK(c1.n_boundary_rows == 12);
    CHECK(c1.rows.size() == 9 + 12);

    const BvpSpec advection = catalog_entry("advection1d");
    const CollocationSet c2 = build_collocation(advection, 3);
    CHECK(c2.n_points == 9);
    CHECK(c2.n_boundary_rows == 6);  // 3 periodic pairs + 3 initial rows
    int pairs = 0, initial = 0;
    for (const auto& row : c2.rows) {
        pairs += row.role == RowRole::PeriodicPair ? 1 : 0;
        initial += row.role == RowRole::Initial ? 1 : 0;
    }
    CHECK(pairs == 3);
    CHECK(initial == 3);

    const BvpSpec kg = catalog_entry("klein_gordon");
    const CollocationSet c3 = build_collocation(kg, 5);
    CHECK(c3.n_points == 25);
    CHECK(c3.n_boundary_rows == 4 * 5);  // two Dirichlet edges + u and u_t initial rows
    int value_rows = 0, velocity_rows = 0;
    for (const auto& row : c3.rows) {
        if (row.role != RowRole::Initial) continue;
        if (row.coeffs.max_order() == 0) ++value_rows;
        if (row.coeffs.first[1] == 1.0) ++velocity_rows;
        // Initial rows live on the initial-time face only.
        CHECK(colloc_point_time(c3, row.point_a) == doctest::Approx(0.0));
    }
    CHECK(value_rows == 5);
    CHECK(velocity_rows == 5);

    // PDE rows cover every collocation point, boundary points included.
    std::set<Index> pde_points;
    for (const auto& row : c3.rows)
        if (row.role == RowRole::Pde) pde_points.insert(row.point_a);
    CHECK(pde_points.size() == 25);
}

TEST_CASE("evaluate_errors") {
    // Toy problem whose exact field is itself a single hidden node.
    const Architecture arch{{2, 1, 1}, Activation::Gaussian};
    Vector theta(3);
    theta << 0.7, -0.4, 0.2;  // w1, w2, bias
    Vector beta(1);
    beta << 1.3;
    BvpSpec toy;
    toy.name = "toy";
    toy.box.intervals = {{0.0, 1.0}, {0.0, 1.0}};
    toy.lhs = [](const Vector&) { return DiffCoeffs{}; };
    toy.source = [](const Vector&) { return 0.0; };
    toy.exact = [&](const Vector& x) {
        const double z = 0.7 * toy.box.normalize(0, x[0]) - 0.4 * toy.box.normalize(1, x[1]) + 0.2;
        return 1.3 * std::exp(-z * z);
    };
    const ErrorReport self = evaluate_errors(arch, theta, beta, toy, 31);
    CHECK(self.max_error <= 1e-12);
    CHECK(self.rms_error <= self.max_error);

    // Zero output weights against the Poisson exact field: the max error is
    // the max of |u_exact| on the grid, computed here by a direct scan.
    const BvpSpec poisson = catalog_entry("poisson2d");
    const Architecture parch{{2, 4, 1}, Activation::Cos};
    const ErrorReport zero =
        evaluate_errors(parch, Vector::Zero(parch.hidden_param_count()), Vector::Zero(4),
                        poisson, 101);
    double scan = 0.0;
    for (Index i = 0; i < 101; ++i) {
        for (Index j = 0; j < 101; ++j) {
            Vector x(2);
            x << i / 100.0, j / 100.0;
            scan = std::max(scan, std::abs(poisson.exact(x)));
        }
    }
    CHECK(zero.max_error == doctest::Approx(scan).epsilon(1e-12));
    CHECK(zero.rms_error <= zero.max_error);
}

TEST_CASE("one time block is identical to the direct solve") {
    const BvpSpec advection = catalog_entry("advection1d");
    const Architecture arch{{2, 30, 1}, Activation::Gaussian};

    UniformStream init_direct(9, stream_id::theta_init);
    const Vector theta0 = init_direct.draw(arch.hidden_param_count(), -1.0, 1.0);
    NlsqConfig nlsq;
    nlsq.max_iterations = 25;
    PerturbConfig perturb;
    perturb.delta = 0.5;
    perturb.max_subiterations = 1;
    perturb.seed = 9;

    UniformStream init_march(9, stream_id::theta_init);
    const BlockSolver solver = [&](const BvpSpec& block, const CollocationSet& colloc,
                                   int) -> BlockOutcome {
        const Vector t0 = init_march.draw(arch.hidden_param_count(), -1.0, 1.0);
        VarProProblem prob(arch, block.box, colloc.points, colloc.rows);
        const VarProResult vr = varpro_solve(prob, t0, perturb, nlsq);
        BlockOutcome out;
        out.theta = vr.theta;
        out.beta = vr.beta;
        out.cost = vr.cost;
        out.final_residual = prob.residual(vr.theta);
        return out;
    };
    const MarchResult march = block_march(advection, arch, 8, 41, 1, solver);
    REQUIRE(march.blocks.size() == 1);

    const CollocationSet colloc = build_collocation(advection, 8);
    VarProProblem direct(arch, advection.box, colloc.points, colloc.rows);
    const VarProResult vr = varpro_solve(direct, theta0, perturb, nlsq);
    CHECK(march.blocks[0].outcome.theta == vr.theta);
    CHECK(march.blocks[0].outcome.beta == vr.beta);
    const ErrorReport err = evaluate_errors(arch, vr.theta, vr.beta, advection, 41);
    CHECK(march.overall.max_error == err.max_error);
    CHECK(march.overall.rms_error == doctest::Approx(err.rms_error).epsilon(1e-14));
}

TEST_CASE("block interfaces hand off the terminal state" * doctest::timeout(600)) {
    BvpSpec advection = catalog_entry("advection1d");
    advection.box.intervals[1] = {0.0, 2.0};  // two blocks of unit depth
    const Architecture arch{{2, 60, 1}, Activation::Gaussian};
    const Index q1 = 12;

    UniformStream init(10, stream_id::theta_init);
    NlsqConfig nlsq;
    nlsq.max_iterations = 60;
    PerturbConfig perturb;
    perturb.delta = 1.0;
    perturb.max_subiterations = 2;
    perturb.seed = 10;

    const BlockSolver solver = [&](const BvpSpec& block, const CollocationSet& colloc,
                                   int) -> BlockOutcome {
        const Vector t0 = init.draw(arch.hidden_param_count(), -1.0, 1.0);
        VarProProblem prob(arch, block.box, colloc.points, colloc.rows);
        const VarProResult vr = varpro_solve(prob, t0, perturb, nlsq);
        BlockOutcome out;
        out.theta = vr.theta;
        out.beta = vr.beta;
        out.cost = vr.cost;
        out.final_residual = prob.residual(vr.theta);
        return out;
    };
    const MarchResult march = block_march(advection, arch, q1, 41, 2, solver);
    REQUIRE(march.completed);
    REQUIRE(march.blocks.size() == 2);

    // |u_1(x, t_int) - u_0(x, t_int)| at the initial collocation points of
    // block 1 is bounded by block 1's initial-row residual magnitude.
    const auto& b0 = march.blocks[0];
    const auto& b1 = march.blocks[1];
    const double t_int = b0.box.intervals[1][1];
    BvpSpec block1 = advection;
    block1.box = b1.box;
    const CollocationSet colloc1 = build_collocation(block1, q1);

    double max_initial_residual = 0.0;
    for (std::size_t i = 0; i < colloc1.rows.size(); ++i) {
        if (colloc1.rows[i].role == RowRole::Initial)
            max_initial_residual = std::max(
                max_initial_residual, std::abs(b1.outcome.final_residual[static_cast<Index>(i)]));
    }
    for (const auto& row : colloc1.rows) {
        if (row.role != RowRole::Initial) continue;
        Matrix pt(1, 2);
        pt.row(0) = colloc1.points.row(row.point_a);
        pt(0, 1) = t_int;
        const double u0 = network_output(arch, b0.outcome.theta, b0.outcome.beta, pt, b0.box)[0];
        const double u1 = network_output(arch, b1.outcome.theta, b1.outcome.beta, pt, b1.box)[0];
        CHECK(std::abs(u1 - u0) <= max_initial_residual + 1e-12);
    }
}
