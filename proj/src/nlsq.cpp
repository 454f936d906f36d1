#include "varpro/nlsq.hpp"

#include "varpro/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace varpro {

namespace {

// Thin SVD of J through a QR preconditioner: factoring the (much smaller)
// triangular factor is considerably cheaper than a direct SVD of J at the
// shapes this solver sees. Tall J: J = QR, R = Ur S Vr^T. Wide J: J^T = QR,
// R^T = U S W^T and the right singular vectors are Q W (kept implicit).
class TrsFactorization {
public:
    void compute(const Matrix& j) {
        m_ = j.rows();
        n_ = j.cols();
        tall_ = m_ >= n_;
        const Index k = std::min(m_, n_);
        qr_.compute(tall_ ? j : Matrix(j.transpose()));
        const Matrix r = qr_.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Matrix> svd(tall_ ? r : Matrix(r.transpose()),
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
        u_small_ = svd.matrixU();
        v_small_ = svd.matrixV();
        sigma_ = svd.singularValues();
        const double tol = default_rank_cutoff(m_, n_) * (sigma_.size() > 0 ? sigma_[0] : 0.0);
        rank_ = 0;
        for (Index i = 0; i < sigma_.size(); ++i)
            if (sigma_[i] > tol) ++rank_;
    }

    const Vector& sigma() const { return sigma_; }
    Index rank() const { return rank_; }

    // c = U^T r.
    Vector ut(const Vector& r) const {
        if (tall_) {
            Vector qtr = qr_.householderQ().transpose() * r;
            return u_small_.transpose() * qtr.head(n_);
        }
        return u_small_.transpose() * r;
    }

    // s = V coeff.
    Vector map_step(const Vector& coeff) const {
        if (tall_) return v_small_ * coeff;
        Vector padded = Vector::Zero(n_);
        padded.head(m_) = v_small_ * coeff;
        return qr_.householderQ() * padded;
    }

private:
    Eigen::HouseholderQR<Matrix> qr_;
    Matrix u_small_, v_small_;
    Vector sigma_;
    Index rank_ = 0;
    Index m_ = 0, n_ = 0;
    bool tall_ = true;
};

// Solves min ||J s + r|| s.t. ||s|| <= radius in the singular basis:
// step coefficients -sigma_i c_i / (sigma_i^2 + lambda) with lambda = 0 when
// the minimum-norm Gauss-Newton step already fits.
Vector step_from_factorization(const TrsFactorization& fact, const Vector& c, double radius) {
    const Vector& sigma = fact.sigma();
    Vector coeff = Vector::Zero(sigma.size());
    for (Index i = 0; i < fact.rank(); ++i) coeff[i] = -c[i] / sigma[i];
    if (coeff.norm() <= radius) return fact.map_step(coeff);

    auto norm_sq = [&](double lambda) {
        double acc = 0.0;
        for (Index i = 0; i < sigma.size(); ++i) {
            const double cc = sigma[i] * c[i] / (sigma[i] * sigma[i] + lambda);
            acc += cc * cc;
        }
        return acc;
    };

    // Safeguarded Newton iteration on 1/radius - 1/||s(lambda)||.
    double lo = 0.0;
    double hi = sigma[0] * c.norm() / radius;  // ||s(hi)|| <= radius
    double lambda = std::max(1e-3 * hi, std::numeric_limits<double>::min());
    for (int it = 0; it < 100; ++it) {
        const double ns2 = norm_sq(lambda);
        const double ns = std::sqrt(ns2);
        if (std::abs(ns - radius) <= 1e-10 * radius) break;
        if (ns > radius)
            lo = lambda;
        else
            hi = lambda;
        double dns2 = 0.0;
        for (Index i = 0; i < sigma.size(); ++i) {
            const double den = sigma[i] * sigma[i] + lambda;
            const double cc = sigma[i] * c[i];
            dns2 -= 2.0 * cc * cc / (den * den * den);
        }
        const double phi = 1.0 / radius - 1.0 / ns;
        const double dphi = -0.5 * dns2 / (ns2 * ns);
        double next = lambda - phi / dphi;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        lambda = next;
    }
    for (Index i = 0; i < sigma.size(); ++i)
        coeff[i] = -sigma[i] * c[i] / (sigma[i] * sigma[i] + lambda);
    return fact.map_step(coeff);
}

}  // namespace

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Ftol: return "ftol";
        case Termination::Xtol: return "xtol";
        case Termination::Gtol: return "gtol";
        case Termination::MaxIter: return "max_iter";
    }
    return "?";
}

Vector trust_region_step(const Matrix& jacobian, const Vector& residual, double radius) {
    require(jacobian.rows() == residual.size(), "trust_region_step: inconsistent dimensions");
    require(radius > 0.0, "trust_region_step: radius must be positive");
    TrsFactorization fact;
    fact.compute(jacobian);
    return step_from_factorization(fact, fact.ut(residual), radius);
}

NlsqResult minimize(const ResidualFn& residual_fn, const JacobianFn& jacobian_fn, Vector theta0,
                    const NlsqConfig& config) {
    require(config.max_iterations >= 0, "max_iterations must be >= 0");
    require(config.ftol > 0 && config.ftol < 1, "ftol must be in (0, 1)");
    require(config.xtol > 0 && config.xtol < 1, "xtol must be in (0, 1)");
    require(config.gtol > 0 && config.gtol < 1, "gtol must be in (0, 1)");

    NlsqResult out;
    Vector theta = std::move(theta0);
    Vector r = residual_fn(theta);
    require(all_finite(r), "residual is non-finite at the start point");
    double cost = 0.5 * r.squaredNorm();
    out.cost_history.push_back(cost);

    if (config.max_iterations == 0) {
        out.theta = std::move(theta);
        out.cost = cost;
        out.termination = Termination::MaxIter;
        return out;
    }

    double radius = config.initial_trust_radius > 0.0
                        ? config.initial_trust_radius
                        : (theta.norm() > 0.0 ? theta.norm() : 1.0);
    Termination term = Termination::MaxIter;
    int iter = 0;
    bool done = false;

    TrsFactorization fact;
    while (iter < config.max_iterations && !done) {
        Matrix j = jacobian_fn(theta);
        require(j.rows() == r.size(), "jacobian row count does not match residual length");
        require(j.cols() == theta.size(), "jacobian column count does not match theta length");
        ++iter;

        const double g_inf = (j.transpose() * r).lpNorm<Eigen::Infinity>();
        if (g_inf <= config.gtol * std::max(1.0, cost)) {
            term = Termination::Gtol;
            break;
        }

        fact.compute(j);
        const Vector ut_r = fact.ut(r);

        // Try steps at shrinking radii until one strictly reduces the cost.
        for (int attempt = 0; attempt < 64; ++attempt) {
            const Vector s = step_from_factorization(fact, ut_r, radius);
            const Vector trial = theta + s;
            const Vector r_trial = residual_fn(trial);
            const double xtol_bound = config.xtol * (config.xtol + theta.norm());

            if (!all_finite(r_trial)) {
                radius *= 0.25;
                if (radius < xtol_bound)
                    throw numeric_error("trust radius underflow while recovering from a "
                                        "non-finite residual");
                continue;
            }

            const double cost_trial = 0.5 * r_trial.squaredNorm();
            const double predicted = cost - 0.5 * (j * s + r).squaredNorm();
            const double rho = predicted > 0.0 ? (cost - cost_trial) / predicted : -1.0;
            const double step_norm = s.norm();

            if (rho < 0.25)
                radius *= 0.25;
            else if (rho > 0.75 && step_norm >= 0.99 * radius)
                radius *= 2.0;

            if (cost_trial < cost) {
                const double reduction = cost - cost_trial;
                theta = trial;
                r = r_trial;
                cost = cost_trial;
                out.cost_history.push_back(cost);
                if (reduction <= config.ftol * out.cost_history[out.cost_history.size() - 2]) {
                    term = Termination::Ftol;
                    done = true;
                } else if (step_norm <= config.xtol * (config.xtol + theta.norm())) {
                    term = Termination::Xtol;
                    done = true;
                }
                break;
            }

            if (radius < xtol_bound) {
                term = Termination::Xtol;
                done = true;
                break;
            }
        }
    }

    out.theta = std::move(theta);
    out.cost = cost;
    out.iterations = iter;
    out.termination = term;
    return out;
}

}  // namespace varpro
