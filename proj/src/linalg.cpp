#include "varpro/linalg.hpp"

#include <cmath>
#include <limits>

namespace varpro {

double default_rank_cutoff(Index rows, Index cols) {
    return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols));
}

void LstsqSvd::compute(const Matrix& a, double rank_cutoff) {
    require(a.rows() >= 1 && a.cols() >= 1, "lstsq: matrix must be non-empty");
    require(all_finite(a), "lstsq: non-finite entries in matrix");
    if (rank_cutoff < 0.0) rank_cutoff = default_rank_cutoff(a.rows(), a.cols());

    rows_ = a.rows();
    cols_ = a.cols();
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    sigma_ = svd.singularValues();

    const double smax = sigma_.size() > 0 ? sigma_[0] : 0.0;
    const double tol = rank_cutoff * smax;
    rank_ = 0;
    for (Index i = 0; i < sigma_.size(); ++i) {
        if (sigma_[i] > tol && sigma_[i] > 0.0) ++rank_;
    }
}

Matrix LstsqSvd::solve(const Matrix& b) const {
    require(rows_ > 0, "lstsq: factorization not computed");
    require(b.rows() == rows_, "lstsq: right-hand side has mismatched row count");
    require(all_finite(b), "lstsq: non-finite entries in right-hand side");

    // x = V_r * diag(1/sigma_r) * U_r^T * b, restricted to the retained rank.
    Matrix ut_b = u_.leftCols(rank_).transpose() * b;
    for (Index i = 0; i < rank_; ++i) ut_b.row(i) /= sigma_[i];
    return v_.leftCols(rank_) * ut_b;
}

LsqSolution lstsq_min_norm(const Matrix& a, const Matrix& b, double rank_cutoff) {
    LstsqSvd fact;
    fact.compute(a, rank_cutoff);
    LsqSolution out;
    out.solution = fact.solve(b);
    out.effective_rank = fact.rank();
    out.residual_norm = (a * out.solution - b).norm();
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions do not match");
    return a * b;
}

}  // namespace varpro
