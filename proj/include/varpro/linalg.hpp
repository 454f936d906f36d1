#pragma once

#include "varpro/types.hpp"

#include <Eigen/SVD>

namespace varpro {

/// Minimum-norm least-squares solution (Moore-Penrose semantics).
/// One column of `solution` per right-hand-side column.
struct LsqSolution {
    Matrix solution;
    Index effective_rank = 0;
    /// Frobenius norm of A*X - B over all right-hand sides.
    double residual_norm = 0.0;
};

/// Conventional dense-LSQ cutoff: eps * max(rows, cols), relative to the
/// largest singular value.
double default_rank_cutoff(Index rows, Index cols);

/// SVD factorization of a matrix, reusable for several minimum-norm solves.
///
/// Singular values sigma_i <= cutoff * sigma_max are treated as zero.
/// The pseudo-inverse is never formed; solves apply V * diag(1/sigma) * U^T.
class LstsqSvd {
public:
    LstsqSvd() = default;

    /// rank_cutoff < 0 selects default_rank_cutoff(rows, cols).
    void compute(const Matrix& a, double rank_cutoff = -1.0);

    /// Minimum-norm least-squares solution for each column of b.
    Matrix solve(const Matrix& b) const;

    Index rank() const { return rank_; }
    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    const Vector& singular_values() const { return sigma_; }
    const Matrix& matrix_u() const { return u_; }
    const Matrix& matrix_v() const { return v_; }

private:
    Matrix u_, v_;
    Vector sigma_;
    Index rank_ = 0;
    Index rows_ = 0, cols_ = 0;
};

/// One-shot minimum-norm least squares: factors `a` and solves for every
/// column of `b`. Throws contract_error on dimension mismatch or
/// non-finite input.
LsqSolution lstsq_min_norm(const Matrix& a, const Matrix& b, double rank_cutoff = -1.0);

/// Dimension-checked matrix product.
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace varpro
