#pragma once

#include "varpro/activation.hpp"
#include "varpro/row_spec.hpp"
#include "varpro/types.hpp"

#include <span>
#include <vector>

namespace varpro {

/// Feed-forward architecture [M0, M1, ..., ML] with ML == 1 and a linear,
/// bias-free output layer. All hidden nodes share one activation.
struct Architecture {
    std::vector<Index> widths;
    Activation activation = Activation::Cos;

    Index input_dim() const { return widths.front(); }
    Index output_width() const { return widths.back(); }
    /// Number of nodes in the last hidden layer (= number of output weights).
    Index last_hidden() const { return widths[widths.size() - 2]; }
    Index hidden_layer_count() const { return static_cast<Index>(widths.size()) - 2; }

    /// Total hidden-parameter count: sum over hidden layers of M_i * (M_{i-1} + 1).
    Index hidden_param_count() const;

    void validate() const;
};

/// Axis-aligned box; inputs are affinely normalized from [a_i, b_i] to [-1, 1]
/// per dimension before entering the first hidden layer. The last coordinate
/// may play the role of time.
struct DomainBox {
    std::vector<std::array<double, 2>> intervals;

    Index dim() const { return static_cast<Index>(intervals.size()); }
    double lo(Index k) const { return intervals[k][0]; }
    double hi(Index k) const { return intervals[k][1]; }
    /// Chain-rule factor d(normalized)/d(physical) = 2 / (b - a).
    double scale(Index k) const { return 2.0 / (intervals[k][1] - intervals[k][0]); }
    double normalize(Index k, double x) const {
        return 2.0 * (x - intervals[k][0]) / (intervals[k][1] - intervals[k][0]) - 1.0;
    }
    void validate() const;
};

/// Last-hidden-layer outputs on a point set, with spatial derivative blocks
/// (in physical coordinates) up to the requested order.
struct HiddenEval {
    Matrix psi;                 // N x M
    std::vector<Matrix> grad;   // order >= 1: d blocks, N x M
    std::vector<Matrix> hess;   // order == 2: d*(d+1)/2 blocks, N x M
    int order = 0;
    Index dim = 0;

    const Matrix& d1(Index k) const { return grad[k]; }
    const Matrix& d2(Index k, Index l) const { return hess[sym_index(k, l, dim)]; }
};

/// Per-theta forward evaluation state over a fixed point set. Holds every
/// layer's value/gradient/Hessian blocks plus the activation-derivative
/// arrays needed to backpropagate row functionals to the hidden parameters.
/// Reusable: compute once per theta, then assemble rows and parameter
/// Jacobians from it.
struct ForwardTrace {
    struct Layer {
        Matrix w;                      // weight matrix, M_l x M_{l-1}
        Matrix z_d1, z_d2, z_d3;       // activation derivatives at pre-activations, N x M_l
        std::vector<Matrix> zg;        // W * (input gradient blocks), per dimension
        std::vector<Matrix> zh;        // W * (input Hessian blocks), per sym pair
        Matrix value;                  // layer outputs, N x M_l
        std::vector<Matrix> grad;      // output gradient blocks
        std::vector<Matrix> hess;      // output Hessian blocks
    };
    std::vector<Layer> layers;  // one per hidden layer
    Matrix normalized;          // N x d normalized inputs
    Architecture arch;
    DomainBox box;
    int order = 0;

    const Layer& last() const { return layers.back(); }
};

ForwardTrace forward_trace(const Architecture& arch, const Vector& theta, const Matrix& points,
                           const DomainBox& box, int order);

/// Hidden-layer outputs and spatial derivatives up to `order` (0, 1 or 2) at
/// the given points (rows of `points`, one coordinate per column).
HiddenEval hidden_eval(const Architecture& arch, const Vector& theta, const Matrix& points,
                       const DomainBox& box, int order);

/// Network output u = Psi * beta at the given points.
Vector network_output(const Architecture& arch, const Vector& theta, const Vector& beta,
                      const Matrix& points, const DomainBox& box);

/// Derivative of the row functionals with respect to the hidden parameters,
/// with the output weights held constant:
///   J0[i, :] = d/d(theta) [ coeffs_i applied to u(theta, x_i) ],  u = Phi(theta, x) * beta.
/// Row order follows `rows`; periodic pairs contribute the difference of the
/// two per-point gradients. Uses `rows[i].point_a/point_b` as indices into the
/// trace's point set and ignores rhs/role.
Matrix param_jacobian_rows(const ForwardTrace& trace, const Vector& beta_frozen,
                           std::span<const LinearRow> rows);

/// Convenience overload that computes the forward trace internally.
Matrix param_jacobian_rows(const Architecture& arch, const Vector& theta, const Vector& beta_frozen,
                           const Matrix& points, const DomainBox& box,
                           std::span<const LinearRow> rows);

/// Applies a row functional to the hidden-layer blocks of one point and
/// accumulates `sign` times the resulting row into `out` (length M).
void accumulate_row(RowRef out, const HiddenEval& he, Index point,
                    const DiffCoeffs& c, double sign);
void accumulate_row(RowRef out, const ForwardTrace& trace, Index point,
                    const DiffCoeffs& c, double sign);

}  // namespace varpro
