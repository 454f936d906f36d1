#pragma once

#include "varpro/row_spec.hpp"
#include "varpro/types.hpp"

#include <array>
#include <functional>

namespace varpro {

/// Field value and derivatives at one collocation point, in physical
/// coordinates. Entries beyond the problem dimension / evaluation order
/// are zero.
struct PointState {
    double u = 0.0;
    std::array<double, 3> du{};   // first derivatives
    std::array<double, 6> d2u{};  // second derivatives, sym_index order

    /// Applies a linear functional to this state.
    double apply(const DiffCoeffs& c) const {
        double acc = c.value * u;
        for (std::size_t k = 0; k < du.size(); ++k) acc += c.first[k] * du[k];
        for (std::size_t s = 0; s < d2u.size(); ++s) acc += c.second[s] * d2u[s];
        return acc;
    }
};

/// Nonlinear contributions F(u) in the domain and G(u) on the boundary.
///
/// F evaluates the nonlinear term from the field state (value and first
/// derivatives); F' yields the coefficients of its linearization at a state w,
/// i.e. the row contribution F'(w) applied to the basis functions. For
/// F(u) = u du/dx this is { value: dw/dx, first[x]: w }. G and G' play the
/// same role for boundary rows and may be absent (zero).
struct NonlinearTerms {
    std::function<double(const PointState&)> f;
    std::function<DiffCoeffs(const PointState&)> f_prime;
    std::function<double(const PointState&)> g;          // may be null (== 0)
    std::function<DiffCoeffs(const PointState&)> g_prime;  // may be null (== 0)
};

}  // namespace varpro
