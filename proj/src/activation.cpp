#include "varpro/activation.hpp"

#include <cmath>

namespace varpro {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)

// Normal CDF and PDF; gelu(x) = x * cdf(x).
inline double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Cos: return "cos";
        case Activation::Sin: return "sin";
        case Activation::Gaussian: return "gaussian";
        case Activation::Gelu: return "gelu";
    }
    return "?";
}

Activation parse_activation(const std::string& name) {
    if (name == "cos") return Activation::Cos;
    if (name == "sin") return Activation::Sin;
    if (name == "gaussian") return Activation::Gaussian;
    if (name == "gelu") return Activation::Gelu;
    throw contract_error("unknown activation '" + name + "' (expected cos, sin, gaussian, gelu)");
}

ActivationValue activation_eval(Activation kind, double x) {
    switch (kind) {
        case Activation::Cos: {
            const double c = std::cos(x), s = std::sin(x);
            return {c, -s, -c};
        }
        case Activation::Sin: {
            const double c = std::cos(x), s = std::sin(x);
            return {s, c, -s};
        }
        case Activation::Gaussian: {
            const double e = std::exp(-x * x);
            return {e, -2.0 * x * e, (4.0 * x * x - 2.0) * e};
        }
        case Activation::Gelu: {
            const double cdf = norm_cdf(x), pdf = norm_pdf(x);
            return {x * cdf, cdf + x * pdf, (2.0 - x * x) * pdf};
        }
    }
    throw contract_error("activation_eval: invalid kind");
}

void activation_arrays(Activation kind, const Matrix& z, Matrix& value, Matrix* d1, Matrix* d2,
                       Matrix* d3) {
    const auto za = z.array();
    switch (kind) {
        case Activation::Cos: {
            Matrix c = za.cos().matrix();
            Matrix s = za.sin().matrix();
            value = c;
            if (d1) *d1 = -s;
            if (d2) *d2 = -c;
            if (d3) *d3 = s;
            return;
        }
        case Activation::Sin: {
            Matrix c = za.cos().matrix();
            Matrix s = za.sin().matrix();
            value = s;
            if (d1) *d1 = c;
            if (d2) *d2 = -s;
            if (d3) *d3 = -c;
            return;
        }
        case Activation::Gaussian: {
            Matrix e = (-za.square()).exp().matrix();
            value = e;
            if (d1) *d1 = (-2.0 * za * e.array()).matrix();
            if (d2) *d2 = ((4.0 * za.square() - 2.0) * e.array()).matrix();
            if (d3) *d3 = ((12.0 * za - 8.0 * za.cube()) * e.array()).matrix();
            return;
        }
        case Activation::Gelu: {
            Eigen::ArrayXXd cdf = za.unaryExpr([](double x) { return norm_cdf(x); });
            Eigen::ArrayXXd pdf = kInvSqrt2Pi * (-0.5 * za.square()).exp();
            value = (za * cdf).matrix();
            if (d1) *d1 = (cdf + za * pdf).matrix();
            if (d2) *d2 = ((2.0 - za.square()) * pdf).matrix();
            if (d3) *d3 = ((za.cube() - 4.0 * za) * pdf).matrix();
            return;
        }
    }
    throw contract_error("activation_arrays: invalid kind");
}

}  // namespace varpro
