#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace varpro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
/// Writable view of one matrix row (rows of column-major storage are strided).
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// Contract violation: bad dimensions, invalid configuration, malformed input.
struct contract_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numeric failure during a solve (non-finite values that could not be recovered).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& a) {
    return a.allFinite();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

}  // namespace varpro
