#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <vector>

namespace lsm {

/// Dense row-major matrix of doubles; the storage type for every parameter tensor.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Flat list of parameter tensors (weights and 1xN bias rows).
using ParamList = std::vector<Matrix>;

template <std::floating_point Scalar>
Scalar sigmoid(Scalar z) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
}

template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& z) {
    return z.unaryExpr([](typename Derived::Scalar v) { return sigmoid(v); });
}

/// x * W^T + 1 b. Row i of x is one sample, W is (out x in), b is 1 x out.
/// The transposed weight is materialized first so every caller (plain or
/// taped) evaluates the same product kernel and gets identical bits.
inline Matrix affine(const Matrix& x, const Matrix& weight, const Matrix& bias) {
    const Matrix weight_t = weight.transpose();
    Matrix z = x * weight_t;
    z += bias.replicate(z.rows(), 1);
    return z;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool all_finite(const ParamList& params) {
    for (const auto& p : params) {
        if (!p.allFinite()) return false;
    }
    return true;
}

inline bool same_shapes(const ParamList& a, const ParamList& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
    }
    return true;
}

inline ParamList zeros_like(const ParamList& params) {
    ParamList out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(Matrix::Zero(p.rows(), p.cols()));
    return out;
}

}  // namespace lsm
