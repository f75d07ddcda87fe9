// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>

#include "starmem/errors.hpp"

namespace starmem {

/// Row-major dense matrix; rows are tokens, columns are channels.
template <typename Scalar>
using TokenMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class PoolingMode {
    Strict,    // target side must divide source side
    Adaptive,  // uneven bins [floor(i*S/T), ceil((i+1)*S/T))
};

/// One frame's side x side x dim feature grid.
///
/// Cells are stored as rows of a (side*side) x dim matrix in row-major
/// (row, col) cell order, so the flat layout is (row, col, channel).
/// Construction rejects non-finite values and mismatched shapes.
template <typename Scalar>
class FeatureMap {
public:
    using Matrix = TokenMatrix<Scalar>;

    FeatureMap() = default;

    FeatureMap(std::uint64_t frame_index, double timestamp_s, int side, Matrix values)
        : frame_index_(frame_index),
          timestamp_s_(timestamp_s),
          side_(side),
          values_(std::move(values)) {
        STARMEM_EXPECT(side > 0, "feature map side must be positive");
        STARMEM_EXPECT(values_.cols() > 0, "feature map dim must be positive");
        STARMEM_EXPECT(values_.rows() == static_cast<Eigen::Index>(side) * side,
                       "feature map rows must equal side^2");
        STARMEM_EXPECT(timestamp_s >= 0.0, "timestamp must be non-negative");
        STARMEM_EXPECT(values_.allFinite(), "feature map contains non-finite values");
    }

    static FeatureMap constant(std::uint64_t frame_index, double timestamp_s, int side, int dim,
                               Scalar value) {
        return FeatureMap(frame_index, timestamp_s, side,
                          Matrix::Constant(static_cast<Eigen::Index>(side) * side, dim, value));
    }

    std::uint64_t frame_index() const { return frame_index_; }
    double timestamp_s() const { return timestamp_s_; }
    int side() const { return side_; }
    int dim() const { return static_cast<int>(values_.cols()); }
    Eigen::Index cells() const { return values_.rows(); }
    Eigen::Index size() const { return values_.size(); }

    const Matrix& values() const { return values_; }

    auto cell(int row, int col) const { return values_.row(static_cast<Eigen::Index>(row) * side_ + col); }

    bool operator==(const FeatureMap& other) const {
        return frame_index_ == other.frame_index_ && timestamp_s_ == other.timestamp_s_ &&
               side_ == other.side_ && values_.rows() == other.values_.rows() &&
               values_.cols() == other.values_.cols() && values_ == other.values_;
    }

private:
    std::uint64_t frame_index_ = 0;
    double timestamp_s_ = 0.0;
    int side_ = 0;
    Matrix values_;
};

template <typename Scalar>
Vector<Scalar> flatten(const FeatureMap<Scalar>& e) {
    return Eigen::Map<const Vector<Scalar>>(e.values().data(), e.size());
}

template <typename Scalar, typename Derived>
FeatureMap<Scalar> unflatten(const Eigen::MatrixBase<Derived>& flat, int side, int dim,
                             std::uint64_t frame_index = 0, double timestamp_s = 0.0) {
    STARMEM_EXPECT(flat.cols() == 1, "unflatten expects a column vector");
    STARMEM_EXPECT(flat.size() == static_cast<Eigen::Index>(side) * side * dim,
                   "flat length must equal side^2 * dim");
    TokenMatrix<Scalar> values(static_cast<Eigen::Index>(side) * side, dim);
    Eigen::Map<Vector<Scalar>>(values.data(), values.size()) = flat.template cast<Scalar>();
    return FeatureMap<Scalar>(frame_index, timestamp_s, side, std::move(values));
}

/// Squared Euclidean distance, accumulated in double.
template <typename DerivedA, typename DerivedB>
double distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    STARMEM_EXPECT(a.rows() == b.rows() && a.cols() == b.cols(), "distance: length mismatch");
    return (a.template cast<double>() - b.template cast<double>()).squaredNorm();
}

namespace detail {

inline std::pair<int, int> pool_bin(int index, int source, int target) {
    const int begin = static_cast<int>((static_cast<long long>(index) * source) / target);
    const int end = static_cast<int>(((static_cast<long long>(index) + 1) * source + target - 1) / target);
    return {begin, end};
}

}  // namespace detail

/// Average pooling over the spatial grid, producing `Out` values from
/// `In` values. Sums are always accumulated in double.
template <typename Out, typename In>
FeatureMap<Out> avg_pool_as(const FeatureMap<In>& e, int target_side,
                            PoolingMode mode = PoolingMode::Strict) {
    const int side = e.side();
    if (target_side <= 0 || target_side > side) {
        throw ConfigError("pooling target side " + std::to_string(target_side) +
                          " outside (0, " + std::to_string(side) + "]");
    }
    if (mode == PoolingMode::Strict && side % target_side != 0) {
        throw ConfigError("pooling " + std::to_string(side) + " -> " + std::to_string(target_side) +
                          " is not divisible in strict mode");
    }

    const Eigen::Index dim = e.dim();
    TokenMatrix<Out> out(static_cast<Eigen::Index>(target_side) * target_side, dim);
    Eigen::VectorXd acc(dim);
    for (int r = 0; r < target_side; ++r) {
        const auto [r0, r1] = detail::pool_bin(r, side, target_side);
        for (int c = 0; c < target_side; ++c) {
            const auto [c0, c1] = detail::pool_bin(c, side, target_side);
            acc.setZero();
            for (int sr = r0; sr < r1; ++sr) {
                for (int sc = c0; sc < c1; ++sc) {
                    acc += e.cell(sr, sc).transpose().template cast<double>();
                }
            }
            const double count = static_cast<double>(r1 - r0) * (c1 - c0);
            out.row(static_cast<Eigen::Index>(r) * target_side + c) =
                (acc / count).transpose().template cast<Out>();
        }
    }
    return FeatureMap<Out>(e.frame_index(), e.timestamp_s(), target_side, std::move(out));
}

template <typename Scalar>
FeatureMap<Scalar> avg_pool(const FeatureMap<Scalar>& e, int target_side,
                            PoolingMode mode = PoolingMode::Strict) {
    if (target_side == e.side()) return e;
    return avg_pool_as<Scalar>(e, target_side, mode);
}

}  // namespace starmem
