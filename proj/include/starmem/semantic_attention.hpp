// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "starmem/errors.hpp"
#include "starmem/feature_map.hpp"

namespace starmem {

/// Fixed-size synopsis tokens with their accumulated attention mass.
template <typename Scalar>
struct AbstractMemory {
    TokenMatrix<Scalar> tokens;  // n_abs x token length
    Eigen::VectorXd mass;
    double temperature = 1.0;

    Eigen::Index count() const { return tokens.rows(); }
    Eigen::Index token_length() const { return tokens.cols(); }
    double total_mass() const { return mass.sum(); }

    bool operator==(const AbstractMemory& o) const {
        return temperature == o.temperature && tokens.rows() == o.tokens.rows() &&
               tokens.cols() == o.tokens.cols() && tokens == o.tokens && mass == o.mass;
    }
};

/// Mean pairwise squared distance between rows; 1 when undefined or zero.
template <typename Derived>
double mean_pairwise_distance(const Eigen::MatrixBase<Derived>& rows) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
            sum += distance(rows.row(i), rows.row(j));
            ++pairs;
        }
    }
    if (pairs == 0 || !(sum > 0.0)) return 1.0;
    return sum / static_cast<double>(pairs);
}

/// Seeds n_abs tokens from the first distinct inputs, cycling through them
/// when fewer than n_abs are distinct. Every token starts with mass 1.
template <typename Scalar>
AbstractMemory<Scalar> sa_init(int n_abs, std::span<const Vector<Scalar>> first_inputs,
                               std::optional<double> temperature = std::nullopt) {
    STARMEM_EXPECT(n_abs > 0, "sa_init: n_abs must be positive");
    STARMEM_EXPECT(!first_inputs.empty(), "sa_init: at least one input required");
    const Eigen::Index len = first_inputs.front().size();
    std::vector<const Vector<Scalar>*> distinct;
    for (const auto& v : first_inputs) {
        STARMEM_EXPECT(v.size() == len, "sa_init: input length mismatch");
        STARMEM_EXPECT(v.allFinite(), "sa_init: non-finite input");
        bool seen = false;
        for (const auto* d : distinct) seen = seen || (*d == v);
        if (!seen) distinct.push_back(&v);
        if (static_cast<int>(distinct.size()) == n_abs) break;
    }
    AbstractMemory<Scalar> mem;
    mem.tokens.resize(n_abs, len);
    for (int i = 0; i < n_abs; ++i) mem.tokens.row(i) = distinct[static_cast<std::size_t>(i) % distinct.size()]->transpose();
    mem.mass = Eigen::VectorXd::Ones(n_abs);
    mem.temperature = temperature ? *temperature : mean_pairwise_distance(mem.tokens);
    STARMEM_EXPECT(mem.temperature > 0.0, "sa_init: temperature must be positive");
    return mem;
}

/// Attention weights of one input over the tokens:
/// softmax_i(-distance(token_i, x) / temperature).
template <typename Scalar, typename Derived>
Eigen::VectorXd attention_weights(const AbstractMemory<Scalar>& mem, const Eigen::MatrixBase<Derived>& x) {
    Eigen::VectorXd logits(mem.count());
    for (Eigen::Index i = 0; i < mem.count(); ++i) {
        logits(i) = -distance(mem.tokens.row(i).transpose(), x) / mem.temperature;
    }
    const double top = logits.maxCoeff();
    Eigen::VectorXd a = (logits.array() - top).exp().matrix();
    return a / a.sum();
}

/// Folds new tokens into the synopsis. All inputs of one call attend to
/// the pre-update tokens, so the result does not depend on input order.
/// Each input distributes exactly one unit of mass across the tokens.
template <typename Scalar>
AbstractMemory<Scalar> sa_update(const AbstractMemory<Scalar>& mem, std::span<const Vector<Scalar>> new_tokens) {
    if (new_tokens.empty()) return mem;
    const Eigen::Index n = mem.count();
    const Eigen::Index len = mem.token_length();
    Eigen::MatrixXd attention(n, static_cast<Eigen::Index>(new_tokens.size()));
    for (std::size_t j = 0; j < new_tokens.size(); ++j) {
        const auto& x = new_tokens[j];
        STARMEM_EXPECT(x.size() == len, "sa_update: token length mismatch");
        STARMEM_EXPECT(x.allFinite(), "sa_update: non-finite input");
        attention.col(static_cast<Eigen::Index>(j)) = attention_weights(mem, x);
    }

    AbstractMemory<Scalar> out = mem;
    Eigen::VectorXd pull(len);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double absorbed = attention.row(i).sum();
        const Eigen::VectorXd current = mem.tokens.row(i).transpose().template cast<double>();
        pull.setZero();
        for (std::size_t j = 0; j < new_tokens.size(); ++j) {
            pull += attention(i, static_cast<Eigen::Index>(j)) * (new_tokens[j].template cast<double>() - current);
        }
        // current + sum_j a_ij (x_j - current) / (mass_i + sum_j a_ij)
        out.tokens.row(i) = (current + pull / (mem.mass(i) + absorbed)).transpose().template cast<Scalar>();
        out.mass(i) = mem.mass(i) + absorbed;
    }
    return out;
}

}  // namespace starmem
