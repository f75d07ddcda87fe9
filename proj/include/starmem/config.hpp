// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "starmem/errors.hpp"
#include "starmem/feature_map.hpp"

namespace starmem {

enum class DistanceMetric { SquaredEuclidean };

/// Pooled grid sides and store capacities of the hierarchical memory.
/// Defaults are the reference configuration (681-token budget).
struct MemoryConfig {
    int p_spa = 8;
    int p_tem = 4;
    int p_abs = 1;
    int n_buff = 300;
    int n_spa = 1;
    int n_tem = 25;
    int n_abs = 25;
    int n_ret = 3;
    int dim = 0;  // 0: taken from the first frame
    DistanceMetric distance = DistanceMetric::SquaredEuclidean;
    PoolingMode pooling = PoolingMode::Strict;
    std::optional<double> temperature;  // abstract-memory softmax temperature override

    std::size_t max_size() const {
        const auto spa = static_cast<std::size_t>(p_spa) * p_spa;
        const auto tem = static_cast<std::size_t>(p_tem) * p_tem;
        const auto abs = static_cast<std::size_t>(p_abs) * p_abs;
        return static_cast<std::size_t>(n_spa + n_ret) * spa + static_cast<std::size_t>(n_tem) * tem +
               static_cast<std::size_t>(n_abs) * abs;
    }

    /// Throws ConfigError on the first violated invariant.
    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw ConfigError(what);
        };
        require(p_spa > 0 && p_tem > 0 && p_abs > 0, "pooled sides must be positive");
        require(n_buff > 0 && n_spa > 0 && n_tem > 0 && n_abs > 0 && n_ret > 0,
                "capacities must be positive");
        require(dim >= 0, "dim must be non-negative");
        require(n_spa <= n_buff, "n_spa must not exceed n_buff");
        require(n_ret <= n_buff, "n_ret must not exceed n_buff");
        require(n_ret <= n_tem, "n_ret must not exceed n_tem");
        require(p_abs <= p_tem && p_tem <= p_spa, "pooled sides must satisfy p_abs <= p_tem <= p_spa");
        require(!temperature || *temperature > 0.0, "temperature must be positive");
        // Retrieval re-pools buffer entries from p_spa to p_tem.
        require(pooling != PoolingMode::Strict || p_spa % p_tem == 0,
                "strict pooling requires p_tem to divide p_spa");
    }

    /// Checks the source-dependent invariants for a frame of the given shape.
    void validate_source(int side, int frame_dim) const {
        if (p_spa > side) {
            throw ConfigError("p_spa " + std::to_string(p_spa) + " exceeds source side " +
                              std::to_string(side));
        }
        if (dim != 0 && dim != frame_dim) {
            throw ConfigError("frame dim " + std::to_string(frame_dim) + " does not match configured dim " +
                              std::to_string(dim));
        }
        if (pooling == PoolingMode::Strict) {
            for (int p : {p_spa, p_tem, p_abs}) {
                if (side % p != 0) {
                    throw ConfigError("source side " + std::to_string(side) + " not divisible by pooled side " +
                                      std::to_string(p));
                }
            }
        }
    }

    bool operator==(const MemoryConfig&) const = default;
};

}  // namespace starmem
