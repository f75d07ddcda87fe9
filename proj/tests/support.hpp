// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "starmem/star_memory.hpp"

namespace testing_support {

using starmem::Frame;
using starmem::TokenMatrix;

inline Frame random_frame(std::mt19937_64& rng, std::uint64_t index, int side, int dim, double scale = 1.0) {
    std::normal_distribution<float> n(0.0f, static_cast<float>(scale));
    TokenMatrix<float> v(side * side, dim);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
    return Frame(index, static_cast<double>(index), side, std::move(v));
}

/// A valid strict-mode config with small capacities, and a source side it accepts.
struct RandomSetup {
    starmem::MemoryConfig config;
    int side = 0;
    int dim = 0;
};

inline RandomSetup random_setup(std::mt19937_64& rng) {
    auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    RandomSetup s;
    auto& c = s.config;
    c.p_abs = pick(1, 2);
    c.p_tem = c.p_abs * pick(1, 2);
    c.p_spa = c.p_tem * pick(1, 2);
    c.n_buff = pick(1, 40);
    c.n_spa = pick(1, c.n_buff);
    c.n_tem = pick(1, 8);
    c.n_ret = pick(1, std::min(c.n_tem, c.n_buff));
    c.n_abs = pick(1, 6);
    s.side = c.p_spa * pick(1, 2);
    s.dim = pick(1, 3);
    return s;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() / ("starmem_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
