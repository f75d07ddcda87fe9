// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "starmem/semantic_attention.hpp"

using namespace starmem;
using Vec = Vector<double>;

namespace {

Vec random_vec(std::mt19937_64& rng, int len, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vec v(len);
    for (int i = 0; i < len; ++i) v(i) = g(rng);
    return v;
}

// Direct per-token formula, one input at a time against fixed tokens.
AbstractMemory<double> naive_update(const AbstractMemory<double>& mem, const std::vector<Vec>& xs) {
    const auto n = mem.count();
    std::vector<std::vector<double>> a(static_cast<std::size_t>(n), std::vector<double>(xs.size()));
    for (std::size_t j = 0; j < xs.size(); ++j) {
        std::vector<double> logit(static_cast<std::size_t>(n));
        double z = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = 0;
            for (Eigen::Index c = 0; c < mem.token_length(); ++c) {
                d += (mem.tokens(i, c) - xs[j](c)) * (mem.tokens(i, c) - xs[j](c));
            }
            logit[static_cast<std::size_t>(i)] = std::exp(-d / mem.temperature);
            z += logit[static_cast<std::size_t>(i)];
        }
        for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)][j] = logit[static_cast<std::size_t>(i)] / z;
    }
    AbstractMemory<double> out = mem;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& ai = a[static_cast<std::size_t>(i)];
        double absorbed = 0;
        for (double v : ai) absorbed += v;
        for (Eigen::Index c = 0; c < mem.token_length(); ++c) {
            double num = mem.mass(i) * mem.tokens(i, c);
            for (std::size_t j = 0; j < xs.size(); ++j) num += ai[j] * xs[j](c);
            out.tokens(i, c) = num / (mem.mass(i) + absorbed);
        }
        out.mass(i) = mem.mass(i) + absorbed;
    }
    return out;
}

}  // namespace

TEST(SaInit, SingleToken) {
    Vec v(3);
    v << 1, 2, 3;
    const auto mem = sa_init<double>(1, std::vector<Vec>{v});
    ASSERT_EQ(mem.count(), 1);
    EXPECT_EQ(Vec(mem.tokens.row(0).transpose()), v);
    EXPECT_EQ(mem.mass(0), 1.0);
    EXPECT_EQ(mem.temperature, 1.0);
}

TEST(SaInit, CyclesDistinctInputs) {
    Vec a = Vec::Constant(2, 1.0), b = Vec::Constant(2, -1.0);
    const auto mem = sa_init<double>(3, std::vector<Vec>{a, b, a});
    EXPECT_EQ(Vec(mem.tokens.row(0).transpose()), a);
    EXPECT_EQ(Vec(mem.tokens.row(1).transpose()), b);
    EXPECT_EQ(Vec(mem.tokens.row(2).transpose()), a);
    EXPECT_EQ(mem.mass, Eigen::VectorXd::Ones(3));
}

TEST(SaInit, TakesFirstInputs) {
    std::mt19937_64 rng(1);
    std::vector<Vec> xs;
    for (int i = 0; i < 30; ++i) xs.push_back(random_vec(rng, 4));
    const auto mem = sa_init<double>(25, xs);
    for (int i = 0; i < 25; ++i) EXPECT_EQ(Vec(mem.tokens.row(i).transpose()), xs[static_cast<std::size_t>(i)]);
    // Temperature is the mean pairwise distance of the seeds.
    double sum = 0;
    int pairs = 0;
    for (int i = 0; i < 25; ++i)
        for (int j = i + 1; j < 25; ++j, ++pairs) sum += (xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(j)]).squaredNorm();
    EXPECT_NEAR(mem.temperature, sum / pairs, 1e-12 * sum / pairs);
    EXPECT_EQ(sa_init<double>(25, xs, 2.5).temperature, 2.5);
}

TEST(SaUpdate, MatchesDirectFormula) {
    std::mt19937_64 rng(2);
    std::vector<Vec> seeds;
    for (int i = 0; i < 5; ++i) seeds.push_back(random_vec(rng, 3));
    auto mem = sa_init<double>(5, seeds);
    for (int step = 0; step < 20; ++step) {
        std::vector<Vec> xs;
        const int batch = 1 + step % 3;
        for (int j = 0; j < batch; ++j) xs.push_back(random_vec(rng, 3));
        const auto expected = naive_update(mem, xs);
        mem = sa_update<double>(mem, xs);
        EXPECT_LE((mem.tokens - expected.tokens).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((mem.mass - expected.mass).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SaUpdate, SaturatedAttention) {
    Vec a = Vec::Zero(2), b = Vec::Constant(2, 100.0);
    auto mem = sa_init<double>(2, std::vector<Vec>{a, b}, 1.0);
    const auto out = sa_update<double>(mem, std::vector<Vec>{a});
    EXPECT_EQ(Vec(out.tokens.row(0).transpose()), a);
    EXPECT_NEAR(out.mass(0), 2.0, 1e-12);
    EXPECT_NEAR(out.mass(1), 1.0, 1e-12);
    EXPECT_EQ(Vec(out.tokens.row(1).transpose()), b);
}

TEST(SaUpdate, SingleTokenIsRunningMean) {
    std::mt19937_64 rng(3);
    Vec seed = random_vec(rng, 4);
    auto mem = sa_init<double>(1, std::vector<Vec>{seed});
    Vec sum = seed;
    for (int i = 1; i <= 40; ++i) {
        Vec x = random_vec(rng, 4);
        sum += x;
        mem = sa_update<double>(mem, std::vector<Vec>{x});
        EXPECT_EQ(mem.mass(0), 1.0 + i);
        EXPECT_LE((Vec(mem.tokens.row(0).transpose()) - sum / (i + 1)).norm(), 1e-12);
    }
}

TEST(SaUpdate, MassConservationAndMonotonicity) {
    std::mt19937_64 rng(4);
    std::vector<Vec> seeds;
    for (int i = 0; i < 4; ++i) seeds.push_back(random_vec(rng, 6));
    auto mem = sa_init<double>(4, seeds);
    for (int i = 0; i < 50; ++i) {
        const auto before = mem.mass;
        mem = sa_update<double>(mem, std::vector<Vec>{random_vec(rng, 6, 3.0)});
        EXPECT_TRUE((mem.mass.array() >= before.array()).all());
    }
    EXPECT_NEAR(mem.total_mass(), 4.0 + 50.0, 1e-9);
}

TEST(SaUpdate, ConvexityBounds) {
    std::mt19937_64 rng(5);
    std::vector<Vec> seen;
    for (int i = 0; i < 3; ++i) seen.push_back(random_vec(rng, 2));
    auto mem = sa_init<double>(3, seen);
    for (int i = 0; i < 100; ++i) {
        std::vector<Vec> xs{random_vec(rng, 2, 5.0), random_vec(rng, 2, 0.2)};
        seen.insert(seen.end(), xs.begin(), xs.end());
        mem = sa_update<double>(mem, xs);
        for (int c = 0; c < 2; ++c) {
            double lo = seen[0](c), hi = seen[0](c);
            for (const auto& v : seen) {
                lo = std::min(lo, v(c));
                hi = std::max(hi, v(c));
            }
            EXPECT_GE(mem.tokens.col(c).minCoeff(), lo - 1e-12);
            EXPECT_LE(mem.tokens.col(c).maxCoeff(), hi + 1e-12);
        }
    }
}

TEST(SaUpdate, BatchIsPermutationInvariant) {
    std::mt19937_64 rng(6);
    std::vector<Vec> seeds;
    for (int i = 0; i < 5; ++i) seeds.push_back(random_vec(rng, 3));
    const auto mem = sa_init<double>(5, seeds);
    std::vector<Vec> xs;
    for (int i = 0; i < 7; ++i) xs.push_back(random_vec(rng, 3));
    const auto a = sa_update<double>(mem, xs);
    std::reverse(xs.begin(), xs.end());
    const auto b = sa_update<double>(mem, xs);
    EXPECT_LE((a.tokens - b.tokens).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.mass - b.mass).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SaUpdate, EmptyInputIsIdentity) {
    std::mt19937_64 rng(7);
    const auto mem = sa_init<double>(2, std::vector<Vec>{random_vec(rng, 3), random_vec(rng, 3)});
    EXPECT_EQ(sa_update<double>(mem, {}), mem);
}

TEST(SaUpdate, RejectsBadInput) {
    const auto mem = sa_init<double>(2, std::vector<Vec>{Vec::Zero(3)});
    EXPECT_THROW(sa_update<double>(mem, std::vector<Vec>{Vec::Zero(2)}), ContractViolation);
    Vec bad = Vec::Zero(3);
    bad(1) = std::nan("");
    EXPECT_THROW(sa_update<double>(mem, std::vector<Vec>{bad}), ContractViolation);
    EXPECT_THROW(sa_init<double>(0, std::vector<Vec>{Vec::Zero(3)}), ContractViolation);
    EXPECT_THROW(sa_init<double>(1, std::vector<Vec>{}), ContractViolation);
}
