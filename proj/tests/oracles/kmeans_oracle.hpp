// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference weighted k-means, written without any of the library's
// clustering code. Slow on purpose.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

struct Instance {
    std::vector<Eigen::VectorXd> x;
    std::vector<double> w;
};

inline double partition_sse(const Instance& in, const std::vector<int>& label, int k) {
    const auto dim = in.x.front().size();
    std::vector<Eigen::VectorXd> sum(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(dim));
    std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < in.x.size(); ++i) {
        sum[static_cast<std::size_t>(label[i])] += in.w[i] * in.x[i];
        mass[static_cast<std::size_t>(label[i])] += in.w[i];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < in.x.size(); ++i) {
        const auto c = static_cast<std::size_t>(label[i]);
        total += in.w[i] * (in.x[i] - sum[c] / mass[c]).squaredNorm();
    }
    return total;
}

/// Plain weighted Lloyd from the given centroids. Returns the SSE it
/// settles at.
inline double lloyd(const Instance& in, std::vector<Eigen::VectorXd> c, int max_iter = 200) {
    const std::size_t n = in.x.size();
    const auto k = c.size();
    std::vector<int> label(n, -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double d = (in.x[i] - c[j]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(j);
                }
            }
            if (label[i] != best) changed = true;
            label[i] = best;
        }
        if (!changed) break;
        for (std::size_t j = 0; j < k; ++j) {
            Eigen::VectorXd s = Eigen::VectorXd::Zero(c[j].size());
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (label[i] != static_cast<int>(j)) continue;
                s += in.w[i] * in.x[i];
                m += in.w[i];
            }
            if (m > 0.0) c[j] = s / m;  // an emptied cluster keeps its centroid
        }
    }
    // SSE against the means of the final groups (empty groups contribute 0).
    std::vector<int> compact(n);
    std::vector<int> remap(k, -1);
    int used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = remap[static_cast<std::size_t>(label[i])];
        if (r < 0) r = used++;
        compact[i] = r;
    }
    return partition_sse(in, compact, used);
}

/// Lloyd from every k-subset of the points as initial centroids; the best
/// final SSE found.
inline double exhaustive_seeding_lloyd(const Instance& in, int k) {
    const int n = static_cast<int>(in.x.size());
    if (n <= k) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            std::vector<Eigen::VectorXd> seeds;
            for (int p : pick) seeds.push_back(in.x[static_cast<std::size_t>(p)]);
            best = std::min(best, lloyd(in, seeds));
            return;
        }
        for (int i = start; i <= n - (k - depth); ++i) {
            pick[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

/// Minimum SSE over every partition into at most k groups. Only for small n.
inline double optimal_sse(const Instance& in, int k) {
    const int n = static_cast<int>(in.x.size());
    std::vector<int> label(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, int)> rec = [&](int i, int used) {
        if (i == n) {
            best = std::min(best, partition_sse(in, label, used));
            return;
        }
        for (int g = 0; g < std::min(used + 1, k); ++g) {
            label[static_cast<std::size_t>(i)] = g;
            rec(i + 1, std::max(used, g + 1));
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace oracle
