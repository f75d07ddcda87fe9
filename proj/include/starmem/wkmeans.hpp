// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "starmem/errors.hpp"
#include "starmem/feature_map.hpp"

namespace starmem {

/// A weighted centroid in flattened feature space. The weight is the
/// frame mass it has absorbed.
template <typename Scalar>
struct WeightedPoint {
    Vector<Scalar> vector;
    double weight = 1.0;
    std::uint64_t newest_frame_index = 0;

    bool operator==(const WeightedPoint& o) const {
        return weight == o.weight && newest_frame_index == o.newest_frame_index &&
               vector.size() == o.vector.size() && vector == o.vector;
    }
};

/// At most `k` weighted centroids, kept in canonical order
/// (ascending newest_frame_index, then weight, then lexicographic vector).
template <typename Scalar>
struct ClusterSet {
    std::vector<WeightedPoint<Scalar>> points;
    std::size_t k = 0;
    double total_weight = 0.0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    Eigen::Index dimension() const { return points.empty() ? 0 : points.front().vector.size(); }

    bool operator==(const ClusterSet&) const = default;
};

/// Result of a clustering step. `assignment[i]` maps the i-th combined
/// input (state points first, then incoming, in caller order) to its
/// output cluster.
template <typename Scalar>
struct ClusterUpdate {
    ClusterSet<Scalar> clusters;
    std::vector<std::size_t> assignment;
    int iterations = 0;
    bool converged = true;
    bool exact = false;  // batch path proved optimality by exhaustive search
};

struct WkmeansOptions {
    int max_iterations = 50;
    // Batch updates over at most this many points are solved exactly.
    std::size_t exact_max_points = 14;
    std::size_t exact_node_budget = 4'000'000;
};

namespace detail {

constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

// Points are always visited row by row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
bool canonical_less(const WeightedPoint<Scalar>& a, const WeightedPoint<Scalar>& b) {
    if (a.newest_frame_index != b.newest_frame_index) return a.newest_frame_index < b.newest_frame_index;
    if (a.weight != b.weight) return a.weight < b.weight;
    return std::lexicographical_compare(a.vector.data(), a.vector.data() + a.vector.size(), b.vector.data(),
                                        b.vector.data() + b.vector.size());
}

template <typename Scalar>
void check_points(std::span<const WeightedPoint<Scalar>> points, Eigen::Index dim) {
    for (const auto& p : points) {
        STARMEM_EXPECT(p.vector.size() == dim, "wkmeans: dimensionality mismatch");
        STARMEM_EXPECT(std::isfinite(p.weight) && p.weight > 0.0, "wkmeans: weight must be positive");
        STARMEM_EXPECT(p.vector.allFinite(), "wkmeans: non-finite coordinate");
    }
}

/// Working copy of the points in double precision, in canonical order.
struct Problem {
    PointMatrix x;  // one point per row
    Eigen::VectorXd w;
    std::vector<std::uint64_t> newest;
    std::vector<std::size_t> source;  // canonical position -> caller position
};

template <typename Scalar>
Problem make_problem(std::span<const WeightedPoint<Scalar>> combined) {
    std::vector<std::size_t> order(combined.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return canonical_less(combined[a], combined[b]);
    });
    Problem pr;
    const auto n = static_cast<Eigen::Index>(combined.size());
    const Eigen::Index dim = combined.empty() ? 0 : combined.front().vector.size();
    pr.x.resize(n, dim);
    pr.w.resize(n);
    pr.newest.resize(combined.size());
    pr.source = order;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = combined[order[static_cast<std::size_t>(i)]];
        pr.x.row(i) = p.vector.transpose().template cast<double>();
        pr.w(i) = p.weight;
        pr.newest[static_cast<std::size_t>(i)] = p.newest_frame_index;
    }
    return pr;
}

/// Weighted means of each cluster. Accumulates offsets from the first
/// member so a cluster of identical points reproduces them bit-exactly.
inline PointMatrix centroids_of(const Problem& pr, const std::vector<std::size_t>& assignment, std::size_t k) {
    const Eigen::Index dim = pr.x.cols();
    PointMatrix c = PointMatrix::Zero(static_cast<Eigen::Index>(k), dim);
    std::vector<Eigen::Index> ref(k, -1);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < pr.x.rows(); ++i) {
        const auto j = assignment[static_cast<std::size_t>(i)];
        if (j == kUnassigned) continue;
        if (ref[j] < 0) ref[j] = i;
        c.row(static_cast<Eigen::Index>(j)) += pr.w(i) * (pr.x.row(i) - pr.x.row(ref[j]));
        mass(static_cast<Eigen::Index>(j)) += pr.w(i);
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (ref[j] < 0) continue;
        const auto r = static_cast<Eigen::Index>(j);
        c.row(r) = pr.x.row(ref[j]) + c.row(r) / mass(r);
    }
    return c;
}

inline double sse_of(const Problem& pr, const std::vector<std::size_t>& assignment, std::size_t k) {
    const PointMatrix c = centroids_of(pr, assignment, k);
    double total = 0.0;
    for (Eigen::Index i = 0; i < pr.x.rows(); ++i) {
        total += pr.w(i) * (pr.x.row(i) - c.row(static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)])))
                               .squaredNorm();
    }
    return total;
}

struct LloydOutcome {
    int iterations = 0;
    bool converged = false;
};

/// Weighted Lloyd iterations from an initial assignment. A point only
/// leaves its cluster for a strictly closer centroid; among equally close
/// alternatives the lowest index wins. Empty clusters are re-seeded with
/// the point farthest from its centroid.
inline LloydOutcome lloyd(const Problem& pr, std::vector<std::size_t>& assignment, std::size_t k, int max_iterations) {
    const auto n = static_cast<std::size_t>(pr.x.rows());
    LloydOutcome out;
    std::vector<std::size_t> sizes(k);
    std::vector<double> own(n);
    for (int iter = 0; iter < max_iterations; ++iter) {
        const PointMatrix c = centroids_of(pr, assignment, k);
        std::vector<bool> live(k, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment[i] != kUnassigned) live[assignment[i]] = true;
        }
        std::size_t changes = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = pr.x.row(static_cast<Eigen::Index>(i));
            std::size_t best = kUnassigned;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                if (!live[j]) continue;
                const double d = (row - c.row(static_cast<Eigen::Index>(j))).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            const std::size_t cur = assignment[i];
            if (cur != kUnassigned) {
                const double cur_d = (row - c.row(static_cast<Eigen::Index>(cur))).squaredNorm();
                if (cur_d <= best_d) {
                    own[i] = cur_d;
                    continue;
                }
            }
            assignment[i] = best;
            own[i] = best_d;
            ++changes;
        }

        // Repair empty clusters.
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) ++sizes[assignment[i]];
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] != 0) continue;
            std::size_t far = kUnassigned;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[assignment[i]] > 1 && own[i] > far_d) {
                    far_d = own[i];
                    far = i;
                }
            }
            if (far == kUnassigned) break;  // fewer points than clusters
            --sizes[assignment[far]];
            assignment[far] = j;
            sizes[j] = 1;
            own[far] = 0.0;
            ++changes;
        }

        out.iterations = iter + 1;
        if (changes == 0) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// Seeds: the k heaviest points, ties to the lowest newest_frame_index.
inline std::vector<std::size_t> heaviest_seeding(const Problem& pr, std::size_t k) {
    const auto n = static_cast<std::size_t>(pr.x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        if (pr.w(ia) != pr.w(ib)) return pr.w(ia) > pr.w(ib);
        return pr.newest[a] < pr.newest[b];
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> assignment(n, kUnassigned);
    for (std::size_t j = 0; j < k; ++j) assignment[order[j]] = j;
    return assignment;
}

/// Pair (i, j), i < j, minimizing the Ward merge cost
/// w_i * w_j / (w_i + w_j) * |x_i - x_j|^2 over the current clusters.
inline std::pair<std::size_t, std::size_t> closest_ward_pair(const PointMatrix& x, const Eigen::VectorXd& w) {
    std::pair<std::size_t, std::size_t> best{0, 1};
    double best_cost = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
            const double d = (x.row(i) - x.row(j)).squaredNorm();
            const double cost = w(i) * w(j) / (w(i) + w(j)) * d;
            if (cost < best_cost) {
                best_cost = cost;
                best = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
            }
        }
    }
    return best;
}

/// Agglomerative Ward seeding down to k clusters.
inline std::vector<std::size_t> ward_seeding(const Problem& pr, std::size_t k) {
    const auto n = static_cast<std::size_t>(pr.x.rows());
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    PointMatrix x = pr.x;
    Eigen::VectorXd w = pr.w;
    while (static_cast<std::size_t>(x.rows()) > k) {
        const auto [a, b] = closest_ward_pair(x, w);
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        x.row(ia) += (x.row(ib) - x.row(ia)) * (w(ib) / (w(ia) + w(ib)));
        w(ia) += w(ib);
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(b));
        const Eigen::Index rows = x.rows();
        if (ib < rows - 1) {
            x.block(ib, 0, rows - 1 - ib, x.cols()) = x.block(ib + 1, 0, rows - 1 - ib, x.cols()).eval();
            w.segment(ib, rows - 1 - ib) = w.segment(ib + 1, rows - 1 - ib).eval();
        }
        x.conservativeResize(rows - 1, Eigen::NoChange);
        w.conservativeResize(rows - 1);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 0; j < members.size(); ++j) {
        for (auto i : members[j]) assignment[i] = j;
    }
    return assignment;
}

/// Depth-first branch and bound over restricted-growth assignments into
/// exactly k non-empty clusters. Improves `best` in place; returns false
/// when the node budget ran out before the search space was exhausted.
class ExactPartitioner {
public:
    ExactPartitioner(const Problem& pr, std::size_t k, std::size_t budget)
        : pr_(pr), k_(k), budget_(budget), n_(static_cast<std::size_t>(pr.x.rows())) {}

    bool improve(std::vector<std::size_t>& best, double& best_cost) {
        best_ = &best;
        best_cost_ = best_cost;
        current_.assign(n_, kUnassigned);
        mass_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k_));
        sums_ = PointMatrix::Zero(static_cast<Eigen::Index>(k_), pr_.x.cols());
        nodes_ = 0;
        complete_ = true;
        descend(0, 0, 0.0);
        best_cost = best_cost_;
        return complete_;
    }

private:
    void descend(std::size_t i, std::size_t used, double cost) {
        if (++nodes_ > budget_) {
            complete_ = false;
            return;
        }
        // Require a strict improvement beyond rounding noise.
        if (cost >= best_cost_ * (1.0 - 1e-12)) return;
        if (i == n_) {
            if (used == k_) {
                *best_ = current_;
                best_cost_ = std::min(best_cost_, cost);
            }
            return;
        }
        const std::size_t remaining = n_ - i;
        if (k_ - used > remaining) return;
        const auto row = pr_.x.row(static_cast<Eigen::Index>(i));
        const double wi = pr_.w(static_cast<Eigen::Index>(i));
        if (k_ - used < remaining) {
            for (std::size_t c = 0; c < used && complete_; ++c) {
                const auto r = static_cast<Eigen::Index>(c);
                const double m = mass_(r);
                const double delta = wi * m / (m + wi) * (row - sums_.row(r) / m).squaredNorm();
                mass_(r) += wi;
                sums_.row(r) += wi * row;
                current_[i] = c;
                descend(i + 1, used, cost + delta);
                mass_(r) -= wi;
                sums_.row(r) -= wi * row;
            }
        }
        if (used < k_ && complete_) {
            const auto r = static_cast<Eigen::Index>(used);
            mass_(r) = wi;
            sums_.row(r) = wi * row;
            current_[i] = used;
            descend(i + 1, used + 1, cost);
            mass_(r) = 0.0;
            sums_.row(r).setZero();
        }
        current_[i] = kUnassigned;
    }

    const Problem& pr_;
    std::size_t k_;
    std::size_t budget_;
    std::size_t n_;
    std::vector<std::size_t>* best_ = nullptr;
    double best_cost_ = 0.0;
    std::vector<std::size_t> current_;
    Eigen::VectorXd mass_;
    PointMatrix sums_;
    std::size_t nodes_ = 0;
    bool complete_ = true;
};

/// Builds the canonical output set from a final assignment over `pr`.
template <typename Scalar>
ClusterUpdate<Scalar> assemble(const Problem& pr, const std::vector<std::size_t>& assignment, std::size_t k,
                               std::size_t cluster_count) {
    const PointMatrix c = centroids_of(pr, assignment, cluster_count);
    std::vector<WeightedPoint<Scalar>> points(cluster_count);
    std::vector<bool> seen(cluster_count, false);
    for (Eigen::Index i = 0; i < pr.x.rows(); ++i) {
        const auto j = assignment[static_cast<std::size_t>(i)];
        auto& p = points[j];
        p.weight = seen[j] ? p.weight + pr.w(i) : pr.w(i);
        p.newest_frame_index = seen[j] ? std::max(p.newest_frame_index, pr.newest[static_cast<std::size_t>(i)])
                                       : pr.newest[static_cast<std::size_t>(i)];
        seen[j] = true;
    }
    for (std::size_t j = 0; j < cluster_count; ++j) {
        points[j].vector = c.row(static_cast<Eigen::Index>(j)).transpose().template cast<Scalar>();
    }

    std::vector<std::size_t> order(cluster_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return canonical_less(points[a], points[b]); });
    std::vector<std::size_t> rank(cluster_count);
    for (std::size_t r = 0; r < cluster_count; ++r) rank[order[r]] = r;

    ClusterUpdate<Scalar> out;
    out.clusters.k = k;
    out.clusters.points.reserve(cluster_count);
    for (auto j : order) out.clusters.points.push_back(std::move(points[j]));
    out.clusters.total_weight = pr.w.sum();
    out.assignment.assign(pr.source.size(), 0);
    for (std::size_t i = 0; i < pr.source.size(); ++i) out.assignment[pr.source[i]] = rank[assignment[i]];
    return out;
}

template <typename Scalar>
ClusterUpdate<Scalar> passthrough(const Problem& pr, std::size_t k) {
    std::vector<std::size_t> assignment(static_cast<std::size_t>(pr.x.rows()));
    std::iota(assignment.begin(), assignment.end(), std::size_t{0});
    return assemble<Scalar>(pr, assignment, k, assignment.size());
}

template <typename Scalar>
std::vector<WeightedPoint<Scalar>> combine(const ClusterSet<Scalar>& state,
                                           std::span<const WeightedPoint<Scalar>> incoming) {
    std::vector<WeightedPoint<Scalar>> combined;
    combined.reserve(state.points.size() + incoming.size());
    combined.insert(combined.end(), state.points.begin(), state.points.end());
    combined.insert(combined.end(), incoming.begin(), incoming.end());
    return combined;
}

}  // namespace detail

/// Total weighted within-cluster squared error of `points` under
/// `assignment`, against the weighted means of the assigned groups.
template <typename Scalar>
double weighted_sse(std::span<const WeightedPoint<Scalar>> points, const std::vector<std::size_t>& assignment) {
    STARMEM_EXPECT(assignment.size() == points.size(), "weighted_sse: assignment length mismatch");
    if (points.empty()) return 0.0;
    const auto pr = detail::make_problem(points);
    std::vector<std::size_t> canon(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) canon[i] = assignment[pr.source[i]];
    const std::size_t k = *std::max_element(assignment.begin(), assignment.end()) + 1;
    return detail::sse_of(pr, canon, k);
}

/// Weighted k-means over the state's centroids plus the incoming points.
///
/// Under capacity the combined set is returned as-is. Otherwise the
/// result has exactly k centroids: small problems are solved exactly by
/// branch and bound, larger ones by Lloyd from the better of heaviest-k
/// and Ward seeding. Total weight is conserved.
template <typename Scalar>
ClusterUpdate<Scalar> wkmeans_update(const ClusterSet<Scalar>& state, std::span<const WeightedPoint<Scalar>> incoming,
                                     std::size_t k, const WkmeansOptions& opt = {}) {
    STARMEM_EXPECT(k >= 1, "wkmeans: k must be at least 1");
    const auto combined = detail::combine(state, incoming);
    if (combined.empty()) {
        ClusterUpdate<Scalar> out;
        out.clusters.k = k;
        return out;
    }
    detail::check_points<Scalar>(combined, combined.front().vector.size());
    const auto pr = detail::make_problem<Scalar>(combined);
    const std::size_t n = combined.size();
    if (n <= k) return detail::passthrough<Scalar>(pr, k);

    auto seeded = detail::heaviest_seeding(pr, k);
    auto lead = detail::lloyd(pr, seeded, k, opt.max_iterations);
    double best_cost = detail::sse_of(pr, seeded, k);
    std::vector<std::size_t> best = std::move(seeded);

    auto ward = detail::ward_seeding(pr, k);
    const auto ward_run = detail::lloyd(pr, ward, k, opt.max_iterations);
    const double ward_cost = detail::sse_of(pr, ward, k);
    if (ward_cost < best_cost) {
        best_cost = ward_cost;
        best = std::move(ward);
        lead = ward_run;
    }

    bool exact = false;
    if (n <= opt.exact_max_points) {
        detail::ExactPartitioner search(pr, k, opt.exact_node_budget);
        exact = search.improve(best, best_cost);
    }

    auto out = detail::assemble<Scalar>(pr, best, k, k);
    out.iterations = lead.iterations;
    out.converged = lead.converged;
    out.exact = exact;
    return out;
}

/// Per-frame streaming step: one new point against at most k centroids.
///
/// Over capacity, the closest pair under the Ward cost is merged and the
/// resulting partition of the k+1 points is refined by weighted Lloyd.
template <typename Scalar>
ClusterUpdate<Scalar> single_step_merge(const ClusterSet<Scalar>& state, const WeightedPoint<Scalar>& new_point,
                                        std::size_t k, const WkmeansOptions& opt = {}) {
    STARMEM_EXPECT(k >= 1, "wkmeans: k must be at least 1");
    STARMEM_EXPECT(state.points.size() <= k, "single_step_merge: state exceeds capacity");
    const auto combined = detail::combine(state, std::span<const WeightedPoint<Scalar>>(&new_point, 1));
    detail::check_points<Scalar>(combined, combined.front().vector.size());
    const auto pr = detail::make_problem<Scalar>(combined);
    const std::size_t n = combined.size();
    if (n <= k) return detail::passthrough<Scalar>(pr, k);

    const auto [a, b] = detail::closest_ward_pair(pr.x, pr.w);
    std::vector<std::size_t> assignment(n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == b) continue;
        assignment[i] = next++;
    }
    assignment[b] = assignment[a];

    const auto run = detail::lloyd(pr, assignment, k, opt.max_iterations);
    auto out = detail::assemble<Scalar>(pr, assignment, k, k);
    out.iterations = run.iterations;
    out.converged = run.converged;
    return out;
}

}  // namespace starmem
