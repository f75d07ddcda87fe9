// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "starmem/star_memory.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace starmem {

namespace {

// Squared distance accumulated in fixed blocks; gives up (returning a
// value >= bound) once a partial sum reaches `bound`.
double bounded_distance(const Vector<float>& key, const Vector<double>& centroid, double bound) {
    constexpr Eigen::Index kBlock = 512;
    const Eigen::Index n = key.size();
    double acc = 0.0;
    for (Eigen::Index start = 0; start < n; start += kBlock) {
        const Eigen::Index len = std::min(kBlock, n - start);
        acc += (key.segment(start, len).cast<double>() - centroid.segment(start, len)).squaredNorm();
        if (acc >= bound) return acc;
    }
    return acc;
}

}  // namespace

std::vector<std::size_t> rank_by_weight(std::span<const double> weights, std::span<const std::uint64_t> newest) {
    STARMEM_EXPECT(weights.size() == newest.size(), "rank_by_weight: length mismatch");
    std::vector<std::size_t> ranked(weights.size());
    std::iota(ranked.begin(), ranked.end(), std::size_t{0});
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return newest[a] < newest[b];
    });
    return ranked;
}

std::vector<RetrievedFrame> retrieve_update(const FeatureBuffer& buffer, const ClusterSet<double>& temporal,
                                            int n_ret) {
    STARMEM_EXPECT(!buffer.empty(), "retrieve_update: empty buffer");
    STARMEM_EXPECT(n_ret > 0, "retrieve_update: n_ret must be positive");

    const auto& clusters = temporal.points;
    std::vector<double> weights;
    std::vector<std::uint64_t> newest;
    for (const auto& c : clusters) {
        weights.push_back(c.weight);
        newest.push_back(c.newest_frame_index);
    }
    const auto ranked = rank_by_weight(weights, newest);
    const std::size_t selected = std::min({static_cast<std::size_t>(n_ret), ranked.size(), buffer.size()});

    std::vector<bool> taken(buffer.size(), false);
    std::vector<RetrievedFrame> out;
    out.reserve(selected);
    for (std::size_t rank = 0; rank < selected; ++rank) {
        const auto& centroid = clusters[ranked[rank]];
        STARMEM_EXPECT(centroid.vector.size() == buffer[0].key.size(),
                       "retrieve_update: centroid and buffer key lengths differ");
        std::size_t best = buffer.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < buffer.size(); ++b) {
            if (taken[b]) continue;
            const double d = bounded_distance(buffer[b].key, centroid.vector, best_d);
            if (d < best_d) {
                best_d = d;
                best = b;
            }
        }
        taken[best] = true;
        out.push_back(RetrievedFrame{buffer[best].frame, rank, centroid.newest_frame_index, best_d});
    }
    return out;
}

Vector<float> MemorySnapshot::temporal_centroid(std::size_t i) const {
    STARMEM_EXPECT(i < temporal.items, "temporal_centroid: index out of range");
    const auto rows = static_cast<Eigen::Index>(temporal.tokens_per_item);
    const TokenMatrix<float> block =
        tokens.middleRows(static_cast<Eigen::Index>(temporal.first_row) + static_cast<Eigen::Index>(i) * rows, rows);
    return Eigen::Map<const Vector<float>>(block.data(), block.size());
}

bool MemorySnapshot::operator==(const MemorySnapshot& o) const {
    return epoch == o.epoch && config == o.config && dim == o.dim && first_frame_index == o.first_frame_index &&
           last_frame_index == o.last_frame_index && temperature == o.temperature && spatial == o.spatial &&
           temporal == o.temporal && abstract == o.abstract && retrieved == o.retrieved &&
           spatial_frame_indices == o.spatial_frame_indices && temporal_weights == o.temporal_weights &&
           temporal_newest == o.temporal_newest && abstract_mass == o.abstract_mass &&
           retrieved_frame_indices == o.retrieved_frame_indices &&
           retrieved_cluster_ranks == o.retrieved_cluster_ranks && tokens.rows() == o.tokens.rows() &&
           tokens.cols() == o.tokens.cols() && tokens == o.tokens;
}

StarMemory::StarMemory(MemoryConfig config) : config_(std::move(config)) {
    config_.validate();
    buffer_ = FeatureBuffer(static_cast<std::size_t>(config_.n_buff));
    temporal_.k = static_cast<std::size_t>(config_.n_tem);
}

void StarMemory::write_frame(const Frame& e) {
    if (last_frame_index_ && e.frame_index() <= *last_frame_index_) {
        throw OrderingError("frame index " + std::to_string(e.frame_index()) + " does not follow " +
                            std::to_string(*last_frame_index_));
    }
    if (epoch_ == 0) {
        config_.validate_source(e.side(), e.dim());
        source_side_ = e.side();
        source_dim_ = e.dim();
    } else {
        STARMEM_EXPECT(e.side() == source_side_ && e.dim() == source_dim_,
                       "write_frame: frame shape differs from the stream's first frame");
    }
    const PoolingMode mode = config_.pooling;

    // Feature buffer and spatial memory.
    Frame spa = avg_pool_as<float>(e, config_.p_spa, mode);
    Vector<float> key = flatten(avg_pool_as<float>(spa, config_.p_tem, mode));
    buffer_.push(BufferEntry{std::move(spa), std::move(key)});
    const std::size_t n_spa = std::min(buffer_.size(), static_cast<std::size_t>(config_.n_spa));
    spatial_.clear();
    for (std::size_t i = 0; i < n_spa; ++i) spatial_.push_back(buffer_[i].frame);

    // Temporal memory.
    WeightedPoint<double> point{flatten(avg_pool_as<double>(e, config_.p_tem, mode)), 1.0, e.frame_index()};
    auto update = single_step_merge(temporal_, point, static_cast<std::size_t>(config_.n_tem));
    temporal_ = std::move(update.clusters);
    last_iterations_ = update.iterations;
    last_converged_ = update.converged;
    if (!update.converged) ++nonconverged_;

    // Abstract memory.
    update_abstract(flatten(avg_pool_as<double>(e, config_.p_abs, mode)));

    // Retrieved memory.
    retrieved_ = retrieve_update(buffer_, temporal_, config_.n_ret);

    ++epoch_;
    if (!first_frame_index_) first_frame_index_ = e.frame_index();
    last_frame_index_ = e.frame_index();
    stamps_ = StoreEpochs{epoch_, epoch_, epoch_, epoch_, epoch_};
}

// The first n_abs frames re-seed the synopsis from everything seen so far
// and replay it, so seeds spread over distinct early frames; afterwards
// the temperature is frozen and updates are incremental.
void StarMemory::update_abstract(Vector<double> input) {
    if (epoch_ < static_cast<std::uint64_t>(config_.n_abs)) {
        warmup_inputs_.push_back(std::move(input));
        abstract_ = sa_init<double>(config_.n_abs, warmup_inputs_, config_.temperature);
        for (const auto& x : warmup_inputs_) abstract_ = sa_update<double>(abstract_, std::span(&x, 1));
        if (warmup_inputs_.size() == static_cast<std::size_t>(config_.n_abs)) warmup_inputs_.clear();
        return;
    }
    abstract_ = sa_update<double>(abstract_, std::span<const Vector<double>>(&input, 1));
}

std::size_t StarMemory::token_count() const {
    if (epoch_ == 0) return 0;
    const auto spa = static_cast<std::size_t>(config_.p_spa) * config_.p_spa;
    const auto tem = static_cast<std::size_t>(config_.p_tem) * config_.p_tem;
    const auto abs = static_cast<std::size_t>(config_.p_abs) * config_.p_abs;
    return spatial_.size() * spa + temporal_.size() * tem + static_cast<std::size_t>(abstract_.count()) * abs +
           retrieved_.size() * spa;
}

MemorySnapshot StarMemory::snapshot() const {
    if (epoch_ == 0) throw EmptyMemoryError("snapshot of an empty memory");
    MemorySnapshot s;
    s.epoch = epoch_;
    s.config = config_;
    s.dim = source_dim_;
    s.first_frame_index = *first_frame_index_;
    s.last_frame_index = *last_frame_index_;
    s.temperature = abstract_.temperature;

    const auto spa = static_cast<std::size_t>(config_.p_spa) * config_.p_spa;
    const auto tem = static_cast<std::size_t>(config_.p_tem) * config_.p_tem;
    const auto abs = static_cast<std::size_t>(config_.p_abs) * config_.p_abs;
    std::size_t row = 0;
    auto section = [&row](std::uint64_t epoch, std::size_t items, std::size_t per) {
        SnapshotSection sec{epoch, items, per, row};
        row += items * per;
        return sec;
    };
    s.spatial = section(stamps_.spatial, spatial_.size(), spa);
    s.temporal = section(stamps_.temporal, temporal_.size(), tem);
    s.abstract = section(stamps_.abstract, static_cast<std::size_t>(abstract_.count()), abs);
    s.retrieved = section(stamps_.retrieved, retrieved_.size(), spa);

    const auto dim = static_cast<Eigen::Index>(source_dim_);
    s.tokens.resize(static_cast<Eigen::Index>(row), dim);
    auto put = [&](std::size_t first, const auto& flat) {
        const auto rows = flat.size() / dim;
        s.tokens.middleRows(static_cast<Eigen::Index>(first), rows) =
            Eigen::Map<const TokenMatrix<typename std::decay_t<decltype(flat)>::Scalar>>(flat.data(), rows, dim)
                .template cast<float>();
    };

    for (std::size_t i = 0; i < spatial_.size(); ++i) {
        s.tokens.middleRows(static_cast<Eigen::Index>(s.spatial.first_row + i * spa), static_cast<Eigen::Index>(spa)) =
            spatial_[i].values();
        s.spatial_frame_indices.push_back(spatial_[i].frame_index());
    }
    for (std::size_t i = 0; i < temporal_.size(); ++i) {
        put(s.temporal.first_row + i * tem, temporal_.points[i].vector);
        s.temporal_weights.push_back(temporal_.points[i].weight);
        s.temporal_newest.push_back(temporal_.points[i].newest_frame_index);
    }
    for (Eigen::Index i = 0; i < abstract_.count(); ++i) {
        const Vector<double> flat = abstract_.tokens.row(i).transpose();
        put(s.abstract.first_row + static_cast<std::size_t>(i) * abs, flat);
        s.abstract_mass.push_back(abstract_.mass(i));
    }
    for (std::size_t i = 0; i < retrieved_.size(); ++i) {
        s.tokens.middleRows(static_cast<Eigen::Index>(s.retrieved.first_row + i * spa),
                            static_cast<Eigen::Index>(spa)) = retrieved_[i].frame.values();
        s.retrieved_frame_indices.push_back(retrieved_[i].source_frame_index());
        s.retrieved_cluster_ranks.push_back(static_cast<std::uint32_t>(retrieved_[i].cluster_rank));
    }
    return s;
}

}  // namespace starmem
