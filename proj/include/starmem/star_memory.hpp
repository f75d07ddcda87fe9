// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "starmem/config.hpp"
#include "starmem/feature_map.hpp"
#include "starmem/semantic_attention.hpp"
#include "starmem/wkmeans.hpp"

namespace starmem {

using Frame = FeatureMap<float>;

/// A buffered frame at p_spa resolution plus its memoized p_tem
/// flattening, which is what retrieval compares against centroids.
struct BufferEntry {
    Frame frame;
    Vector<float> key;
};

/// FIFO of the latest pooled frames, newest first.
class FeatureBuffer {
public:
    explicit FeatureBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

    void push(BufferEntry entry) {
        entries_.push_front(std::move(entry));
        while (entries_.size() > capacity_) entries_.pop_back();
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return entries_.empty(); }
    const BufferEntry& operator[](std::size_t i) const { return entries_[i]; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::size_t capacity_;
    std::deque<BufferEntry> entries_;
};

struct RetrievedFrame {
    Frame frame;                     // p_spa resolution copy of the buffer entry
    std::size_t cluster_rank = 0;    // rank of the selecting cluster by weight
    std::uint64_t cluster_id = 0;    // newest_frame_index of the selecting cluster
    double distance = 0.0;           // key-to-centroid distance at selection

    std::uint64_t source_frame_index() const { return frame.frame_index(); }
};

/// Cluster positions ordered by descending weight, ties to the lower
/// newest_frame_index.
std::vector<std::size_t> rank_by_weight(std::span<const double> weights, std::span<const std::uint64_t> newest);

/// Picks the min(n_ret, |clusters|) heaviest clusters (ties to the lower
/// newest_frame_index) and, for each in rank order, the buffer frame
/// nearest its centroid among frames not already taken. Distance ties go
/// to the newer frame.
std::vector<RetrievedFrame> retrieve_update(const FeatureBuffer& buffer, const ClusterSet<double>& temporal,
                                            int n_ret);

struct StoreEpochs {
    std::uint64_t buffer = 0;
    std::uint64_t spatial = 0;
    std::uint64_t temporal = 0;
    std::uint64_t abstract = 0;
    std::uint64_t retrieved = 0;
};

/// Where one store's tokens live inside the snapshot matrix.
struct SnapshotSection {
    std::uint64_t epoch = 0;
    std::size_t items = 0;
    std::size_t tokens_per_item = 0;
    std::size_t first_row = 0;

    std::size_t rows() const { return items * tokens_per_item; }
    bool operator==(const SnapshotSection&) const = default;
};

/// Immutable, consistent read of all four memories at one epoch. Token
/// rows are ordered spatial, temporal, abstract, retrieved.
struct MemorySnapshot {
    std::uint64_t epoch = 0;
    MemoryConfig config;
    int dim = 0;
    std::uint64_t first_frame_index = 0;
    std::uint64_t last_frame_index = 0;
    double temperature = 1.0;

    SnapshotSection spatial;
    SnapshotSection temporal;
    SnapshotSection abstract;
    SnapshotSection retrieved;

    std::vector<std::uint64_t> spatial_frame_indices;
    std::vector<double> temporal_weights;
    std::vector<std::uint64_t> temporal_newest;
    std::vector<double> abstract_mass;
    std::vector<std::uint64_t> retrieved_frame_indices;
    std::vector<std::uint32_t> retrieved_cluster_ranks;

    TokenMatrix<float> tokens;  // token_count x dim

    std::size_t token_count() const { return static_cast<std::size_t>(tokens.rows()); }

    /// All per-store epochs equal the snapshot epoch.
    bool consistent() const {
        return spatial.epoch == epoch && temporal.epoch == epoch && abstract.epoch == epoch &&
               retrieved.epoch == epoch;
    }

    auto section_tokens(const SnapshotSection& s) const {
        return tokens.middleRows(static_cast<Eigen::Index>(s.first_row), static_cast<Eigen::Index>(s.rows()));
    }

    /// Centroid `i` of the temporal store as a flat p_tem^2 * dim vector.
    Vector<float> temporal_centroid(std::size_t i) const;

    bool operator==(const MemorySnapshot& o) const;
};

/// Spatial, temporal, abstract and retrieved memories over a bounded
/// feature buffer. One writer calls write_frame; every call applies the
/// buffer, spatial, temporal, abstract and retrieval updates in order.
class StarMemory {
public:
    explicit StarMemory(MemoryConfig config = {});

    void write_frame(const Frame& e);

    std::size_t token_count() const;
    MemorySnapshot snapshot() const;

    const MemoryConfig& config() const { return config_; }
    std::uint64_t epoch() const { return epoch_; }
    const FeatureBuffer& buffer() const { return buffer_; }
    const std::vector<Frame>& spatial() const { return spatial_; }
    const ClusterSet<double>& temporal() const { return temporal_; }
    const AbstractMemory<double>& abstract() const { return abstract_; }
    const std::vector<RetrievedFrame>& retrieved() const { return retrieved_; }
    const StoreEpochs& store_epochs() const { return stamps_; }
    std::optional<std::uint64_t> last_frame_index() const { return last_frame_index_; }

    /// Lloyd iterations and convergence of the most recent temporal update.
    int last_iterations() const { return last_iterations_; }
    bool last_converged() const { return last_converged_; }
    std::uint64_t nonconverged_updates() const { return nonconverged_; }

private:
    void update_abstract(Vector<double> input);

    MemoryConfig config_;
    FeatureBuffer buffer_;
    std::vector<Frame> spatial_;
    ClusterSet<double> temporal_;
    AbstractMemory<double> abstract_;
    std::vector<Vector<double>> warmup_inputs_;
    std::vector<RetrievedFrame> retrieved_;
    StoreEpochs stamps_;
    std::uint64_t epoch_ = 0;
    std::optional<std::uint64_t> first_frame_index_;
    std::optional<std::uint64_t> last_frame_index_;
    int source_side_ = 0;
    int source_dim_ = 0;
    int last_iterations_ = 0;
    bool last_converged_ = true;
    std::uint64_t nonconverged_ = 0;
};

}  // namespace starmem
