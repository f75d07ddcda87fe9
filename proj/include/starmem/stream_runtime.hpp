// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "starmem/star_memory.hpp"

namespace starmem {

/// Pull-based frame source. Timestamps must strictly increase; this is
/// checked by the frame handler, not here.
class StreamSource {
public:
    using Pull = std::function<std::optional<Frame>()>;

    StreamSource(double fps, Pull pull, bool finite = true) : fps_(fps), finite_(finite), pull_(std::move(pull)) {}

    static StreamSource from_frames(double fps, std::vector<Frame> frames);

    std::optional<Frame> next() { return pull_(); }
    double fps() const { return fps_; }
    bool finite() const { return finite_; }

    /// Drains a finite source.
    std::vector<Frame> collect();

private:
    double fps_;
    bool finite_;
    Pull pull_;
};

/// Log-spaced latency buckets from 1 us doubling, plus raw samples so
/// exact quantiles can be reported.
class LatencyHistogram {
public:
    static constexpr std::size_t kBuckets = 32;

    void record(double seconds);
    std::size_t count() const { return samples_.size(); }
    double quantile(double q) const;
    double median() const { return quantile(0.5); }
    double max() const;
    const std::vector<std::uint64_t>& buckets() const { return buckets_; }
    static double bucket_upper_bound(std::size_t i);
    const std::vector<double>& samples() const { return samples_; }

private:
    std::vector<std::uint64_t> buckets_ = std::vector<std::uint64_t>(kBuckets, 0);
    std::vector<double> samples_;
};

struct RuntimeMetrics {
    LatencyHistogram write_latency;
    LatencyHistogram snapshot_latency;
    std::uint64_t epochs_completed = 0;
    std::uint64_t nonconverged_updates = 0;
    std::vector<std::size_t> tokens_per_epoch;  // token count after epoch i+1
    bool aborted = false;
    std::string diagnostic;
};

/// Shared handle to a memory with one writer and any number of readers.
///
/// The writer applies each frame to its private StarMemory and then
/// publishes a complete immutable snapshot. Readers only copy the
/// published pointer, so they never see a partially applied epoch and
/// never hold up the next write.
class MemoryHandle {
public:
    explicit MemoryHandle(MemoryConfig config = {});

    /// Writer side. Not safe to call from two threads at once.
    void write(const Frame& e);

    /// Latest published snapshot, or nullptr before the first write.
    std::shared_ptr<const MemorySnapshot> latest() const;

    std::uint64_t published_epoch() const { return published_epoch_.load(std::memory_order_acquire); }

    RuntimeMetrics metrics() const;
    void record_snapshot_latency(double seconds);
    void mark_aborted(std::string diagnostic);

    const MemoryConfig& config() const { return config_; }

private:
    MemoryConfig config_;
    StarMemory memory_;  // writer-owned

    mutable std::mutex publish_mutex_;
    std::shared_ptr<const MemorySnapshot> published_;
    std::atomic<std::uint64_t> published_epoch_{0};

    mutable std::mutex metrics_mutex_;
    RuntimeMetrics metrics_;
};

enum class Pacing { Fast, RealTime };

/// Writes every frame of `source` in order. Real-time pacing sleeps until
/// each frame's timestamp, measured from the first frame. A non-increasing
/// timestamp or frame index stops the stream with a diagnostic.
RuntimeMetrics run_frame_handler(StreamSource& source, MemoryHandle& mem, Pacing pacing = Pacing::Fast);

/// Consistent read of the latest published epoch. Throws EmptyMemoryError
/// before the first completed write.
std::shared_ptr<const MemorySnapshot> query_snapshot(MemoryHandle& mem);

}  // namespace starmem
