// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "starmem/stream_runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace starmem {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

StreamSource StreamSource::from_frames(double fps, std::vector<Frame> frames) {
    auto shared = std::make_shared<std::vector<Frame>>(std::move(frames));
    auto cursor = std::make_shared<std::size_t>(0);
    return StreamSource(fps, [shared, cursor]() -> std::optional<Frame> {
        if (*cursor >= shared->size()) return std::nullopt;
        return (*shared)[(*cursor)++];
    });
}

std::vector<Frame> StreamSource::collect() {
    STARMEM_EXPECT(finite_, "collect on an unbounded source");
    std::vector<Frame> out;
    while (auto f = next()) out.push_back(std::move(*f));
    return out;
}

void LatencyHistogram::record(double seconds) {
    samples_.push_back(seconds);
    std::size_t i = 0;
    while (i + 1 < kBuckets && seconds > bucket_upper_bound(i)) ++i;
    ++buckets_[i];
}

double LatencyHistogram::bucket_upper_bound(std::size_t i) { return 1e-6 * std::ldexp(1.0, static_cast<int>(i)); }

double LatencyHistogram::quantile(double q) const {
    if (samples_.empty()) return 0.0;
    std::vector<double> sorted = samples_;
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

double LatencyHistogram::max() const {
    return samples_.empty() ? 0.0 : *std::max_element(samples_.begin(), samples_.end());
}

MemoryHandle::MemoryHandle(MemoryConfig config) : config_(config), memory_(std::move(config)) {}

void MemoryHandle::write(const Frame& e) {
    const auto start = Clock::now();
    memory_.write_frame(e);
    auto snap = std::make_shared<const MemorySnapshot>(memory_.snapshot());
    const std::uint64_t epoch = snap->epoch;
    const std::size_t tokens = snap->token_count();
    {
        std::lock_guard lock(publish_mutex_);
        published_ = std::move(snap);
    }
    published_epoch_.store(epoch, std::memory_order_release);
    const double elapsed = seconds_since(start);

    std::lock_guard lock(metrics_mutex_);
    metrics_.write_latency.record(elapsed);
    metrics_.epochs_completed = epoch;
    metrics_.nonconverged_updates = memory_.nonconverged_updates();
    metrics_.tokens_per_epoch.push_back(tokens);
}

std::shared_ptr<const MemorySnapshot> MemoryHandle::latest() const {
    std::lock_guard lock(publish_mutex_);
    return published_;
}

RuntimeMetrics MemoryHandle::metrics() const {
    std::lock_guard lock(metrics_mutex_);
    return metrics_;
}

void MemoryHandle::record_snapshot_latency(double seconds) {
    std::lock_guard lock(metrics_mutex_);
    metrics_.snapshot_latency.record(seconds);
}

void MemoryHandle::mark_aborted(std::string diagnostic) {
    std::lock_guard lock(metrics_mutex_);
    metrics_.aborted = true;
    metrics_.diagnostic = std::move(diagnostic);
}

RuntimeMetrics run_frame_handler(StreamSource& source, MemoryHandle& mem, Pacing pacing) {
    std::optional<double> first_ts;
    std::optional<double> last_ts;
    Clock::time_point origin;
    while (auto frame = source.next()) {
        const double ts = frame->timestamp_s();
        if (last_ts && !(ts > *last_ts)) {
            mem.mark_aborted("timestamp " + std::to_string(ts) + " s does not follow " + std::to_string(*last_ts) +
                             " s at frame " + std::to_string(frame->frame_index()));
            break;
        }
        if (!first_ts) {
            first_ts = ts;
            origin = Clock::now();
        } else if (pacing == Pacing::RealTime) {
            std::this_thread::sleep_until(origin + std::chrono::duration_cast<Clock::duration>(
                                                       std::chrono::duration<double>(ts - *first_ts)));
        }
        last_ts = ts;
        try {
            mem.write(*frame);
        } catch (const OrderingError& err) {
            mem.mark_aborted(err.what());
            break;
        }
    }
    return mem.metrics();
}

std::shared_ptr<const MemorySnapshot> query_snapshot(MemoryHandle& mem) {
    const auto start = Clock::now();
    auto snap = mem.latest();
    if (!snap) throw EmptyMemoryError("no frame has been written yet");
    mem.record_snapshot_latency(seconds_since(start));
    return snap;
}

}  // namespace starmem
