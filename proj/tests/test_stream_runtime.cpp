// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "starmem/stream_runtime.hpp"
#include "support.hpp"

using namespace starmem;
using testing_support::random_frame;

namespace {

MemoryConfig small_config() {
    MemoryConfig c;
    c.p_spa = 4;
    c.p_tem = 2;
    c.n_buff = 30;
    c.n_spa = 2;
    c.n_tem = 6;
    c.n_abs = 4;
    c.n_ret = 2;
    return c;
}

std::vector<Frame> random_frames(std::size_t n, int side, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Frame> out;
    for (std::size_t t = 0; t < n; ++t) out.push_back(random_frame(rng, t, side, dim));
    return out;
}

}  // namespace

TEST(FrameHandler, ProcessesEveryFrame) {
    auto source = StreamSource::from_frames(1.0, random_frames(100, 4, 3, 1));
    MemoryHandle mem(small_config());
    const auto m = run_frame_handler(source, mem);
    EXPECT_FALSE(m.aborted);
    EXPECT_EQ(m.epochs_completed, 100u);
    EXPECT_EQ(m.write_latency.count(), 100u);
    EXPECT_EQ(m.tokens_per_epoch.size(), 100u);
    EXPECT_EQ(query_snapshot(mem)->epoch, 100u);
    EXPECT_EQ(m.tokens_per_epoch.back(), small_config().max_size());
}

TEST(FrameHandler, EmptySource) {
    auto source = StreamSource::from_frames(1.0, {});
    MemoryHandle mem(small_config());
    const auto m = run_frame_handler(source, mem);
    EXPECT_EQ(m.epochs_completed, 0u);
    EXPECT_EQ(m.write_latency.count(), 0u);
    EXPECT_TRUE(m.tokens_per_epoch.empty());
    EXPECT_THROW(query_snapshot(mem), EmptyMemoryError);
}

TEST(FrameHandler, RealTimePacing) {
    auto source = StreamSource::from_frames(1.0, random_frames(5, 4, 2, 2));
    MemoryHandle mem(small_config());
    const auto start = std::chrono::steady_clock::now();
    run_frame_handler(source, mem, Pacing::RealTime);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_GE(wall, 4.0);
    EXPECT_LT(wall, 6.0);
}

TEST(FrameHandler, StopsOnNonIncreasingTimestamp) {
    auto frames = random_frames(10, 4, 2, 3);
    frames[6] = Frame(frames[6].frame_index(), frames[5].timestamp_s(), 4, frames[6].values());
    auto source = StreamSource::from_frames(1.0, frames);
    MemoryHandle mem(small_config());
    const auto m = run_frame_handler(source, mem);
    EXPECT_TRUE(m.aborted);
    EXPECT_EQ(m.epochs_completed, 6u);
    EXPECT_FALSE(m.diagnostic.empty());
    EXPECT_EQ(query_snapshot(mem)->epoch, 6u);
}

TEST(FrameHandler, StopsOnRepeatedFrameIndex) {
    auto frames = random_frames(10, 4, 2, 4);
    frames[3] = Frame(2, frames[3].timestamp_s(), 4, frames[3].values());
    auto source = StreamSource::from_frames(1.0, frames);
    MemoryHandle mem(small_config());
    const auto m = run_frame_handler(source, mem);
    EXPECT_TRUE(m.aborted);
    EXPECT_EQ(m.epochs_completed, 3u);
}

TEST(QuerySnapshot, MatchesEpochSingleThreaded) {
    MemoryHandle mem(small_config());
    const auto frames = random_frames(7, 4, 2, 5);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        mem.write(frames[i]);
        const auto s = query_snapshot(mem);
        EXPECT_EQ(s->epoch, i + 1);
        EXPECT_EQ(mem.published_epoch(), i + 1);
    }
}

TEST(QuerySnapshot, ConcurrentReadersSeeWholeEpochs) {
    MemoryHandle mem(small_config());
    const auto frames = random_frames(400, 4, 3, 6);
    mem.write(frames[0]);
    std::atomic<bool> done{false};
    std::atomic<std::uint64_t> torn{0}, regressions{0}, reads{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 4; ++r) {
        readers.emplace_back([&] {
            std::uint64_t last = 0;
            while (!done.load()) {
                const auto s = query_snapshot(mem);
                if (!s->consistent() || s->token_count() != s->spatial.rows() + s->temporal.rows() +
                                                                s->abstract.rows() + s->retrieved.rows()) {
                    ++torn;
                }
                if (s->epoch < last) ++regressions;
                last = s->epoch;
                ++reads;
                std::this_thread::yield();
            }
        });
    }
    for (std::size_t i = 1; i < frames.size(); ++i) mem.write(frames[i]);
    done = true;
    for (auto& t : readers) t.join();
    EXPECT_EQ(torn.load(), 0u);
    EXPECT_EQ(regressions.load(), 0u);
    EXPECT_GT(reads.load(), 0u);
    EXPECT_EQ(query_snapshot(mem)->epoch, 400u);
}

TEST(QuerySnapshot, ReadersDoNotStallTheWriter) {
    // Readers poll at a realistic rate; writer medians with and without
    // them must stay within 2x. The host may have a single core, so the
    // readers sleep between polls rather than spin.
    MemoryConfig c;  // default capacities
    const auto frames = random_frames(360, 8, 32, 7);
    auto run = [&](int reader_count) {
        MemoryHandle mem(c);
        mem.write(frames[0]);
        std::atomic<bool> done{false};
        std::vector<std::thread> readers;
        for (int r = 0; r < reader_count; ++r) {
            readers.emplace_back([&] {
                while (!done.load()) {
                    auto s = query_snapshot(mem);
                    std::this_thread::sleep_for(std::chrono::microseconds(500));
                }
            });
        }
        for (std::size_t i = 1; i < frames.size(); ++i) mem.write(frames[i]);
        done = true;
        for (auto& t : readers) t.join();
        return mem.metrics().write_latency.median();
    };
    const double alone = run(0);
    const double shared = run(4);
    EXPECT_LE(shared, 2.0 * alone + 1e-4) << "alone " << alone << " s, with readers " << shared << " s";
}

TEST(LatencyHistogram, Quantiles) {
    LatencyHistogram h;
    for (int i = 1; i <= 101; ++i) h.record(i * 1e-3);
    EXPECT_NEAR(h.median(), 51e-3, 1e-12);
    EXPECT_NEAR(h.max(), 101e-3, 1e-12);
    EXPECT_NEAR(h.quantile(0.0), 1e-3, 1e-12);
    std::uint64_t total = 0;
    for (auto b : h.buckets()) total += b;
    EXPECT_EQ(total, 101u);
    EXPECT_EQ(LatencyHistogram::bucket_upper_bound(0), 1e-6);
    EXPECT_EQ(LatencyHistogram::bucket_upper_bound(10), 1024e-6);
}
