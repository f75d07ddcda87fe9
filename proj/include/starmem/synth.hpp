// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "starmem/star_memory.hpp"
#include "starmem/stream_runtime.hpp"

namespace starmem {

/// A stationary segment: frames are mean + N(0, std^2) per value.
struct Event {
    double start_s = 0.0;
    double end_s = 0.0;
    Vector<float> mean;  // side^2 * dim, row-major (row, col, channel)
    double std = 0.0;
};

struct EventScript {
    double fps = 1.0;
    int side = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<Event> events;

    /// Events must be contiguous from t=0, chronological, each at least
    /// one frame long, with means of the right length.
    void validate() const;

    std::vector<std::size_t> event_frame_counts() const;
    std::size_t frame_count() const;

    /// Minimum pairwise RMS distance between event means over the
    /// largest event std. Infinite when every std is zero or with one event.
    double separation_ratio() const;
};

struct SyntheticStream {
    std::vector<Frame> frames;
    std::vector<int> labels;  // ground-truth event id per frame; evaluation only

    StreamSource source(double fps) const { return StreamSource::from_frames(fps, frames); }
};

/// Deterministic in the script (seed included). Frame j of an event sits
/// at start_s + j / fps; frame indices run from 0 over the whole stream.
SyntheticStream generate_stream(const EventScript& script);

/// Ground-truth labels without generating any values.
std::vector<int> script_labels(const EventScript& script);

enum class WindowMode { Global, Breakpoint };

struct WindowSpec {
    WindowMode mode = WindowMode::Global;
    double breakpoint_s = 0.0;
    double half_width_s = 15.0;

    void validate() const;
    bool contains(double timestamp_s) const {
        return mode == WindowMode::Global ||
               (timestamp_s >= breakpoint_s - half_width_s && timestamp_s <= breakpoint_s + half_width_s);
    }
};

/// Global mode passes the source through. Breakpoint mode keeps frames
/// with timestamps in [breakpoint - half_width, breakpoint + half_width],
/// inclusive. Throws EmptyWindowError when nothing falls inside.
StreamSource apply_window(StreamSource source, const WindowSpec& window);
std::vector<Frame> apply_window(const std::vector<Frame>& frames, const WindowSpec& window);

struct FidelityReport {
    std::size_t events_present = 0;  // events with frames in the processed range
    double coverage = 0.0;           // fraction of present events with a centroid in tolerance
    double weight_l1 = 0.0;          // L1 between cluster-mass and duration distributions
    double purity = 0.0;             // retrieved frames matching their cluster's dominant event
    std::vector<int> cluster_event;  // dominant event per temporal cluster
    std::vector<bool> covered;       // per event
};

/// A centroid covers an event when its RMS deviation from the event mean
/// pooled to p_tem is within 3 * std of that event (plus 1e-9).
/// Clusters are matched to the event with the nearest pooled mean.
FidelityReport evaluate_compression(const MemorySnapshot& snapshot, const EventScript& script,
                                    std::span<const int> labels);

}  // namespace starmem
