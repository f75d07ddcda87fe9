// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "starmem/synth.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>

namespace starmem {

namespace {

std::size_t frames_in(const Event& e, double fps) {
    return static_cast<std::size_t>(std::llround((e.end_s - e.start_s) * fps));
}

double rms(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

}  // namespace

void EventScript::validate() const {
    STARMEM_EXPECT(std::isfinite(fps) && fps > 0.0, "script: fps must be positive");
    STARMEM_EXPECT(side > 0 && dim > 0, "script: side and dim must be positive");
    STARMEM_EXPECT(!events.empty(), "script: no events");
    const auto len = static_cast<Eigen::Index>(side) * side * dim;
    double expected_start = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        const std::string where = "script: event " + std::to_string(i);
        STARMEM_EXPECT(std::abs(e.start_s - expected_start) < 1e-9, where + " is not contiguous with its predecessor");
        STARMEM_EXPECT(e.end_s > e.start_s, where + " has zero or negative duration");
        STARMEM_EXPECT(frames_in(e, fps) > 0, where + " spans no frames");
        STARMEM_EXPECT(e.mean.size() == len, where + " mean has the wrong length");
        STARMEM_EXPECT(e.mean.allFinite(), where + " mean is not finite");
        STARMEM_EXPECT(std::isfinite(e.std) && e.std >= 0.0, where + " std must be non-negative");
        expected_start = e.end_s;
    }
}

std::vector<std::size_t> EventScript::event_frame_counts() const {
    std::vector<std::size_t> counts;
    for (const auto& e : events) counts.push_back(frames_in(e, fps));
    return counts;
}

std::size_t EventScript::frame_count() const {
    std::size_t total = 0;
    for (auto c : event_frame_counts()) total += c;
    return total;
}

double EventScript::separation_ratio() const {
    double max_std = 0.0;
    for (const auto& e : events) max_std = std::max(max_std, e.std);
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < events.size(); ++a) {
        for (std::size_t b = a + 1; b < events.size(); ++b) {
            const Eigen::VectorXd diff = events[a].mean.cast<double>() - events[b].mean.cast<double>();
            min_dist = std::min(min_dist, rms(diff));
        }
    }
    if (max_std == 0.0) return std::numeric_limits<double>::infinity();
    return min_dist / max_std;
}

SyntheticStream generate_stream(const EventScript& script) {
    script.validate();
    std::mt19937_64 rng(script.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto cells = static_cast<Eigen::Index>(script.side) * script.side;

    SyntheticStream out;
    std::uint64_t index = 0;
    for (std::size_t id = 0; id < script.events.size(); ++id) {
        const auto& e = script.events[id];
        const std::size_t n = frames_in(e, script.fps);
        for (std::size_t j = 0; j < n; ++j) {
            TokenMatrix<float> values(cells, script.dim);
            float* data = values.data();
            for (Eigen::Index v = 0; v < values.size(); ++v) {
                const double x = static_cast<double>(e.mean(v)) + (e.std > 0.0 ? e.std * noise(rng) : 0.0);
                data[v] = static_cast<float>(x);
            }
            const double ts = e.start_s + static_cast<double>(j) / script.fps;
            out.frames.emplace_back(index++, ts, script.side, std::move(values));
            out.labels.push_back(static_cast<int>(id));
        }
    }
    return out;
}

std::vector<int> script_labels(const EventScript& script) {
    script.validate();
    std::vector<int> labels;
    const auto counts = script.event_frame_counts();
    for (std::size_t id = 0; id < counts.size(); ++id) labels.insert(labels.end(), counts[id], static_cast<int>(id));
    return labels;
}

void WindowSpec::validate() const {
    if (mode == WindowMode::Breakpoint) {
        STARMEM_EXPECT(std::isfinite(breakpoint_s) && breakpoint_s >= 0.0, "window: breakpoint must be non-negative");
        STARMEM_EXPECT(std::isfinite(half_width_s) && half_width_s >= 0.0, "window: half width must be non-negative");
    }
}

StreamSource apply_window(StreamSource source, const WindowSpec& window) {
    window.validate();
    if (window.mode == WindowMode::Global) return source;

    // Find the first frame inside the window eagerly so an empty window is
    // reported up front, then filter lazily.
    auto upstream = std::make_shared<StreamSource>(std::move(source));
    std::optional<Frame> first;
    while (auto f = upstream->next()) {
        if (window.contains(f->timestamp_s())) {
            first = std::move(f);
            break;
        }
        if (f->timestamp_s() > window.breakpoint_s + window.half_width_s) break;
    }
    if (!first) {
        throw EmptyWindowError("no frames within " + std::to_string(window.half_width_s) + " s of breakpoint " +
                               std::to_string(window.breakpoint_s) + " s");
    }
    auto pending = std::make_shared<std::optional<Frame>>(std::move(first));
    auto done = std::make_shared<bool>(false);
    return StreamSource(
        upstream->fps(),
        [upstream, pending, done, window]() -> std::optional<Frame> {
            if (*pending) {
                std::optional<Frame> out = std::move(*pending);
                pending->reset();
                return out;
            }
            if (*done) return std::nullopt;
            auto f = upstream->next();
            if (!f || !window.contains(f->timestamp_s())) {
                *done = true;  // timestamps increase, so nothing later can re-enter
                return std::nullopt;
            }
            return f;
        },
        true);
}

std::vector<Frame> apply_window(const std::vector<Frame>& frames, const WindowSpec& window) {
    auto source = apply_window(StreamSource::from_frames(1.0, frames), window);
    return source.collect();
}

FidelityReport evaluate_compression(const MemorySnapshot& snapshot, const EventScript& script,
                                    std::span<const int> labels) {
    script.validate();
    STARMEM_EXPECT(labels.size() == script.frame_count(), "evaluate: label count does not match the script");
    STARMEM_EXPECT(snapshot.dim == script.dim, "evaluate: snapshot dim does not match the script");
    STARMEM_EXPECT(snapshot.last_frame_index < labels.size(), "evaluate: snapshot covers frames beyond the script");
    STARMEM_EXPECT(snapshot.first_frame_index <= snapshot.last_frame_index, "evaluate: bad frame range");
    const std::size_t num_events = script.events.size();
    const int p_tem = snapshot.config.p_tem;

    std::vector<Eigen::VectorXd> pooled_means;
    for (const auto& e : script.events) {
        const auto map = unflatten<float>(e.mean, script.side, script.dim);
        // Rounded to f32 like the snapshot's centroid tokens.
        const Vector<float> pooled = flatten(avg_pool_as<double>(map, p_tem, snapshot.config.pooling)).cast<float>();
        pooled_means.push_back(pooled.cast<double>());
    }

    std::vector<std::size_t> present(num_events, 0);
    for (auto i = snapshot.first_frame_index; i <= snapshot.last_frame_index; ++i) {
        const int id = labels[static_cast<std::size_t>(i)];
        STARMEM_EXPECT(id >= 0 && static_cast<std::size_t>(id) < num_events, "evaluate: label out of range");
        ++present[static_cast<std::size_t>(id)];
    }
    STARMEM_EXPECT(snapshot.temporal_weights.size() == snapshot.temporal.items, "evaluate: malformed snapshot");

    FidelityReport report;
    report.covered.assign(num_events, false);
    std::vector<double> cluster_mass(num_events, 0.0);
    double total_weight = 0.0;
    for (std::size_t c = 0; c < snapshot.temporal.items; ++c) {
        const Eigen::VectorXd centroid = snapshot.temporal_centroid(c).cast<double>();
        STARMEM_EXPECT(centroid.size() == pooled_means.front().size(), "evaluate: p_tem mismatch with the script");
        int nearest = 0;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < num_events; ++e) {
            const double d = (centroid - pooled_means[e]).squaredNorm();
            if (d < nearest_d) {
                nearest_d = d;
                nearest = static_cast<int>(e);
            }
            const double tolerance = 3.0 * script.events[e].std + 1e-9;
            if (rms(centroid - pooled_means[e]) <= tolerance) report.covered[e] = true;
        }
        report.cluster_event.push_back(nearest);
        cluster_mass[static_cast<std::size_t>(nearest)] += snapshot.temporal_weights[c];
        total_weight += snapshot.temporal_weights[c];
    }

    std::size_t covered_present = 0;
    std::size_t processed = 0;
    for (std::size_t e = 0; e < num_events; ++e) {
        processed += present[e];
        if (present[e] == 0) continue;
        ++report.events_present;
        if (report.covered[e]) ++covered_present;
    }
    report.coverage = report.events_present == 0
                          ? 0.0
                          : static_cast<double>(covered_present) / static_cast<double>(report.events_present);
    for (std::size_t e = 0; e < num_events; ++e) {
        const double p = total_weight > 0.0 ? cluster_mass[e] / total_weight : 0.0;
        const double q = static_cast<double>(present[e]) / static_cast<double>(processed);
        report.weight_l1 += std::abs(p - q);
    }

    const auto ranked = rank_by_weight(snapshot.temporal_weights, snapshot.temporal_newest);
    std::size_t pure = 0;
    for (std::size_t r = 0; r < snapshot.retrieved_frame_indices.size(); ++r) {
        const auto frame = snapshot.retrieved_frame_indices[r];
        const auto rank = snapshot.retrieved_cluster_ranks[r];
        STARMEM_EXPECT(frame < labels.size() && rank < ranked.size(), "evaluate: retrieved entry out of range");
        if (labels[static_cast<std::size_t>(frame)] == report.cluster_event[ranked[rank]]) ++pure;
    }
    report.purity = snapshot.retrieved_frame_indices.empty()
                        ? 1.0
                        : static_cast<double>(pure) / static_cast<double>(snapshot.retrieved_frame_indices.size());
    return report;
}

}  // namespace starmem
