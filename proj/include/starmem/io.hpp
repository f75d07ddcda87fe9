// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starmem/config.hpp"
#include "starmem/star_memory.hpp"
#include "starmem/stream_runtime.hpp"
#include "starmem/synth.hpp"

namespace starmem {

// Feature stream file, little-endian throughout.
//
//   offset  size  field
//        0     4  magic "FVSF"
//        4     2  format version (1)
//        6     2  reserved, zero
//        8     4  D
//       12     4  P
//       16     4  fps (f32)
//       20     4  reserved, zero
//       24     8  frame_count
//       32     4  flags
//       36     4  reserved, zero
//       40        frame_count records of
//                 { frame_index u64, timestamp_s f64, P*P*D values f32 }
inline constexpr std::uint16_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 40;

struct StreamHeader {
    std::uint16_t version = kStreamVersion;
    std::uint32_t dim = 0;
    std::uint32_t side = 0;
    float fps = 1.0f;
    std::uint64_t frame_count = 0;
    std::uint32_t flags = 0;

    std::size_t record_bytes() const { return 16 + 4 * static_cast<std::size_t>(side) * side * dim; }
    bool operator==(const StreamHeader&) const = default;
};

std::string encode_stream(const StreamHeader& header, std::span<const Frame> frames);
void write_stream_file(const std::filesystem::path& path, float fps, std::span<const Frame> frames,
                       std::uint32_t flags = 0);

/// Sequential reader. The header is validated on open, including that the
/// file size matches the declared frame count; timestamps and frame
/// indices are checked to increase as records are read.
class StreamFileReader {
public:
    explicit StreamFileReader(const std::filesystem::path& path);

    const StreamHeader& header() const { return header_; }
    std::optional<Frame> next();

private:
    std::ifstream in_;
    StreamHeader header_;
    std::uint64_t read_ = 0;
    std::optional<double> last_ts_;
    std::optional<std::uint64_t> last_index_;
    std::vector<char> record_;
};

std::vector<Frame> read_stream_file(const std::filesystem::path& path, StreamHeader* header = nullptr);
StreamSource open_stream_source(const std::filesystem::path& path);
bool is_stream_file(const std::filesystem::path& path);

// Snapshot file: magic "STSN", version, memory config, frame range, four
// store sections, per-store metadata arrays, then the f32 token matrix.
inline constexpr std::uint16_t kSnapshotVersion = 1;

std::string encode_snapshot(const MemorySnapshot& snapshot);
MemorySnapshot decode_snapshot(std::string_view bytes);
void write_snapshot_file(const std::filesystem::path& path, const MemorySnapshot& snapshot);
MemorySnapshot read_snapshot_file(const std::filesystem::path& path);

/// Human-readable summary: per-store counts, epochs and metadata.
std::string snapshot_sidecar_json(const MemorySnapshot& snapshot);

struct RunConfig {
    MemoryConfig memory;
    Pacing pacing = Pacing::Fast;
    WindowSpec window;
    std::optional<std::uint64_t> seed;
};

/// JSON run configuration; unknown keys are rejected and the memory
/// config is validated before returning.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

/// JSON event script. Each event gives "duration_s" (or "start_s" and
/// "end_s"), "std", and "mean" as an explicit array, a constant, or
/// {"seed", "scale", "offset"} for a seeded Gaussian draw.
EventScript parse_script(std::string_view text);
EventScript load_script(const std::filesystem::path& path);

/// "epoch,token_count" rows, one per completed epoch.
std::string tokens_csv(const RuntimeMetrics& metrics);

/// "metric,value" rows: frame counts, budget and write latency quantiles.
std::string metrics_csv(const RuntimeMetrics& metrics, std::size_t final_token_count, std::size_t max_size);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace starmem
