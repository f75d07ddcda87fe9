// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#include "starmem/io.hpp"

#include <bit>
#include <cstring>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace starmem {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        out_.append(raw, sizeof(T));
    }
    void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
    void pad_to(std::size_t alignment) {
        while (out_.size() % alignment != 0) out_.push_back('\0');
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view in) : in_(in) {}

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, need(sizeof(T)), sizeof(T));
        return value;
    }
    void bytes(void* dst, std::size_t n) { std::memcpy(dst, need(n), n); }
    void skip_pad(std::size_t alignment) {
        while (pos_ % alignment != 0) {
            if (get<char>() != '\0') throw FormatError("non-zero padding byte");
        }
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const char* need(std::size_t n) {
        if (in_.size() - pos_ < n) throw FormatError("unexpected end of data");
        const char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

void put_frame_values(ByteWriter& w, const Frame& f) {
    w.bytes(f.values().data(), sizeof(float) * static_cast<std::size_t>(f.size()));
}

StreamHeader parse_stream_header(std::string_view raw) {
    ByteReader r(raw);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "FVSF", 4) != 0) throw FormatError("not a feature stream file (bad magic)");
    StreamHeader h;
    h.version = r.get<std::uint16_t>();
    if (h.version != kStreamVersion) throw FormatError("unsupported stream version " + std::to_string(h.version));
    if (r.get<std::uint16_t>() != 0) throw FormatError("non-zero reserved header field");
    h.dim = r.get<std::uint32_t>();
    h.side = r.get<std::uint32_t>();
    h.fps = r.get<float>();
    if (r.get<std::uint32_t>() != 0) throw FormatError("non-zero reserved header field");
    h.frame_count = r.get<std::uint64_t>();
    h.flags = r.get<std::uint32_t>();
    if (r.get<std::uint32_t>() != 0) throw FormatError("non-zero reserved header field");
    if (h.dim == 0 || h.side == 0) throw FormatError("stream header has zero D or P");
    if (!(h.fps > 0.0f) || !std::isfinite(h.fps)) throw FormatError("stream header fps must be positive");
    return h;
}

// --- JSON helpers -----------------------------------------------------------

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw FormatError(where + ": expected an object");
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!keys.count(key)) throw FormatError(where + ": unknown key \"" + key + "\"");
    }
}

template <typename T>
T get_number(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw FormatError(where + ": \"" + key + "\" must be a number");
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw FormatError(where + ": \"" + key + "\" must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
                throw FormatError(where + ": \"" + key + "\" must be non-negative");
            }
        }
    }
    return v.get<T>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string()) throw FormatError(where + ": \"" + key + "\" must be a string");
    return obj.at(key).get<std::string>();
}

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& err) {
        throw FormatError(std::string(what) + ": " + err.what());
    }
}

Vector<float> parse_mean(const json& spec, Eigen::Index length, const std::string& where) {
    Vector<float> mean(length);
    if (spec.is_number()) {
        mean.setConstant(spec.get<float>());
    } else if (spec.is_array()) {
        if (static_cast<Eigen::Index>(spec.size()) != length) {
            throw FormatError(where + ": mean has " + std::to_string(spec.size()) + " values, expected " +
                              std::to_string(length));
        }
        for (Eigen::Index i = 0; i < length; ++i) {
            const auto& v = spec[static_cast<std::size_t>(i)];
            if (!v.is_number()) throw FormatError(where + ": mean values must be numbers");
            mean(i) = v.get<float>();
        }
    } else if (spec.is_object()) {
        reject_unknown(spec, {"seed", "scale", "offset"}, where + ".mean");
        const auto seed = get_number<std::uint64_t>(spec, "seed", 0, where);
        const auto scale = get_number<double>(spec, "scale", 1.0, where);
        const auto offset = get_number<double>(spec, "offset", 0.0, where);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> draw(offset, scale);
        for (Eigen::Index i = 0; i < length; ++i) mean(i) = static_cast<float>(draw(rng));
    } else {
        throw FormatError(where + ": mean must be a number, an array or an object");
    }
    return mean;
}

}  // namespace

// --- Stream files -----------------------------------------------------------

std::string encode_stream(const StreamHeader& header, std::span<const Frame> frames) {
    STARMEM_EXPECT(header.frame_count == frames.size(), "encode_stream: frame_count mismatch");
    ByteWriter w;
    w.bytes("FVSF", 4);
    w.put<std::uint16_t>(header.version);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(header.dim);
    w.put<std::uint32_t>(header.side);
    w.put<float>(header.fps);
    w.put<std::uint32_t>(0);
    w.put<std::uint64_t>(header.frame_count);
    w.put<std::uint32_t>(header.flags);
    w.put<std::uint32_t>(0);
    std::optional<double> last_ts;
    for (const auto& f : frames) {
        STARMEM_EXPECT(f.side() == static_cast<int>(header.side) && f.dim() == static_cast<int>(header.dim),
                       "encode_stream: frame shape differs from header");
        STARMEM_EXPECT(!last_ts || f.timestamp_s() > *last_ts, "encode_stream: timestamps must strictly increase");
        last_ts = f.timestamp_s();
        w.put<std::uint64_t>(f.frame_index());
        w.put<double>(f.timestamp_s());
        put_frame_values(w, f);
    }
    return w.take();
}

void write_stream_file(const std::filesystem::path& path, float fps, std::span<const Frame> frames,
                       std::uint32_t flags) {
    StreamHeader h;
    h.fps = fps;
    h.flags = flags;
    h.frame_count = frames.size();
    if (!frames.empty()) {
        h.side = static_cast<std::uint32_t>(frames.front().side());
        h.dim = static_cast<std::uint32_t>(frames.front().dim());
    }
    write_file(path, encode_stream(h, frames));
}

StreamFileReader::StreamFileReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open stream file " + path.string());
    char raw[kStreamHeaderBytes];
    if (!in_.read(raw, kStreamHeaderBytes)) throw FormatError("stream file shorter than its header");
    header_ = parse_stream_header(std::string_view(raw, kStreamHeaderBytes));
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw FormatError("cannot stat stream file " + path.string());
    const auto expected = kStreamHeaderBytes + header_.frame_count * header_.record_bytes();
    if (size != expected) {
        throw FormatError("stream body holds " + std::to_string(size - kStreamHeaderBytes) + " bytes, header declares " +
                          std::to_string(header_.frame_count) + " frames (" +
                          std::to_string(expected - kStreamHeaderBytes) + " bytes)");
    }
    record_.resize(header_.record_bytes());
}

std::optional<Frame> StreamFileReader::next() {
    if (read_ == header_.frame_count) return std::nullopt;
    if (!in_.read(record_.data(), static_cast<std::streamsize>(record_.size()))) {
        throw FormatError("truncated stream record " + std::to_string(read_));
    }
    ByteReader r(std::string_view(record_.data(), record_.size()));
    const auto index = r.get<std::uint64_t>();
    const auto ts = r.get<double>();
    if (!std::isfinite(ts) || ts < 0.0) throw FormatError("invalid timestamp in record " + std::to_string(read_));
    if (last_ts_ && !(ts > *last_ts_)) throw FormatError("timestamps not strictly increasing at record " + std::to_string(read_));
    if (last_index_ && index <= *last_index_) throw FormatError("frame indices not increasing at record " + std::to_string(read_));
    const auto side = static_cast<Eigen::Index>(header_.side);
    TokenMatrix<float> values(side * side, static_cast<Eigen::Index>(header_.dim));
    r.bytes(values.data(), sizeof(float) * static_cast<std::size_t>(values.size()));
    if (!values.allFinite()) throw FormatError("non-finite value in record " + std::to_string(read_));
    last_ts_ = ts;
    last_index_ = index;
    ++read_;
    return Frame(index, ts, static_cast<int>(header_.side), std::move(values));
}

std::vector<Frame> read_stream_file(const std::filesystem::path& path, StreamHeader* header) {
    StreamFileReader reader(path);
    if (header) *header = reader.header();
    std::vector<Frame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    return frames;
}

StreamSource open_stream_source(const std::filesystem::path& path) {
    auto reader = std::make_shared<StreamFileReader>(path);
    const double fps = reader->header().fps;
    return StreamSource(fps, [reader]() { return reader->next(); });
}

bool is_stream_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    return in.read(magic, 4) && std::memcmp(magic, "FVSF", 4) == 0;
}

// --- Snapshot files ---------------------------------------------------------

std::string encode_snapshot(const MemorySnapshot& s) {
    ByteWriter w;
    w.bytes("STSN", 4);
    w.put<std::uint16_t>(kSnapshotVersion);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.dim));
    const auto& c = s.config;
    for (int v : {c.p_spa, c.p_tem, c.p_abs, c.n_buff, c.n_spa, c.n_tem, c.n_abs, c.n_ret, c.dim}) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.distance));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.pooling));
    w.put<std::uint32_t>(c.temperature ? 1u : 0u);
    w.put<double>(c.temperature.value_or(0.0));
    w.put<std::uint64_t>(s.epoch);
    w.put<std::uint64_t>(s.first_frame_index);
    w.put<std::uint64_t>(s.last_frame_index);
    w.put<double>(s.temperature);
    for (const auto* sec : {&s.spatial, &s.temporal, &s.abstract, &s.retrieved}) {
        w.put<std::uint64_t>(sec->epoch);
        w.put<std::uint64_t>(sec->items);
        w.put<std::uint64_t>(sec->tokens_per_item);
        w.put<std::uint64_t>(sec->first_row);
    }
    for (auto v : s.spatial_frame_indices) w.put<std::uint64_t>(v);
    for (auto v : s.temporal_weights) w.put<double>(v);
    for (auto v : s.temporal_newest) w.put<std::uint64_t>(v);
    for (auto v : s.abstract_mass) w.put<double>(v);
    for (auto v : s.retrieved_frame_indices) w.put<std::uint64_t>(v);
    for (auto v : s.retrieved_cluster_ranks) w.put<std::uint32_t>(v);
    w.pad_to(8);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(s.tokens.rows()));
    w.bytes(s.tokens.data(), sizeof(float) * static_cast<std::size_t>(s.tokens.size()));
    return w.take();
}

MemorySnapshot decode_snapshot(std::string_view bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "STSN", 4) != 0) throw FormatError("not a snapshot file (bad magic)");
    const auto version = r.get<std::uint16_t>();
    if (version != kSnapshotVersion) throw FormatError("unsupported snapshot version " + std::to_string(version));
    if (r.get<std::uint16_t>() != 0) throw FormatError("non-zero reserved snapshot field");

    MemorySnapshot s;
    s.dim = static_cast<int>(r.get<std::uint32_t>());
    auto& c = s.config;
    for (int* v : {&c.p_spa, &c.p_tem, &c.p_abs, &c.n_buff, &c.n_spa, &c.n_tem, &c.n_abs, &c.n_ret, &c.dim}) {
        *v = static_cast<int>(r.get<std::uint32_t>());
    }
    const auto metric = r.get<std::uint32_t>();
    if (metric != static_cast<std::uint32_t>(DistanceMetric::SquaredEuclidean)) throw FormatError("unknown distance metric");
    const auto pooling = r.get<std::uint32_t>();
    if (pooling > static_cast<std::uint32_t>(PoolingMode::Adaptive)) throw FormatError("unknown pooling mode");
    c.pooling = static_cast<PoolingMode>(pooling);
    const auto has_temperature = r.get<std::uint32_t>();
    const auto temperature = r.get<double>();
    if (has_temperature > 1) throw FormatError("bad temperature flag");
    if (has_temperature) c.temperature = temperature;
    try {
        c.validate();
    } catch (const ConfigError& err) {
        throw FormatError(std::string("snapshot config invalid: ") + err.what());
    }

    s.epoch = r.get<std::uint64_t>();
    s.first_frame_index = r.get<std::uint64_t>();
    s.last_frame_index = r.get<std::uint64_t>();
    s.temperature = r.get<double>();
    std::size_t row = 0;
    for (auto* sec : {&s.spatial, &s.temporal, &s.abstract, &s.retrieved}) {
        sec->epoch = r.get<std::uint64_t>();
        sec->items = r.get<std::uint64_t>();
        sec->tokens_per_item = r.get<std::uint64_t>();
        sec->first_row = r.get<std::uint64_t>();
        if (sec->first_row != row) throw FormatError("snapshot sections are not contiguous");
        if (sec->items > (1u << 24) || sec->tokens_per_item > (1u << 24)) throw FormatError("snapshot section too large");
        row += sec->rows();
    }
    auto read_array = [&r](auto& out, std::size_t n) {
        using T = typename std::decay_t<decltype(out)>::value_type;
        if (r.remaining() < n * sizeof(T)) throw FormatError("unexpected end of data");
        out.resize(n);
        for (auto& v : out) v = r.get<T>();
    };
    read_array(s.spatial_frame_indices, s.spatial.items);
    read_array(s.temporal_weights, s.temporal.items);
    read_array(s.temporal_newest, s.temporal.items);
    read_array(s.abstract_mass, s.abstract.items);
    read_array(s.retrieved_frame_indices, s.retrieved.items);
    read_array(s.retrieved_cluster_ranks, s.retrieved.items);
    r.skip_pad(8);
    const auto token_count = r.get<std::uint64_t>();
    if (token_count != row) throw FormatError("token count does not match the store sections");
    if (s.dim <= 0) throw FormatError("snapshot dim must be positive");
    const auto values = token_count * static_cast<std::uint64_t>(s.dim);
    if (r.remaining() != values * sizeof(float)) throw FormatError("snapshot token payload has the wrong size");
    s.tokens.resize(static_cast<Eigen::Index>(token_count), s.dim);
    r.bytes(s.tokens.data(), values * sizeof(float));
    return s;
}

void write_snapshot_file(const std::filesystem::path& path, const MemorySnapshot& snapshot) {
    write_file(path, encode_snapshot(snapshot));
}

MemorySnapshot read_snapshot_file(const std::filesystem::path& path) { return decode_snapshot(read_file(path)); }

std::string snapshot_sidecar_json(const MemorySnapshot& s) {
    auto section = [](const SnapshotSection& sec) {
        return json{{"epoch", sec.epoch},
                    {"items", sec.items},
                    {"tokens_per_item", sec.tokens_per_item},
                    {"first_row", sec.first_row},
                    {"tokens", sec.rows()}};
    };
    json j;
    j["epoch"] = s.epoch;
    j["dim"] = s.dim;
    j["token_count"] = s.token_count();
    j["max_size"] = s.config.max_size();
    j["consistent"] = s.consistent();
    j["frame_range"] = {s.first_frame_index, s.last_frame_index};
    j["temperature"] = s.temperature;
    j["stores"] = {{"spatial", section(s.spatial)},
                   {"temporal", section(s.temporal)},
                   {"abstract", section(s.abstract)},
                   {"retrieved", section(s.retrieved)}};
    j["spatial_frame_indices"] = s.spatial_frame_indices;
    j["temporal_weights"] = s.temporal_weights;
    j["temporal_newest_frame_index"] = s.temporal_newest;
    j["abstract_mass"] = s.abstract_mass;
    j["retrieved_frame_indices"] = s.retrieved_frame_indices;
    j["retrieved_cluster_ranks"] = s.retrieved_cluster_ranks;
    return j.dump(2) + "\n";
}

// --- Run configs and scripts ------------------------------------------------

RunConfig parse_run_config(std::string_view text) {
    const json root = parse_json(text, "run config");
    reject_unknown(root, {"memory", "runtime", "window", "seed"}, "run config");
    RunConfig out;
    if (root.contains("memory")) {
        const auto& m = root.at("memory");
        const std::string where = "run config.memory";
        reject_unknown(m, {"p_spa", "p_tem", "p_abs", "n_buff", "n_spa", "n_tem", "n_abs", "n_ret", "dim", "distance",
                           "pooling", "temperature"},
                       where);
        auto& c = out.memory;
        c.p_spa = get_number<int>(m, "p_spa", c.p_spa, where);
        c.p_tem = get_number<int>(m, "p_tem", c.p_tem, where);
        c.p_abs = get_number<int>(m, "p_abs", c.p_abs, where);
        c.n_buff = get_number<int>(m, "n_buff", c.n_buff, where);
        c.n_spa = get_number<int>(m, "n_spa", c.n_spa, where);
        c.n_tem = get_number<int>(m, "n_tem", c.n_tem, where);
        c.n_abs = get_number<int>(m, "n_abs", c.n_abs, where);
        c.n_ret = get_number<int>(m, "n_ret", c.n_ret, where);
        c.dim = get_number<int>(m, "dim", c.dim, where);
        const auto distance = get_string(m, "distance", "squared_euclidean", where);
        if (distance != "squared_euclidean") throw FormatError(where + ": unsupported distance \"" + distance + "\"");
        const auto pooling = get_string(m, "pooling", "strict", where);
        if (pooling == "strict") {
            c.pooling = PoolingMode::Strict;
        } else if (pooling == "adaptive") {
            c.pooling = PoolingMode::Adaptive;
        } else {
            throw FormatError(where + ": pooling must be \"strict\" or \"adaptive\"");
        }
        if (m.contains("temperature")) c.temperature = get_number<double>(m, "temperature", 1.0, where);
    }
    if (root.contains("runtime")) {
        const auto& rt = root.at("runtime");
        reject_unknown(rt, {"realtime"}, "run config.runtime");
        if (rt.contains("realtime")) {
            if (!rt.at("realtime").is_boolean()) throw FormatError("run config.runtime: \"realtime\" must be a boolean");
            out.pacing = rt.at("realtime").get<bool>() ? Pacing::RealTime : Pacing::Fast;
        }
    }
    if (root.contains("window")) {
        const auto& w = root.at("window");
        const std::string where = "run config.window";
        reject_unknown(w, {"mode", "breakpoint_s", "half_width_s"}, where);
        const auto mode = get_string(w, "mode", "global", where);
        if (mode == "global") {
            out.window.mode = WindowMode::Global;
        } else if (mode == "breakpoint") {
            out.window.mode = WindowMode::Breakpoint;
            if (!w.contains("breakpoint_s")) throw FormatError(where + ": breakpoint mode requires \"breakpoint_s\"");
        } else {
            throw FormatError(where + ": mode must be \"global\" or \"breakpoint\"");
        }
        out.window.breakpoint_s = get_number<double>(w, "breakpoint_s", 0.0, where);
        out.window.half_width_s = get_number<double>(w, "half_width_s", 15.0, where);
    }
    if (root.contains("seed")) out.seed = get_number<std::uint64_t>(root, "seed", 0, "run config");

    try {
        out.memory.validate();
        out.window.validate();
    } catch (const ConfigError& err) {
        throw FormatError(std::string("run config: ") + err.what());
    } catch (const ContractViolation& err) {
        throw FormatError(std::string("run config: ") + err.what());
    }
    return out;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

std::string dump_run_config(const RunConfig& config) {
    const auto& c = config.memory;
    json memory = {{"p_spa", c.p_spa}, {"p_tem", c.p_tem}, {"p_abs", c.p_abs}, {"n_buff", c.n_buff},
                   {"n_spa", c.n_spa}, {"n_tem", c.n_tem}, {"n_abs", c.n_abs}, {"n_ret", c.n_ret},
                   {"dim", c.dim},     {"distance", "squared_euclidean"},
                   {"pooling", c.pooling == PoolingMode::Strict ? "strict" : "adaptive"}};
    if (c.temperature) memory["temperature"] = *c.temperature;
    json window = {{"mode", config.window.mode == WindowMode::Global ? "global" : "breakpoint"},
                   {"half_width_s", config.window.half_width_s}};
    if (config.window.mode == WindowMode::Breakpoint) window["breakpoint_s"] = config.window.breakpoint_s;
    json root = {{"memory", memory}, {"runtime", {{"realtime", config.pacing == Pacing::RealTime}}}, {"window", window}};
    if (config.seed) root["seed"] = *config.seed;
    return root.dump(2) + "\n";
}

EventScript parse_script(std::string_view text) {
    const json root = parse_json(text, "script");
    reject_unknown(root, {"fps", "side", "dim", "seed", "events"}, "script");
    EventScript s;
    s.fps = get_number<double>(root, "fps", 1.0, "script");
    s.side = get_number<int>(root, "side", 0, "script");
    s.dim = get_number<int>(root, "dim", 0, "script");
    s.seed = get_number<std::uint64_t>(root, "seed", 0, "script");
    if (s.side <= 0 || s.dim <= 0) throw FormatError("script: \"side\" and \"dim\" must be positive");
    if (!root.contains("events") || !root.at("events").is_array() || root.at("events").empty()) {
        throw FormatError("script: \"events\" must be a non-empty array");
    }
    const auto length = static_cast<Eigen::Index>(s.side) * s.side * s.dim;
    double clock = 0.0;
    for (std::size_t i = 0; i < root.at("events").size(); ++i) {
        const auto& ev = root.at("events")[i];
        const std::string where = "script.events[" + std::to_string(i) + "]";
        reject_unknown(ev, {"start_s", "end_s", "duration_s", "std", "mean"}, where);
        Event e;
        if (ev.contains("duration_s")) {
            if (ev.contains("end_s")) throw FormatError(where + ": give either duration_s or end_s");
            e.start_s = get_number<double>(ev, "start_s", clock, where);
            e.end_s = e.start_s + get_number<double>(ev, "duration_s", 0.0, where);
        } else {
            if (!ev.contains("end_s")) throw FormatError(where + ": needs duration_s or end_s");
            e.start_s = get_number<double>(ev, "start_s", clock, where);
            e.end_s = get_number<double>(ev, "end_s", 0.0, where);
        }
        e.std = get_number<double>(ev, "std", 0.0, where);
        if (!ev.contains("mean")) throw FormatError(where + ": missing \"mean\"");
        e.mean = parse_mean(ev.at("mean"), length, where);
        clock = e.end_s;
        s.events.push_back(std::move(e));
    }
    try {
        s.validate();
    } catch (const ContractViolation& err) {
        throw FormatError(err.what());
    }
    return s;
}

EventScript load_script(const std::filesystem::path& path) { return parse_script(read_file(path)); }

std::string tokens_csv(const RuntimeMetrics& metrics) {
    std::ostringstream out;
    out << "epoch,token_count\n";
    for (std::size_t i = 0; i < metrics.tokens_per_epoch.size(); ++i) {
        out << (i + 1) << ',' << metrics.tokens_per_epoch[i] << '\n';
    }
    return out.str();
}

std::string metrics_csv(const RuntimeMetrics& metrics, std::size_t final_token_count, std::size_t max_size) {
    const auto& w = metrics.write_latency;
    std::ostringstream out;
    out.precision(9);
    out << "metric,value\n";
    out << "frames_processed," << metrics.epochs_completed << '\n';
    out << "final_token_count," << final_token_count << '\n';
    out << "max_size," << max_size << '\n';
    out << "nonconverged_updates," << metrics.nonconverged_updates << '\n';
    out << "write_latency_median_ms," << w.median() * 1e3 << '\n';
    out << "write_latency_p90_ms," << w.quantile(0.9) * 1e3 << '\n';
    out << "write_latency_p99_ms," << w.quantile(0.99) * 1e3 << '\n';
    out << "write_latency_max_ms," << w.max() * 1e3 << '\n';
    return out.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace starmem
