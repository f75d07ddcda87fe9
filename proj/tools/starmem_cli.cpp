// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0
//
// starmem run  --config C --input (stream|script) --output DIR
// starmem gen  --input SCRIPT --output STREAM
// starmem eval --input SNAPSHOT --script SCRIPT
//
// Exit status: 0 ok, 2 input error, 3 internal invariant breach.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "starmem/errors.hpp"
#include "starmem/io.hpp"
#include "starmem/stream_runtime.hpp"
#include "starmem/synth.hpp"

namespace fs = std::filesystem;
using namespace starmem;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kInvariantBreach = 3;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("starmem");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("STARMEM_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
}

struct RunArgs {
    std::string config;
    std::string input;
    std::string output;
    std::optional<std::string> mode;
    std::optional<double> breakpoint;
    std::optional<double> half_width;
    bool realtime = false;
    std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& args) {
    RunConfig rc = args.config.empty() ? RunConfig{} : load_run_config(args.config);
    if (args.mode) {
        if (*args.mode == "global") {
            rc.window.mode = WindowMode::Global;
        } else if (*args.mode == "breakpoint") {
            rc.window.mode = WindowMode::Breakpoint;
        } else {
            throw FormatError("--mode must be global or breakpoint");
        }
    }
    if (args.breakpoint) rc.window.breakpoint_s = *args.breakpoint;
    if (args.half_width) rc.window.half_width_s = *args.half_width;
    if (args.realtime) rc.pacing = Pacing::RealTime;
    if (args.seed) rc.seed = args.seed;
    try {
        rc.window.validate();
    } catch (const ContractViolation& err) {
        throw FormatError(err.what());
    }

    std::optional<StreamSource> source;
    if (is_stream_file(args.input)) {
        source = open_stream_source(args.input);
        spdlog::info("input {}: feature stream", args.input);
    } else {
        EventScript script = load_script(args.input);
        if (rc.seed) script.seed = *rc.seed;
        auto synthetic = generate_stream(script);
        spdlog::info("input {}: script with {} events, {} frames", args.input, script.events.size(),
                     synthetic.frames.size());
        source = StreamSource::from_frames(script.fps, std::move(synthetic.frames));
    }
    StreamSource windowed = apply_window(std::move(*source), rc.window);

    fs::create_directories(args.output);
    MemoryHandle mem(rc.memory);
    RuntimeMetrics metrics = run_frame_handler(windowed, mem, rc.pacing);
    if (metrics.aborted) throw FormatError("stream rejected: " + metrics.diagnostic);

    const auto snapshot = query_snapshot(mem);
    const std::size_t max_size = rc.memory.max_size();
    for (std::size_t i = 0; i < metrics.tokens_per_epoch.size(); ++i) {
        if (metrics.tokens_per_epoch[i] > max_size) {
            throw InvariantBreach("token count " + std::to_string(metrics.tokens_per_epoch[i]) + " exceeds " +
                                  std::to_string(max_size) + " at epoch " + std::to_string(i + 1));
        }
    }
    if (!snapshot->consistent()) throw InvariantBreach("final snapshot has mixed store epochs");

    write_snapshot_file(fs::path(args.output) / "snapshot.bin", *snapshot);
    write_file(fs::path(args.output) / "snapshot.json", snapshot_sidecar_json(*snapshot));

    write_file(fs::path(args.output) / "tokens.csv", tokens_csv(metrics));
    write_file(fs::path(args.output) / "metrics.csv", metrics_csv(metrics, snapshot->token_count(), max_size));

    spdlog::info("processed {} frames, {} tokens, median write {:.3f} ms", metrics.epochs_completed,
                 snapshot->token_count(), metrics.write_latency.median() * 1e3);
    std::cout << "frames_processed " << metrics.epochs_completed << "\n"
              << "token_count " << snapshot->token_count() << "\n";
    return kOk;
}

int cmd_gen(const std::string& input, const std::string& output, std::optional<std::uint64_t> seed) {
    EventScript script = load_script(input);
    if (seed) script.seed = *seed;
    const auto stream = generate_stream(script);
    write_stream_file(output, static_cast<float>(script.fps), stream.frames);
    spdlog::info("wrote {} frames to {}", stream.frames.size(), output);
    return kOk;
}

int cmd_eval(const std::string& input, const std::string& script_path) {
    const MemorySnapshot snapshot = read_snapshot_file(input);
    const EventScript script = load_script(script_path);
    const auto labels = script_labels(script);
    FidelityReport report;
    try {
        report = evaluate_compression(snapshot, script, labels);
    } catch (const ContractViolation& err) {
        // A snapshot that does not belong to this script is an input problem.
        throw FormatError(err.what());
    }
    nlohmann::json j;
    j["epoch"] = snapshot.epoch;
    j["events_present"] = report.events_present;
    j["coverage"] = report.coverage;
    j["weight_l1"] = report.weight_l1;
    j["purity"] = report.purity;
    j["cluster_event"] = report.cluster_event;
    j["covered"] = report.covered;
    std::cout << j.dump(2) << std::endl;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Bounded streaming feature memory"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Compress a stream and export the final snapshot");
    run_cmd->add_option("--config", run.config, "Run config (JSON)");
    run_cmd->add_option("--input", run.input, "Feature stream file or event script")->required();
    run_cmd->add_option("--output", run.output, "Output directory")->required();
    run_cmd->add_option("--mode", run.mode, "global or breakpoint");
    run_cmd->add_option("--breakpoint", run.breakpoint, "Breakpoint time in seconds");
    run_cmd->add_option("--half-width", run.half_width, "Breakpoint half window in seconds (default 15)");
    run_cmd->add_flag("--realtime", run.realtime, "Pace writes by frame timestamps");
    run_cmd->add_option("--seed", run.seed, "Override the script seed");

    std::string gen_input, gen_output;
    std::optional<std::uint64_t> gen_seed;
    auto* gen_cmd = app.add_subcommand("gen", "Render an event script to a feature stream file");
    gen_cmd->add_option("--input", gen_input, "Event script")->required();
    gen_cmd->add_option("--output", gen_output, "Stream file to write")->required();
    gen_cmd->add_option("--seed", gen_seed, "Override the script seed");

    std::string eval_input, eval_script;
    auto* eval_cmd = app.add_subcommand("eval", "Score a snapshot against the script it came from");
    eval_cmd->add_option("--input", eval_input, "Snapshot file")->required();
    eval_cmd->add_option("--script", eval_script, "Event script")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*gen_cmd) return cmd_gen(gen_input, gen_output, gen_seed);
        if (*eval_cmd) return cmd_eval(eval_input, eval_script);
    } catch (const InvariantBreach& err) {
        spdlog::critical("invariant breach: {}", err.what());
        return kInvariantBreach;
    } catch (const ContractViolation& err) {
        spdlog::critical("invariant breach: {}", err.what());
        return kInvariantBreach;
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return kInputError;
    }
    return kInputError;
}
