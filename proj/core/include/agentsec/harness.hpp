#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentsec/detector.hpp"
#include "agentsec/error.hpp"
#include "agentsec/remote.hpp"

namespace agentsec::harness {

enum class ScenarioKind { ReverseTuring, Alignment, Msj };

ScenarioKind scenario_kind_from_string(const std::string& s);
std::string scenario_kind_name(ScenarioKind kind);

enum class BackendMode { Scripted, Remote };

struct RunConfig {
    ScenarioKind scenario = ScenarioKind::ReverseTuring;
    int trials = 1;
    std::uint64_t base_seed = 0;
    std::filesystem::path scenario_config_path;
    std::optional<std::filesystem::path> detector_profile_path;
    BackendMode backend = BackendMode::Scripted;
    std::optional<EndpointConfig> endpoint;
    std::filesystem::path out_dir = "out";
    int jobs = 1;
    std::vector<long> length_bins; // msj ASR-curve bin edges; empty = one bin
};

/// Parses and validates a run config; relative paths resolve against
/// base_dir. Errors: config_invalid.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct BatchSummary {
    nlohmann::json aggregate;
    std::vector<std::filesystem::path> files_written;
};

/// Executes `trials` seeded trials (seed = base_seed + index), writes the
/// event log, labeled feature rows and rendered reports under out_dir.
/// Deterministic: the same scripted config and base seed produce byte-
/// identical outputs, regardless of the jobs count.
BatchSummary run_batch(const RunConfig& config);

/// Re-renders report files from a previously written aggregate.
std::vector<std::filesystem::path> render_report(const nlohmann::json& aggregate,
                                                 const std::filesystem::path& out_dir);

/// Loads the checked-in published tables, renders them through the metrics
/// formatting path and verifies F1 consistency where derivable.
/// Errors: fixture_missing, fixture_corrupt.
nlohmann::json replay_paper_tables(const std::filesystem::path& fixture_dir);

/// Renders one replayed table (as produced by replay_paper_tables) as text.
std::string format_paper_table(const nlohmann::json& table);

/// Labeled trials from a JSONL file of {"features": [...], "label": 0|1}
/// rows (the shape run_batch writes). Errors: fixture_missing, fixture_corrupt.
std::vector<LabeledTrial> load_labeled_trials(const std::filesystem::path& path);

/// Maps an Error code to the documented process exit code:
/// 2 config, 3 fixture, 4 backend, 1 anything else.
int exit_code_for(const Error& error);

} // namespace agentsec::harness
