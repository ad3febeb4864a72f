// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "countlab/exec.hpp"
#include "countlab/metrics.hpp"
#include "countlab/prompts.hpp"

namespace countlab {

/// JSON schema (every field optional; the dataset root may also come from the
/// environment or the command line):
///   dataset_root  string    generated dataset; COUNTLAB_ROOT overrides it
///   axes          [string]  variation tags to include; empty = all
///   categories    [string]  prompt ladders; empty = the image's own ladder
///   rungs         [int]     1-based rungs to ask; empty = whole ladder
///   backend       string    mock id or adapter descriptor path
///   plan          string    strategy name or plan JSON path
///   output        string    JSONL path
///   seed          int       forwarded to the backend
///   batch_size    int       images per scheduling batch
///   workers       int       threads; 0 = OpenMP default
///   max_images    int       0 = all
///   capture       bool      request attention/gradient captures
///   capture_dir   string    default <output dir>/captures
///   options       object    opaque backend options
struct ExperimentConfig {
    std::filesystem::path dataset_root;
    std::vector<VariationTag> axes;
    std::vector<LadderCategory> categories;
    std::vector<int> rungs;
    std::string backend = "mock:oracle";
    std::string plan = "baseline";
    std::filesystem::path output = "records.jsonl";
    std::uint64_t seed = 0;
    std::size_t batch_size = 32;
    int workers = 0;
    std::size_t max_images = 0;
    bool capture = false;
    std::filesystem::path capture_dir;
    nlohmann::json options = nlohmann::json::object();
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Applies COUNTLAB_ROOT when `use_env` is set.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, bool use_env = true);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, bool use_env = true);

/// FNV-1a over image id, prompt text, backend id and plan name.
std::string record_key(const std::string& image_id, const std::string& prompt,
                       const std::string& backend_id, const std::string& plan_name);

struct RunOptions {
    bool resume = false;
    std::optional<std::size_t> stop_after;  // stop once this many new records are written
    Exec exec = Exec::parallel;
};

struct RunSummary {
    std::size_t planned = 0;
    std::size_t skipped = 0;
    std::size_t written = 0;
    std::size_t failed = 0;
};

/// One record per (image, prompt rung), appended in dataset order. With
/// `resume`, records whose key is already in the output are skipped; without
/// it the output is truncated first. Backend failures become records with an
/// error field.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Directory that holds captures for one record.
std::filesystem::path capture_path(const std::filesystem::path& capture_root, const PredictionRecord& r);

}  // namespace countlab
