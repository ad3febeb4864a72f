// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "countlab/dataset.hpp"

namespace countlab {

/// One (image, prompt, backend, plan) trial.
struct PredictionRecord {
    std::string key;
    std::string image_id;
    std::string prompt_id;
    std::string backend_id;
    std::string plan_id;
    std::string prompt;
    std::string raw_text;
    std::optional<std::int64_t> parsed_count;  // nullopt = UNPARSABLE
    std::int64_t true_count = 0;
    std::optional<std::string> error;          // adapter failure, run continued
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord record_from_json(const nlohmann::json& j);
std::vector<PredictionRecord> read_records(const std::filesystem::path& jsonl);

/// Last brace-wrapped non-negative integer, else the last standalone
/// non-negative integer token, else nullopt.
std::optional<std::int64_t> parse_count(std::string_view raw_text);

/// Mean of |pred - true| / true over records that parsed and have true > 0.
std::optional<double> mrce(std::span<const PredictionRecord> records);

/// Exact-match fraction over all records; unparsable records count as wrong.
double accuracy(std::span<const PredictionRecord> records);

struct Score {
    std::size_t n = 0;
    std::size_t correct = 0;
    std::size_t unparsable = 0;
    std::size_t mrce_eligible = 0;
    double accuracy = 0.0;
    std::optional<double> mrce;
};

Score score(std::span<const PredictionRecord> records);

struct MetricsReport {
    Score overall;
    std::map<std::string, Score> per_bucket;   // keyed by bucket label
    std::map<std::string, Score> per_pattern;  // "<variation_tag>/<variant>"
    std::map<std::string, Score> per_prompt;   // "<category>/P<k>"
};

/// Aggregates records overall, per count bucket, per pattern and per prompt.
/// Throws UnknownImage when a record's image id is not in `images`.
MetricsReport report(std::span<const PredictionRecord> records, std::span<const IndexEntry> images);

nlohmann::json to_json(const Score& s);
nlohmann::json to_json(const MetricsReport& r);

/// Row of the flattened table: one per (variation, variant, bucket) present.
struct TableRow {
    VariationTag variation = VariationTag::baseline;
    std::string category;  // "Bg", "Obj" or "baseline"
    std::string feature;   // "color", "texture", "shape" or "none"
    std::string pattern;
    std::string bucket;
    Score score;
};

std::vector<TableRow> flatten(std::span<const PredictionRecord> records,
                              std::span<const IndexEntry> images);

}  // namespace countlab
