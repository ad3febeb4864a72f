// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "countlab/image.hpp"
#include "countlab/metrics.hpp"
#include "countlab/relevance.hpp"

namespace countlab {

/// Localization readout for one captured record.
struct LocalizationRow {
    std::string image_id;
    std::string prompt_id;
    std::string plan_id;
    LocalizationScore score;
};

nlohmann::json to_json(const LocalizationRow& r);
LocalizationRow localization_from_json(const nlohmann::json& j);
std::vector<LocalizationRow> read_localization(const std::filesystem::path& jsonl);

/// Flattened table as CSV: category,feature,pattern,bucket,n,accuracy,mrce,unparsable,
/// iou_object,iou_background. IoU cells hold the mean over the group's localization
/// rows and stay empty without any.
std::string table_csv(std::span<const PredictionRecord> records, std::span<const IndexEntry> images,
                      std::span<const LocalizationRow> localization = {});

/// Pattern x bucket grid colored from green (MRCE 0) to red (MRCE >= 1);
/// cells without eligible records are gray.
Bitmap mrce_heatmap(std::span<const TableRow> rows);

struct ReportFiles {
    std::filesystem::path json;
    std::filesystem::path csv;
    std::filesystem::path heatmap;  // empty when plots are off
};

/// Writes report.json, table.csv and (optionally) mrce_heatmap.png under `out_dir`.
/// Throws UnknownImage for records outside the index.
ReportFiles emit_report(std::span<const PredictionRecord> records, std::span<const IndexEntry> images,
                        const std::filesystem::path& out_dir,
                        std::span<const LocalizationRow> localization = {}, bool plots = true);

}  // namespace countlab
