// SPDX-License-Identifier: Apache-2.0
#include "countlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "countlab/errors.hpp"
#include "countlab/png_io.hpp"

namespace countlab {
namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const LocalizationRow& r) {
    return {{"image_id", r.image_id},
            {"prompt_id", r.prompt_id},
            {"plan_id", r.plan_id},
            {"iou_object", r.score.iou_object},
            {"iou_background", r.score.iou_background},
            {"threshold", r.score.threshold},
            {"empty_relevance", r.score.empty_relevance}};
}

LocalizationRow localization_from_json(const json& j) {
    LocalizationRow r;
    r.image_id = j.at("image_id").get<std::string>();
    r.prompt_id = j.value("prompt_id", "");
    r.plan_id = j.value("plan_id", "");
    r.score.iou_object = j.at("iou_object").get<double>();
    r.score.iou_background = j.at("iou_background").get<double>();
    r.score.threshold = j.value("threshold", 0.5);
    r.score.empty_relevance = j.value("empty_relevance", false);
    return r;
}

std::vector<LocalizationRow> read_localization(const fs::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw Error("cannot open " + jsonl.string());
    std::vector<LocalizationRow> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(localization_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(jsonl.string() + ": " + e.what());
        }
    }
    return out;
}

namespace {

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << std::fixed << x;
    return s.str();
}

std::string row_id(const TableRow& r) { return r.category + "/" + r.feature + "/" + r.pattern; }

}  // namespace

std::string table_csv(std::span<const PredictionRecord> records, std::span<const IndexEntry> images,
                      std::span<const LocalizationRow> localization) {
    const auto rows = flatten(records, images);

    std::unordered_map<std::string, const IndexEntry*> by_id;
    for (const auto& e : images) by_id.emplace(e.image_id, &e);
    // (variation, variant, bucket) -> sums of IoU
    std::map<std::tuple<std::string, std::string, std::string>, std::tuple<double, double, int>> iou;
    for (const auto& l : localization) {
        const auto it = by_id.find(l.image_id);
        if (it == by_id.end()) throw UnknownImage(l.image_id);
        const auto& e = *it->second;
        auto& acc = iou[{std::string(to_string(e.variation)), e.variant, std::string(to_string(e.bucket))}];
        std::get<0>(acc) += l.score.iou_object;
        std::get<1>(acc) += l.score.iou_background;
        std::get<2>(acc) += 1;
    }

    std::ostringstream csv;
    csv << "category,feature,pattern,bucket,n,accuracy,mrce,unparsable,iou_object,iou_background\n";
    for (const auto& row : rows) {
        csv << row.category << ',' << row.feature << ',' << row.pattern << ',' << row.bucket << ','
            << row.score.n << ',' << fmt(row.score.accuracy) << ','
            << (row.score.mrce ? fmt(*row.score.mrce) : "") << ',' << row.score.unparsable << ',';
        const std::string tag(to_string(row.variation));
        if (auto it = iou.find({tag, row.pattern, row.bucket}); it != iou.end()) {
            const auto& [o, b, n] = it->second;
            csv << fmt(o / n) << ',' << fmt(b / n);
        } else {
            csv << ',';
        }
        csv << '\n';
    }
    return csv.str();
}

Bitmap mrce_heatmap(std::span<const TableRow> rows) {
    std::vector<std::string> ids;
    for (const auto& r : rows) {
        if (std::find(ids.begin(), ids.end(), row_id(r)) == ids.end()) ids.push_back(row_id(r));
    }
    constexpr int cell = 24;
    constexpr int gap = 2;
    const int w = static_cast<int>(kBucketCount) * (cell + gap) + gap;
    const int h = std::max<int>(1, static_cast<int>(ids.size())) * (cell + gap) + gap;
    Bitmap img(w, h, {255, 255, 255});
    for (const auto& r : rows) {
        const int y0 = gap + static_cast<int>(std::find(ids.begin(), ids.end(), row_id(r)) - ids.begin()) * (cell + gap);
        const int x0 = gap + static_cast<int>(bucket_from_string(r.bucket).value_or(CountBucket::below_10)) * (cell + gap);
        Rgb c{160, 160, 160};
        if (r.score.mrce) {
            const double t = std::clamp(*r.score.mrce, 0.0, 1.0);
            c = {static_cast<std::uint8_t>(std::lround(255 * t)), static_cast<std::uint8_t>(std::lround(200 * (1 - t))), 40};
        }
        for (int y = y0; y < y0 + cell; ++y) {
            for (int x = x0; x < x0 + cell; ++x) img.set(x, y, c);
        }
    }
    return img;
}

ReportFiles emit_report(std::span<const PredictionRecord> records, std::span<const IndexEntry> images,
                        const fs::path& out_dir, std::span<const LocalizationRow> localization,
                        bool plots) {
    const MetricsReport rep = report(records, images);
    const std::string csv = table_csv(records, images, localization);
    fs::create_directories(out_dir);

    ReportFiles files{out_dir / "report.json", out_dir / "table.csv", {}};
    {
        json j = to_json(rep);
        if (!localization.empty()) {
            double o = 0.0, b = 0.0;
            for (const auto& l : localization) {
                o += l.score.iou_object;
                b += l.score.iou_background;
            }
            const auto n = static_cast<double>(localization.size());
            j["localization"] = {{"n", localization.size()}, {"iou_object", o / n}, {"iou_background", b / n}};
        }
        std::ofstream out(files.json, std::ios::trunc);
        out << j.dump(2) << '\n';
        if (!out) throw Error("cannot write " + files.json.string());
    }
    {
        std::ofstream out(files.csv, std::ios::trunc);
        out << csv;
        if (!out) throw Error("cannot write " + files.csv.string());
    }
    if (plots) {
        files.heatmap = out_dir / "mrce_heatmap.png";
        const auto rows = flatten(records, images);
        write_png(files.heatmap, mrce_heatmap(rows));
    }
    return files;
}

}  // namespace countlab
