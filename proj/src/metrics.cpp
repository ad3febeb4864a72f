// SPDX-License-Identifier: Apache-2.0
#include "countlab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <tuple>
#include <unordered_map>

#include "countlab/errors.hpp"

namespace countlab {
using nlohmann::json;

namespace {

std::optional<std::int64_t> to_int(std::string_view digits) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
        return std::nullopt;
    }
    return v;
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool all_digits(std::string_view s) { return !s.empty() && std::all_of(s.begin(), s.end(), is_digit); }

}  // namespace

json to_json(const PredictionRecord& r) {
    json j{{"key", r.key},
           {"image_id", r.image_id},
           {"prompt_id", r.prompt_id},
           {"backend_id", r.backend_id},
           {"plan_id", r.plan_id},
           {"prompt", r.prompt},
           {"raw_text", r.raw_text},
           {"parsed_count", r.parsed_count ? json(*r.parsed_count) : json(nullptr)},
           {"true_count", r.true_count}};
    if (r.error) {
        j["error"] = *r.error;
    }
    return j;
}

PredictionRecord record_from_json(const json& j) {
    PredictionRecord r;
    r.key = j.value("key", "");
    r.image_id = j.at("image_id").get<std::string>();
    r.prompt_id = j.value("prompt_id", "");
    r.backend_id = j.value("backend_id", "");
    r.plan_id = j.value("plan_id", "");
    r.prompt = j.value("prompt", "");
    r.raw_text = j.value("raw_text", "");
    if (j.contains("parsed_count") && !j["parsed_count"].is_null()) {
        r.parsed_count = j["parsed_count"].get<std::int64_t>();
    }
    r.true_count = j.at("true_count").get<std::int64_t>();
    if (j.contains("error") && !j["error"].is_null()) {
        r.error = j["error"].get<std::string>();
    }
    if (r.true_count < 0 || (r.parsed_count && *r.parsed_count < 0)) {
        throw FormatError("record " + r.key + ": negative count");
    }
    return r;
}

std::vector<PredictionRecord> read_records(const std::filesystem::path& jsonl) {
    std::vector<PredictionRecord> out;
    std::ifstream in(jsonl);
    if (!in) {
        throw Error("cannot open " + jsonl.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::optional<std::int64_t> parse_count(std::string_view text) {
    // brace-wrapped answers take precedence
    std::optional<std::int64_t> braced;
    for (std::size_t open = text.find('{'); open != std::string_view::npos;
         open = text.find('{', open + 1)) {
        const auto close = text.find('}', open + 1);
        if (close == std::string_view::npos) {
            break;
        }
        const auto inner = trim(text.substr(open + 1, close - open - 1));
        if (all_digits(inner)) {
            if (auto v = to_int(inner)) {
                braced = v;
            }
        }
    }
    if (braced) {
        return braced;
    }

    std::optional<std::int64_t> last;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_digit(text[j])) {
            ++j;
        }
        const bool clean_before = i == 0 || !(is_word(text[i - 1]) || text[i - 1] == '-' || text[i - 1] == '.');
        const bool decimal_after = j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1]);
        const bool clean_after = j == text.size() || (!is_word(text[j]) && !decimal_after);
        if (clean_before && clean_after) {
            if (auto v = to_int(text.substr(i, j - i))) {
                last = v;
            }
        }
        i = j;
    }
    return last;
}

std::optional<double> mrce(std::span<const PredictionRecord> records) {
    std::vector<double> terms;
    for (const auto& r : records) {
        if (!r.parsed_count || r.true_count == 0) {
            continue;
        }
        terms.push_back(static_cast<double>(std::llabs(*r.parsed_count - r.true_count)) /
                        static_cast<double>(r.true_count));
    }
    if (terms.empty()) {
        return std::nullopt;
    }
    // canonical summation order keeps the result independent of record order
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) {
        sum += t;
    }
    return sum / static_cast<double>(terms.size());
}

double accuracy(std::span<const PredictionRecord> records) {
    if (records.empty()) {
        return 0.0;
    }
    const auto correct = std::count_if(records.begin(), records.end(), [](const PredictionRecord& r) {
        return r.parsed_count && *r.parsed_count == r.true_count;
    });
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

Score score(std::span<const PredictionRecord> records) {
    Score s;
    s.n = records.size();
    for (const auto& r : records) {
        if (!r.parsed_count) {
            ++s.unparsable;
            continue;
        }
        if (*r.parsed_count == r.true_count) {
            ++s.correct;
        }
        if (r.true_count > 0) {
            ++s.mrce_eligible;
        }
    }
    s.accuracy = accuracy(records);
    s.mrce = mrce(records);
    return s;
}

MetricsReport report(std::span<const PredictionRecord> records, std::span<const IndexEntry> images) {
    std::unordered_map<std::string, const IndexEntry*> by_id;
    for (const auto& e : images) {
        by_id.emplace(e.image_id, &e);
    }
    std::map<std::string, std::vector<PredictionRecord>> buckets, patterns, prompts;
    for (const auto& r : records) {
        const auto it = by_id.find(r.image_id);
        if (it == by_id.end()) {
            throw UnknownImage(r.image_id);
        }
        const auto& e = *it->second;
        buckets[std::string(to_string(e.bucket))].push_back(r);
        patterns[std::string(to_string(e.variation)) + "/" + e.variant].push_back(r);
        prompts[r.prompt_id].push_back(r);
    }
    MetricsReport out;
    out.overall = score(records);
    for (const auto& [k, v] : buckets) out.per_bucket.emplace(k, score(v));
    for (const auto& [k, v] : patterns) out.per_pattern.emplace(k, score(v));
    for (const auto& [k, v] : prompts) out.per_prompt.emplace(k, score(v));
    return out;
}

json to_json(const Score& s) {
    return {{"n", s.n},
            {"correct", s.correct},
            {"unparsable_count", s.unparsable},
            {"mrce_eligible", s.mrce_eligible},
            {"accuracy", s.accuracy},
            {"mrce", s.mrce ? json(*s.mrce) : json(nullptr)}};
}

json to_json(const MetricsReport& r) {
    json j = to_json(r.overall);
    // buckets in table order rather than lexical order
    json buckets = json::array();
    for (std::size_t b = 0; b < kBucketCount; ++b) {
        const std::string label(to_string(static_cast<CountBucket>(b)));
        if (auto it = r.per_bucket.find(label); it != r.per_bucket.end()) {
            json row = to_json(it->second);
            row["bucket"] = label;
            buckets.push_back(row);
        }
    }
    j["per_bucket"] = buckets;
    j["per_pattern"] = json::object();
    for (const auto& [k, v] : r.per_pattern) j["per_pattern"][k] = to_json(v);
    j["per_prompt"] = json::object();
    for (const auto& [k, v] : r.per_prompt) j["per_prompt"][k] = to_json(v);
    return j;
}

std::vector<TableRow> flatten(std::span<const PredictionRecord> records, std::span<const IndexEntry> images) {
    std::unordered_map<std::string, const IndexEntry*> by_id;
    for (const auto& e : images) {
        by_id.emplace(e.image_id, &e);
    }
    using Key = std::tuple<VariationTag, std::string, CountBucket>;
    std::map<Key, std::vector<PredictionRecord>> groups;
    for (const auto& r : records) {
        const auto it = by_id.find(r.image_id);
        if (it == by_id.end()) {
            throw UnknownImage(r.image_id);
        }
        groups[{it->second->variation, it->second->variant, it->second->bucket}].push_back(r);
    }
    std::vector<TableRow> rows;
    for (const auto& [key, recs] : groups) {
        const auto& [tag, variant, bucket] = key;
        TableRow row;
        row.variation = tag;
        switch (tag) {
            case VariationTag::baseline: row.category = "baseline"; row.feature = "none"; break;
            case VariationTag::bg_color: row.category = "Bg"; row.feature = "color"; break;
            case VariationTag::bg_texture: row.category = "Bg"; row.feature = "texture"; break;
            case VariationTag::obj_color: row.category = "Obj"; row.feature = "color"; break;
            case VariationTag::obj_shape: row.category = "Obj"; row.feature = "shape"; break;
            case VariationTag::obj_texture: row.category = "Obj"; row.feature = "texture"; break;
        }
        row.pattern = variant;
        row.bucket = std::string(to_string(bucket));
        row.score = score(recs);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace countlab
