// SPDX-License-Identifier: Apache-2.0
#include "countlab/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "countlab/backend.hpp"
#include "countlab/errors.hpp"
#include "countlab/plans.hpp"
#include "countlab/rng.hpp"

namespace countlab {
namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const ExperimentConfig& c) {
    json axes = json::array();
    for (auto a : c.axes) axes.push_back(to_string(a));
    json cats = json::array();
    for (auto k : c.categories) cats.push_back(to_string(k));
    return {{"dataset_root", c.dataset_root.string()},
            {"axes", axes},
            {"categories", cats},
            {"rungs", c.rungs},
            {"backend", c.backend},
            {"plan", c.plan},
            {"output", c.output.string()},
            {"seed", c.seed},
            {"batch_size", c.batch_size},
            {"workers", c.workers},
            {"max_images", c.max_images},
            {"capture", c.capture},
            {"capture_dir", c.capture_dir.string()},
            {"options", c.options}};
}

ExperimentConfig experiment_config_from_json(const json& j, bool use_env) {
    ExperimentConfig c;
    try {
        c.dataset_root = j.value("dataset_root", std::string());
        for (const auto& a : j.value("axes", json::array())) {
            const auto s = a.get<std::string>();
            const auto v = variation_from_string(s);
            if (!v) throw FormatError("unknown variation axis: " + s);
            c.axes.push_back(*v);
        }
        for (const auto& k : j.value("categories", json::array())) {
            const auto s = k.get<std::string>();
            const auto v = ladder_category_from_string(s);
            if (!v) throw FormatError("unknown ladder category: " + s);
            c.categories.push_back(*v);
        }
        c.rungs = j.value("rungs", std::vector<int>{});
        c.backend = j.value("backend", c.backend);
        c.plan = j.value("plan", c.plan);
        c.output = j.value("output", c.output.string());
        c.seed = j.value("seed", c.seed);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.workers = j.value("workers", c.workers);
        c.max_images = j.value("max_images", c.max_images);
        c.capture = j.value("capture", c.capture);
        c.capture_dir = j.value("capture_dir", std::string());
        c.options = j.value("options", json::object());
    } catch (const json::exception& e) {
        throw FormatError(std::string("experiment config: ") + e.what());
    }
    if (use_env) {
        if (const char* root = std::getenv("COUNTLAB_ROOT"); root && *root) c.dataset_root = root;
    }
    if (c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (c.workers < 0) throw std::invalid_argument("workers must be non-negative");
    for (int r : c.rungs) {
        if (r < 1 || r > 5) throw std::invalid_argument("rungs are numbered 1 to 5");
    }
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path, bool use_env) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return experiment_config_from_json(json::parse(in), use_env);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string record_key(const std::string& image_id, const std::string& prompt,
                       const std::string& backend_id, const std::string& plan_name) {
    std::uint64_t h = fnv1a64(image_id);
    for (const auto* part : {&prompt, &backend_id, &plan_name}) {
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(*part, h);
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

fs::path capture_path(const fs::path& root, const PredictionRecord& r) {
    std::string prompt = r.prompt_id;
    for (char& ch : prompt) {
        if (ch == '/') ch = '_';
    }
    return root / r.plan_id / (r.image_id + "__" + prompt);
}

namespace {

struct Job {
    PredictionRecord record;
    bool skip = false;     // already in the output
    bool dropped = false;  // past the stop_after budget
};

std::vector<Job> jobs_for_image(const ExperimentConfig& config, const IndexEntry& entry,
                                const SceneManifest* manifest, const std::string& load_error,
                                const std::string& backend_id, const std::string& plan_name) {
    std::vector<Job> jobs;
    if (!manifest) {
        Job j;
        j.record.image_id = entry.image_id;
        j.record.backend_id = backend_id;
        j.record.plan_id = plan_name;
        j.record.true_count = entry.true_count;
        j.record.error = load_error;
        j.record.key = record_key(entry.image_id, "", backend_id, plan_name);
        jobs.push_back(std::move(j));
        return jobs;
    }
    const auto categories = config.categories.empty()
                                ? std::vector<LadderCategory>{default_category(entry.variation)}
                                : config.categories;
    const auto bindings = bindings_for(*manifest);
    for (auto cat : categories) {
        const auto ladder = ladder_for(cat);
        for (std::size_t r = 0; r < ladder.size(); ++r) {
            if (!config.rungs.empty() &&
                std::find(config.rungs.begin(), config.rungs.end(), static_cast<int>(r + 1)) ==
                    config.rungs.end()) {
                continue;
            }
            Job j;
            auto& rec = j.record;
            rec.image_id = entry.image_id;
            rec.prompt_id = ladder[r].prompt_id();
            rec.backend_id = backend_id;
            rec.plan_id = plan_name;
            rec.true_count = manifest->true_count;
            try {
                rec.prompt = build_prompt(ladder[r], bindings);
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
            rec.key = record_key(rec.image_id, rec.prompt, backend_id, plan_name);
            jobs.push_back(std::move(j));
        }
    }
    return jobs;
}

std::unordered_set<std::string> existing_keys(const fs::path& output) {
    std::unordered_set<std::string> keys;
    if (!fs::exists(output)) return keys;
    std::ifstream in(output);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            keys.insert(json::parse(line).at("key").get<std::string>());
        } catch (const json::exception&) {
            // a torn final line from an interrupted run; it is rewritten
        }
    }
    return keys;
}

// Drops a trailing partial line left by an interrupted append.
void trim_torn_tail(const fs::path& output) {
    if (!fs::exists(output)) return;
    std::ifstream in(output, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    if (content.empty() || content.back() == '\n') return;
    const auto cut = content.rfind('\n');
    content.resize(cut == std::string::npos ? 0 : cut + 1);
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    out << content;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    if (config.dataset_root.empty()) throw std::invalid_argument("dataset_root is not set");
    const DatasetIndex index = load_index(config.dataset_root);
    const auto backend = make_backend(config.backend);
    const auto& desc = backend->descriptor();
    const InterventionPlan plan = load_plan(config.plan, desc.model_family);

    std::vector<const IndexEntry*> images;
    for (const auto& e : index.images) {
        if (!config.axes.empty() &&
            std::find(config.axes.begin(), config.axes.end(), e.variation) == config.axes.end()) {
            continue;
        }
        images.push_back(&e);
        if (config.max_images != 0 && images.size() == config.max_images) break;
    }

    if (!config.output.parent_path().empty()) fs::create_directories(config.output.parent_path());
    std::unordered_set<std::string> done;
    if (options.resume) {
        trim_torn_tail(config.output);
        done = existing_keys(config.output);
    } else {
        std::ofstream truncate(config.output, std::ios::trunc);
    }
    std::ofstream out(config.output, std::ios::app);
    if (!out) throw Error("cannot open " + config.output.string() + " for writing");

    const fs::path capture_root = config.capture_dir.empty()
                                      ? config.output.parent_path() / "captures"
                                      : config.capture_dir;
    RunSummary summary;
    // a record budget needs jobs issued in dataset order, so that path runs serially
    const bool parallel = options.exec == Exec::parallel && !options.stop_after;
    std::size_t issued = 0;
    const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();

    for (std::size_t begin = 0; begin < images.size(); begin += config.batch_size) {
        const std::size_t end = std::min(images.size(), begin + config.batch_size);
        std::vector<std::vector<Job>> batch(end - begin);

        const auto n = static_cast<std::int64_t>(end - begin);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (parallel)
        for (std::int64_t i = 0; i < n; ++i) {
            const IndexEntry& entry = *images[begin + static_cast<std::size_t>(i)];
            std::optional<SceneManifest> manifest;
            std::string load_error;
            try {
                manifest = load_manifest(config.dataset_root, entry);
            } catch (const std::exception& e) {
                load_error = std::string("manifest: ") + e.what();
            }
            auto jobs = jobs_for_image(config, entry, manifest ? &*manifest : nullptr, load_error,
                                       desc.id, plan.name);
            for (auto& job : jobs) {
                auto& rec = job.record;
                if (done.contains(rec.key)) {
                    job.skip = true;
                    continue;
                }
                if (options.stop_after && issued++ >= *options.stop_after) {
                    job.dropped = true;
                    continue;
                }
                if (rec.error) continue;
                BackendRequest req;
                req.manifest = &*manifest;
                req.image_path = config.dataset_root / entry.png;
                req.prompt = rec.prompt;
                req.prompt_id = rec.prompt_id;
                req.plan = &plan;
                req.seed = config.seed;
                req.options = config.options;
                if (config.capture) req.capture_dir = capture_path(capture_root, rec);
                try {
                    const auto res = backend_answer(*backend, req);
                    rec.raw_text = res.raw_text;
                    rec.parsed_count = parse_count(res.raw_text);
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
            }
            batch[static_cast<std::size_t>(i)] = std::move(jobs);
        }

        // single appender keeps lines whole and in dataset order
        for (const auto& jobs : batch) {
            for (const auto& job : jobs) {
                ++summary.planned;
                if (job.skip) {
                    ++summary.skipped;
                    continue;
                }
                if (job.dropped) continue;
                out << to_json(job.record).dump() << '\n';
                ++summary.written;
                if (job.record.error) ++summary.failed;
            }
        }
        out.flush();
        if (options.stop_after && summary.written >= *options.stop_after) break;
    }
    return summary;
}

}  // namespace countlab
