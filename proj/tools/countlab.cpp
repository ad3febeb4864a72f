// SPDX-License-Identifier: Apache-2.0
// countlab: dataset generation, prompting, runs, relevance and reports.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "countlab/dataset.hpp"
#include "countlab/errors.hpp"
#include "countlab/harness.hpp"
#include "countlab/metrics.hpp"
#include "countlab/plans.hpp"
#include "countlab/png_io.hpp"
#include "countlab/prompts.hpp"
#include "countlab/relevance.hpp"
#include "countlab/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace countlab;

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open " + p.string());
    return json::parse(in);
}

void set_workers(int workers) {
    if (workers > 0) omp_set_num_threads(workers);
}

fs::path dataset_root_or_env(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("COUNTLAB_ROOT"); env && *env) return env;
    throw std::invalid_argument("--dataset is required (or set COUNTLAB_ROOT)");
}

int cmd_generate(const std::string& config_path, std::optional<std::uint64_t> seed, const fs::path& out,
                 int workers) {
    set_workers(workers);
    DatasetConfig config = config_path.empty() ? DatasetConfig{} : dataset_config_from_json(read_json(config_path));
    if (seed) config.master_seed = *seed;
    const auto index = generate_dataset(config, out);
    std::cout << "wrote " << index.images.size() << " images to " << out.string() << " (seed "
              << config.master_seed << ")\n";
    return 0;
}

json prompt_entries(const SceneManifest* m, const std::vector<LadderCategory>& cats) {
    json out = json::array();
    const auto bindings = m ? bindings_for(*m) : AttributeBindings{};
    for (auto c : cats) {
        for (const auto& p : ladder_for(c)) {
            json e{{"category", to_string(c)}, {"ladder_id", p.ladder_id}};
            if (m) {
                e["image_id"] = m->image_id;
                e["text"] = build_prompt(p, bindings);
            } else {
                e["text"] = p.template_text;
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

// JSON array of {category, ladder_id, text}; templates when no manifest is given.
int cmd_prompts(const std::string& dataset, const std::string& manifest,
                const std::vector<std::string>& categories, const std::string& image_id) {
    std::vector<LadderCategory> cats;
    for (const auto& c : categories) {
        const auto k = ladder_category_from_string(c);
        if (!k) throw std::invalid_argument("unknown ladder category: " + c);
        cats.push_back(*k);
    }
    auto cats_for = [&](VariationTag tag) {
        return cats.empty() ? std::vector<LadderCategory>{default_category(tag)} : cats;
    };
    if (!manifest.empty()) {
        const auto m = manifest_from_json(json::parse(std::ifstream(manifest)));
        std::cout << prompt_entries(&m, cats_for(m.variation)).dump(2) << '\n';
        return 0;
    }
    if (dataset.empty()) {
        if (cats.empty()) {
            cats = {LadderCategory::bg_color, LadderCategory::bg_texture, LadderCategory::obj_color,
                    LadderCategory::obj_shape, LadderCategory::obj_texture};
        }
        std::cout << prompt_entries(nullptr, cats).dump(2) << '\n';
        return 0;
    }
    const fs::path root = dataset;
    json out = json::array();
    for (const auto& e : load_index(root).images) {
        if (!image_id.empty() && e.image_id != image_id) continue;
        const auto m = load_manifest(root, e);
        for (auto& entry : prompt_entries(&m, cats_for(e.variation))) out.push_back(std::move(entry));
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

struct RunFlags {
    std::string config;
    std::string dataset;
    std::string backend;
    std::string plan;
    std::string output;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    bool resume = false;
    bool capture = false;
    std::size_t max_records = 0;
};

int cmd_run(const RunFlags& f) {
    ExperimentConfig c;
    if (!f.config.empty()) {
        c = load_experiment_config(f.config);
    } else if (const char* env = std::getenv("COUNTLAB_ROOT"); env && *env) {
        c.dataset_root = env;
    }
    if (!f.dataset.empty()) c.dataset_root = f.dataset;
    if (!f.backend.empty()) c.backend = f.backend;
    if (!f.plan.empty()) c.plan = f.plan;
    if (!f.output.empty()) c.output = f.output;
    if (f.seed) c.seed = *f.seed;
    if (f.workers > 0) c.workers = f.workers;
    if (f.capture) c.capture = true;
    RunOptions opts;
    opts.resume = f.resume;
    if (f.max_records > 0) opts.stop_after = f.max_records;
    const auto s = run_experiment(c, opts);
    std::cout << "planned " << s.planned << ", skipped " << s.skipped << ", written " << s.written
              << ", failed " << s.failed << " -> " << c.output.string() << '\n';
    return 0;
}

int cmd_relevance(const fs::path& captures, const std::string& dataset, std::size_t depth,
                  double threshold, const fs::path& out, int workers) {
    set_workers(workers);
    std::vector<fs::path> sidecars;
    if (fs::is_regular_file(captures)) {
        sidecars.push_back(captures);
    } else {
        for (const auto& e : fs::recursive_directory_iterator(captures)) {
            if (e.is_regular_file() && e.path().filename() == "capture.json") sidecars.push_back(e.path());
        }
    }
    std::sort(sidecars.begin(), sidecars.end());
    if (sidecars.empty()) throw std::invalid_argument("no capture.json found under " + captures.string());

    const fs::path root = dataset_root_or_env(dataset);
    const auto index = load_index(root);
    fs::create_directories(out / "heatmaps");
    std::ofstream loc(out / "localization.jsonl", std::ios::trunc);

    for (const auto& path : sidecars) {
        const auto res = relevance_from_capture(path, depth);
        const auto& sc = res.sidecar;
        const auto it = std::find_if(index.images.begin(), index.images.end(),
                                     [&](const IndexEntry& e) { return e.image_id == sc.image_id; });
        if (it == index.images.end()) throw UnknownImage(sc.image_id);
        const auto manifest = load_manifest(root, *it);
        LocalizationRow row;
        row.image_id = sc.image_id;
        row.prompt_id = sc.prompt_id;
        row.plan_id = sc.plan.is_object() ? sc.plan.value("name", "") : "";
        row.score = attention_iou(res.visual_relevance, sc.grid, manifest.object_mask, threshold);
        loc << to_json(row).dump() << '\n';

        std::string stem = sc.image_id + "__" + sc.prompt_id + "__" + row.plan_id;
        std::replace(stem.begin(), stem.end(), '/', '_');
        const auto image = read_png(root / it->png);
        write_png(out / "heatmaps" / (stem + ".png"), relevance_overlay(image, res.visual_relevance, sc.grid));
        std::cout << sc.image_id << ' ' << sc.prompt_id << " depth " << res.depth << " iou_object "
                  << row.score.iou_object << " iou_background " << row.score.iou_background << '\n';
    }
    return 0;
}

int cmd_report(const fs::path& records_path, const std::string& dataset, const fs::path& out,
               const std::string& localization, bool plots) {
    const auto records = read_records(records_path);
    const auto index = load_index(dataset_root_or_env(dataset));
    std::vector<LocalizationRow> loc;
    if (!localization.empty()) loc = read_localization(localization);
    const auto files = emit_report(records, index.images, out, loc, plots);
    const auto s = score(records);
    std::cout << "records " << s.n << ", accuracy " << s.accuracy << ", mrce "
              << (s.mrce ? std::to_string(*s.mrce) : std::string("n/a")) << "\n"
              << files.json.string() << '\n' << files.csv.string() << '\n';
    if (!files.heatmap.empty()) std::cout << files.heatmap.string() << '\n';
    return 0;
}

int cmd_plan(const std::string& name, const std::string& family) {
    const auto fam = model_family_from_string(family);
    if (!fam) throw std::invalid_argument("unknown model family: " + family);
    if (name.empty()) {
        for (const auto& n : strategy_names()) std::cout << n << '\n';
        return 0;
    }
    std::cout << to_json(load_plan(name, *fam)).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counting benchmark toolkit for vision-language models"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Render the synthetic dataset");
    std::string gen_config;
    std::optional<std::uint64_t> gen_seed;
    std::string gen_out;
    int gen_workers = 0;
    gen->add_option("--config", gen_config, "Dataset config JSON")->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "Master seed (overrides the config)");
    gen->add_option("--out", gen_out, "Dataset root")->required();
    gen->add_option("--workers", gen_workers, "Worker threads (0 = all cores)");

    auto* pr = app.add_subcommand("prompts", "Print prompt ladders, or prompts for dataset images");
    std::string pr_dataset;
    std::vector<std::string> pr_categories;
    std::string pr_image;
    std::string pr_manifest;
    pr->add_option("--manifest", pr_manifest, "Scene manifest JSON")->check(CLI::ExistingFile);
    pr->add_option("--dataset", pr_dataset, "Dataset root");
    pr->add_option("--category", pr_categories, "Ladder category (repeatable)");
    pr->add_option("--image", pr_image, "Only this image id");

    auto* run = app.add_subcommand("run", "Query a backend over the dataset and append JSONL records");
    RunFlags rf;
    run->add_option("--config", rf.config, "Experiment config JSON")->check(CLI::ExistingFile);
    run->add_option("--dataset", rf.dataset, "Dataset root (overrides config)");
    run->add_option("--backend", rf.backend, "Mock id or adapter descriptor");
    run->add_option("--plan", rf.plan, "Strategy name or plan JSON");
    run->add_option("--output", rf.output, "JSONL output path");
    run->add_option("--seed", rf.seed, "Seed forwarded to the backend");
    run->add_option("--workers", rf.workers, "Concurrent image jobs");
    run->add_flag("--resume", rf.resume, "Skip records already present in the output");
    run->add_flag("--capture", rf.capture, "Request attention and gradient captures");
    run->add_option("--max-records", rf.max_records, "Stop after writing this many new records");

    auto* rel = app.add_subcommand("relevance", "Cross-layer relevance and IoU from captures");
    std::string rel_captures;
    std::string rel_dataset;
    std::size_t rel_depth = 8;
    double rel_threshold = 0.5;
    std::string rel_out;
    int rel_workers = 0;
    rel->add_option("--captures", rel_captures, "capture.json or a directory searched for them")->required();
    rel->add_option("--dataset", rel_dataset, "Dataset root");
    rel->add_option("--depth", rel_depth, "Number of final layers to compose")->check(CLI::PositiveNumber);
    rel->add_option("--threshold", rel_threshold, "Binarization threshold as a fraction of the max")
        ->check(CLI::Range(0.0, 1.0));
    rel->add_option("--out", rel_out, "Output directory")->required();
    rel->add_option("--workers", rel_workers, "Worker threads (0 = all cores)");

    auto* rep = app.add_subcommand("report", "Score records and write JSON, CSV and plots");
    std::string rep_records;
    std::string rep_dataset;
    std::string rep_out;
    std::string rep_loc;
    bool rep_no_plots = false;
    rep->add_option("--records", rep_records, "JSONL records")->required()->check(CLI::ExistingFile);
    rep->add_option("--dataset", rep_dataset, "Dataset root");
    rep->add_option("--out", rep_out, "Output directory")->required();
    rep->add_option("--localization", rep_loc, "localization.jsonl from the relevance command")
        ->check(CLI::ExistingFile);
    rep->add_flag("--no-plots", rep_no_plots, "Skip the PNG heatmap");

    auto* plan = app.add_subcommand("plan", "List strategies or print a plan as JSON");
    std::string plan_name;
    std::string plan_family = "qwen25";
    plan->add_option("--plan", plan_name, "Strategy name or plan JSON");
    plan->add_option("--family", plan_family, "Model family for layer groups");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_config, gen_seed, gen_out, gen_workers);
        if (*pr) return cmd_prompts(pr_dataset, pr_manifest, pr_categories, pr_image);
        if (*run) return cmd_run(rf);
        if (*rel) return cmd_relevance(rel_captures, rel_dataset, rel_depth, rel_threshold, rel_out, rel_workers);
        if (*rep) return cmd_report(rep_records, rep_dataset, rep_out, rep_loc, !rep_no_plots);
        if (*plan) return cmd_plan(plan_name, plan_family);
    } catch (const std::exception& e) {
        std::cerr << "countlab: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
