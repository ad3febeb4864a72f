// SPDX-License-Identifier: Apache-2.0
#include "countlab/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "countlab/errors.hpp"
#include "countlab/png_io.hpp"
#include "countlab/rng.hpp"

namespace countlab {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json rgb_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

Rgb rgb_from(const json& j) {
    return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

constexpr std::array<std::string_view, 6> kMulticolorCycle{"red",   "yellow", "blue",
                                                           "green", "black",  "light gray"};

std::pair<std::int64_t, std::int64_t> bucket_range(std::size_t bucket) {
    if (bucket == 0) {
        return {1, 9};
    }
    const auto lo = static_cast<std::int64_t>(bucket * 10);
    return {lo, bucket == kBucketCount - 1 ? 50 : lo + 9};
}

std::string image_id_for(VariationTag tag, const std::string& variant, std::size_t index) {
    char num[16];
    std::snprintf(num, sizeof(num), "%04zu", index);
    if (tag == VariationTag::baseline) {
        return "baseline-" + std::string(num);
    }
    return std::string(to_string(tag)) + "-" + path_token(variant) + "-" + num;
}

std::vector<std::string> variants_for(const DatasetConfig& c, VariationTag tag) {
    std::vector<std::string> out;
    switch (tag) {
        case VariationTag::baseline:
            out.push_back("default");
            break;
        case VariationTag::bg_color:
            out = c.background_colors;
            break;
        case VariationTag::obj_color:
            out = c.object_colors;
            break;
        case VariationTag::obj_shape:
            for (auto s : c.object_shapes) {
                out.emplace_back(to_string(s));
            }
            break;
        case VariationTag::obj_texture: {
            auto ps = c.object_patterns.empty()
                          ? std::vector<Pattern>(object_patterns().begin(), object_patterns().end())
                          : c.object_patterns;
            for (auto p : ps) {
                out.emplace_back(to_string(p));
            }
            break;
        }
        case VariationTag::bg_texture: {
            auto ps = c.background_patterns.empty()
                          ? std::vector<Pattern>(background_patterns().begin(),
                                                 background_patterns().end())
                          : c.background_patterns;
            for (auto p : ps) {
                out.emplace_back(to_string(p));
            }
            break;
        }
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << text;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return json::parse(in);
}

Pattern require_pattern(const std::string& name) {
    auto p = pattern_from_string(name);
    if (!p) {
        throw std::invalid_argument("unknown pattern: " + name);
    }
    return *p;
}

}  // namespace

std::string path_token(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), ' ', '_');
    return out;
}

SceneManifest make_manifest(const SceneSpec& spec, std::string image_id, std::string variant,
                            std::size_t base_index) {
    SceneManifest m;
    m.image_id = std::move(image_id);
    m.true_count = static_cast<std::int64_t>(spec.objects.size());
    for (const auto& o : spec.objects) {
        m.objects.push_back({o, ShapeGeometry(o).bounds()});
    }
    m.object_mask = derive_object_mask(spec);
    m.seed = spec.seed;
    m.variation = spec.variation;
    m.variant = std::move(variant);
    m.bucket = bucketize(m.true_count);
    m.base_index = base_index;
    m.background = spec.background;
    m.width = spec.width;
    m.height = spec.height;
    return m;
}

SceneSpec scene_from_manifest(const SceneManifest& m) {
    SceneSpec s;
    s.width = m.width;
    s.height = m.height;
    s.background = m.background;
    s.variation = m.variation;
    s.seed = m.seed;
    for (const auto& r : m.objects) {
        s.objects.push_back(r.object);
    }
    return s;
}

json to_json(const Style& s) {
    json j;
    j["kind"] = s.kind == Style::Kind::solid_color ? "solid_color" : "texture";
    j["color"] = s.color_name;
    j["rgb"] = rgb_json(s.color);
    if (s.kind == Style::Kind::texture) {
        j["pattern"] = std::string(to_string(s.pattern));
        j["base_rgb"] = rgb_json(s.base);
        j["params"] = {{"period", s.params.period},         {"stroke", s.params.stroke},
                       {"cell", s.params.cell},             {"dot_radius", s.params.dot_radius},
                       {"dot_grid", s.params.dot_grid}};
    }
    return j;
}

Style style_from_json(const json& j) {
    Style s;
    const auto kind = j.at("kind").get<std::string>();
    s.color_name = j.at("color").get<std::string>();
    s.color = rgb_from(j.at("rgb"));
    if (kind == "solid_color") {
        s.kind = Style::Kind::solid_color;
        s.base = s.color;
    } else if (kind == "texture") {
        s.kind = Style::Kind::texture;
        s.pattern = require_pattern(j.at("pattern").get<std::string>());
        s.base = rgb_from(j.at("base_rgb"));
        const auto& p = j.at("params");
        s.params.period = p.at("period").get<int>();
        s.params.stroke = p.at("stroke").get<int>();
        s.params.cell = p.at("cell").get<int>();
        s.params.dot_radius = p.at("dot_radius").get<int>();
        s.params.dot_grid = p.at("dot_grid").get<int>();
    } else {
        throw FormatError("unknown style kind: " + kind);
    }
    return s;
}

json to_json(const SceneManifest& m) {
    json objects = json::array();
    for (const auto& r : m.objects) {
        objects.push_back({{"shape", std::string(to_string(r.object.shape))},
                           {"fill", to_json(r.object.fill)},
                           {"center", {r.object.center.x, r.object.center.y}},
                           {"size", r.object.size},
                           {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}}});
    }
    return {
        {"image_id", m.image_id},
        {"true_count", m.true_count},
        {"objects", objects},
        {"object_mask",
         {{"encoding", "rle_row_major_zeros_first"},
          {"width", m.object_mask.width()},
          {"height", m.object_mask.height()},
          {"popcount", m.object_mask.popcount()},
          {"runs", m.object_mask.run_lengths()}}},
        {"seed", m.seed},
        {"variation_tag", std::string(to_string(m.variation))},
        {"variant", m.variant},
        {"count_bucket", std::string(to_string(m.bucket))},
        {"base_index", m.base_index},
        {"background", to_json(m.background)},
        {"width", m.width},
        {"height", m.height},
    };
}

SceneManifest manifest_from_json(const json& j) {
    SceneManifest m;
    m.image_id = j.at("image_id").get<std::string>();
    m.true_count = j.at("true_count").get<std::int64_t>();
    for (const auto& o : j.at("objects")) {
        ObjectRecord r;
        auto shape = shape_from_string(o.at("shape").get<std::string>());
        if (!shape) {
            throw FormatError("unknown shape in manifest " + m.image_id);
        }
        r.object.shape = *shape;
        r.object.fill = style_from_json(o.at("fill"));
        r.object.center = {o.at("center").at(0).get<int>(), o.at("center").at(1).get<int>()};
        r.object.size = o.at("size").get<int>();
        const auto& b = o.at("bbox");
        r.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        m.objects.push_back(std::move(r));
    }
    const auto& mask = j.at("object_mask");
    const auto runs = mask.at("runs").get<std::vector<std::uint32_t>>();
    m.object_mask = BinaryMask::from_run_lengths(mask.at("width").get<int>(),
                                                 mask.at("height").get<int>(), runs);
    m.seed = j.at("seed").get<std::uint64_t>();
    auto tag = variation_from_string(j.at("variation_tag").get<std::string>());
    auto bucket = bucket_from_string(j.at("count_bucket").get<std::string>());
    if (!tag || !bucket) {
        throw FormatError("bad variation tag or bucket in manifest " + m.image_id);
    }
    m.variation = *tag;
    m.bucket = *bucket;
    m.variant = j.at("variant").get<std::string>();
    m.base_index = j.at("base_index").get<std::size_t>();
    m.background = style_from_json(j.at("background"));
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    if (static_cast<std::size_t>(m.true_count) != m.objects.size()) {
        throw FormatError("manifest " + m.image_id + ": true_count does not match objects");
    }
    return m;
}

json to_json(const DatasetConfig& c) {
    std::vector<std::string> axes, shapes, opats, bpats;
    for (auto a : c.axes) axes.emplace_back(to_string(a));
    for (auto s : c.object_shapes) shapes.emplace_back(to_string(s));
    for (auto p : c.object_patterns) opats.emplace_back(to_string(p));
    for (auto p : c.background_patterns) bpats.emplace_back(to_string(p));
    return {{"master_seed", c.master_seed},
            {"images_per_bucket", c.images_per_bucket},
            {"size_bounds", {c.sizes.min, c.sizes.max}},
            {"margin", c.margin},
            {"width", c.width},
            {"height", c.height},
            {"attempt_budget", c.attempt_budget},
            {"axes", axes},
            {"object_colors", c.object_colors},
            {"background_colors", c.background_colors},
            {"object_shapes", shapes},
            {"object_patterns", opats},
            {"background_patterns", bpats}};
}

DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    c.master_seed = j.value("master_seed", c.master_seed);
    c.images_per_bucket = j.value("images_per_bucket", c.images_per_bucket);
    if (j.contains("size_bounds")) {
        c.sizes = {j["size_bounds"].at(0).get<int>(), j["size_bounds"].at(1).get<int>()};
    }
    c.margin = j.value("margin", c.margin);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.attempt_budget = j.value("attempt_budget", c.attempt_budget);
    if (j.contains("axes")) {
        c.axes.clear();
        for (const auto& a : j["axes"]) {
            auto tag = variation_from_string(a.get<std::string>());
            if (!tag) {
                throw std::invalid_argument("unknown variation axis: " + a.get<std::string>());
            }
            if (*tag != VariationTag::baseline) {
                c.axes.push_back(*tag);
            }
        }
    }
    c.object_colors = j.value("object_colors", c.object_colors);
    c.background_colors = j.value("background_colors", c.background_colors);
    if (j.contains("object_shapes")) {
        c.object_shapes.clear();
        for (const auto& s : j["object_shapes"]) {
            auto shape = shape_from_string(s.get<std::string>());
            if (!shape) {
                throw std::invalid_argument("unknown shape: " + s.get<std::string>());
            }
            c.object_shapes.push_back(*shape);
        }
    }
    for (const auto& p : j.value("object_patterns", std::vector<std::string>{})) {
        c.object_patterns.push_back(require_pattern(p));
    }
    for (const auto& p : j.value("background_patterns", std::vector<std::string>{})) {
        c.background_patterns.push_back(require_pattern(p));
    }
    return c;
}

SceneSpec baseline_scene(const DatasetConfig& config, std::size_t index) {
    const auto per = static_cast<std::size_t>(config.images_per_bucket);
    const std::size_t bucket = std::min(index / per, kBucketCount - 1);
    const auto [lo, hi] = bucket_range(bucket);

    SceneSpec spec;
    spec.width = config.width;
    spec.height = config.height;
    spec.variation = VariationTag::baseline;
    spec.seed = config.master_seed ^ static_cast<std::uint64_t>(index);
    spec.background = Style::solid("white");

    Rng rng(spec.seed);
    PlacementRequest req;
    req.count = static_cast<int>(rng.uniform_int(lo, hi));
    req.sizes = config.sizes;
    req.canvas_width = config.width;
    req.canvas_height = config.height;
    req.margin = config.margin;
    req.seed = rng.next();
    req.attempt_budget = config.attempt_budget;

    std::vector<Placement> placements;
    try {
        placements = place_objects(req);
    } catch (const PlacementInfeasible& e) {
        throw PlacementInfeasible("bucket " + std::string(to_string(static_cast<CountBucket>(bucket))) +
                                  ", image " + std::to_string(index) + ": " + e.what());
    }
    const auto black = Style::solid("black");
    for (const auto& p : placements) {
        spec.objects.push_back({Shape::circle, black, p.center, p.size});
    }
    return spec;
}

SceneSpec vary_scene(const SceneSpec& base, VariationTag tag, const std::string& variant) {
    SceneSpec s = base;
    s.variation = tag;
    auto set_fill = [&](const Style& fill) {
        for (auto& o : s.objects) {
            o.fill = fill;
        }
    };
    switch (tag) {
        case VariationTag::baseline:
            break;
        case VariationTag::bg_color:
            s.background = Style::solid(variant);
            set_fill(Style::solid("white"));
            break;
        case VariationTag::bg_texture:
            s.background = Style::texture(require_pattern(variant), "blue-green", "black");
            set_fill(Style::solid("white"));
            break;
        case VariationTag::obj_color:
            if (variant == "multicolor") {
                for (std::size_t i = 0; i < s.objects.size(); ++i) {
                    const auto name = kMulticolorCycle[i % kMulticolorCycle.size()];
                    s.objects[i].fill = Style::solid("multicolor", *color_by_name(name));
                }
            } else {
                set_fill(Style::solid(variant));
            }
            break;
        case VariationTag::obj_shape: {
            auto shape = shape_from_string(variant);
            if (!shape) {
                throw std::invalid_argument("unknown shape: " + variant);
            }
            for (auto& o : s.objects) {
                o.shape = *shape;
            }
            break;
        }
        case VariationTag::obj_texture:
            set_fill(Style::texture(require_pattern(variant), "blue-green", "light gray"));
            break;
    }
    return s;
}

std::vector<DatasetItem> plan_dataset(const DatasetConfig& config) {
    if (config.images_per_bucket < 1) {
        throw std::invalid_argument("images_per_bucket must be positive");
    }
    const std::size_t n = kBucketCount * static_cast<std::size_t>(config.images_per_bucket);
    std::vector<SceneSpec> baselines(n);
    for (std::size_t i = 0; i < n; ++i) {
        baselines[i] = baseline_scene(config, i);
    }

    std::vector<DatasetItem> items;
    auto emit = [&](VariationTag tag, const std::string& variant) {
        for (std::size_t i = 0; i < n; ++i) {
            DatasetItem item;
            item.spec = tag == VariationTag::baseline ? baselines[i] : vary_scene(baselines[i], tag, variant);
            item.image_id = image_id_for(tag, variant, i);
            item.variant = variant;
            item.base_index = i;
            item.true_count = static_cast<std::int64_t>(item.spec.objects.size());
            item.relative_dir = fs::path(std::string(to_string(tag))) / path_token(variant);
            items.push_back(std::move(item));
        }
    };
    emit(VariationTag::baseline, "default");
    for (auto tag : config.axes) {
        if (tag == VariationTag::baseline) {
            continue;
        }
        for (const auto& v : variants_for(config, tag)) {
            emit(tag, v);
        }
    }
    return items;
}

json to_json(const DatasetIndex& index) {
    json images = json::array();
    for (const auto& e : index.images) {
        images.push_back({{"image_id", e.image_id},
                          {"variation_tag", std::string(to_string(e.variation))},
                          {"variant", e.variant},
                          {"count_bucket", std::string(to_string(e.bucket))},
                          {"true_count", e.true_count},
                          {"base_index", e.base_index},
                          {"png", e.png},
                          {"manifest", e.manifest}});
    }
    return {{"master_seed", index.master_seed},
            {"images_per_bucket", index.images_per_bucket},
            {"images", images}};
}

DatasetIndex index_from_json(const json& j) {
    DatasetIndex idx;
    idx.master_seed = j.at("master_seed").get<std::uint64_t>();
    idx.images_per_bucket = j.at("images_per_bucket").get<int>();
    for (const auto& e : j.at("images")) {
        IndexEntry entry;
        entry.image_id = e.at("image_id").get<std::string>();
        auto tag = variation_from_string(e.at("variation_tag").get<std::string>());
        auto bucket = bucket_from_string(e.at("count_bucket").get<std::string>());
        if (!tag || !bucket) {
            throw FormatError("bad index entry " + entry.image_id);
        }
        entry.variation = *tag;
        entry.bucket = *bucket;
        entry.variant = e.at("variant").get<std::string>();
        entry.true_count = e.at("true_count").get<std::int64_t>();
        entry.base_index = e.at("base_index").get<std::size_t>();
        entry.png = e.at("png").get<std::string>();
        entry.manifest = e.at("manifest").get<std::string>();
        idx.images.push_back(std::move(entry));
    }
    return idx;
}

DatasetIndex generate_dataset(const DatasetConfig& config, const fs::path& root, Exec exec) {
    const auto items = plan_dataset(config);
    DatasetIndex index;
    index.master_seed = config.master_seed;
    index.images_per_bucket = config.images_per_bucket;
    index.images.resize(items.size());

    for (const auto& item : items) {
        fs::create_directories(root / item.relative_dir);
    }

    const auto count = static_cast<std::ptrdiff_t>(items.size());
    std::string failure;
    auto produce = [&](std::ptrdiff_t k) {
        const auto& item = items[static_cast<std::size_t>(k)];
        const auto png_rel = (item.relative_dir / (item.image_id + ".png")).generic_string();
        const auto json_rel = (item.relative_dir / (item.image_id + ".json")).generic_string();
        const auto manifest = make_manifest(item.spec, item.image_id, item.variant, item.base_index);
        write_png(root / png_rel, render_scene(item.spec, Exec::serial));
        write_text(root / json_rel, to_json(manifest).dump(1) + "\n");
        index.images[static_cast<std::size_t>(k)] = {item.image_id, item.spec.variation,
                                                     item.variant, manifest.bucket,
                                                     manifest.true_count, item.base_index,
                                                     png_rel, json_rel};
    };
    if (exec == Exec::serial) {
        for (std::ptrdiff_t k = 0; k < count; ++k) {
            produce(k);
        }
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t k = 0; k < count; ++k) {
            try {
                produce(k);
            } catch (const std::exception& e) {
#pragma omp critical(countlab_dataset_failure)
                if (failure.empty()) {
                    failure = e.what();
                }
            }
        }
        if (!failure.empty()) {
            throw Error("dataset generation failed: " + failure);
        }
    }
    write_text(root / "index.json", to_json(index).dump(1) + "\n");
    return index;
}

DatasetIndex load_index(const fs::path& root) { return index_from_json(read_json(root / "index.json")); }

SceneManifest load_manifest(const fs::path& root, const IndexEntry& entry) {
    return manifest_from_json(read_json(root / entry.manifest));
}

std::uint64_t dataset_fingerprint(const DatasetConfig& config) {
    std::uint64_t h = fnv1a64("countlab-dataset-v1");
    for (const auto& item : plan_dataset(config)) {
        const auto manifest = make_manifest(item.spec, item.image_id, item.variant, item.base_index);
        h = fnv1a64(to_json(manifest).dump(), h);
        const auto image = render_scene(item.spec);
        const auto bytes = image.bytes();
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), h);
    }
    return h;
}

}  // namespace countlab
