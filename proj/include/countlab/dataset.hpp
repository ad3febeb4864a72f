// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "countlab/exec.hpp"
#include "countlab/image.hpp"
#include "countlab/scene.hpp"

namespace countlab {

struct ObjectRecord {
    ObjectSpec object;
    Region bbox;
};

/// Ground truth for one generated image.
struct SceneManifest {
    std::string image_id;
    std::int64_t true_count = 0;
    std::vector<ObjectRecord> objects;
    BinaryMask object_mask;
    std::uint64_t seed = 0;
    VariationTag variation = VariationTag::baseline;
    std::string variant = "default";  // color, shape or pattern name of the variation
    CountBucket bucket = CountBucket::below_10;
    std::size_t base_index = 0;       // index of the baseline scene it derives from
    Style background;
    int width = 512;
    int height = 512;
};

SceneManifest make_manifest(const SceneSpec& spec, std::string image_id, std::string variant,
                            std::size_t base_index);
/// Scene that reproduces the manifest's image (objects, background, seed).
SceneSpec scene_from_manifest(const SceneManifest& m);

nlohmann::json to_json(const Style& s);
Style style_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneManifest& m);
SceneManifest manifest_from_json(const nlohmann::json& j);

struct DatasetConfig {
    std::uint64_t master_seed = 20240601;
    int images_per_bucket = 10;
    SizeBounds sizes{8, 24};
    int margin = 4;
    int width = 512;
    int height = 512;
    int attempt_budget = 10'000;
    std::vector<VariationTag> axes{VariationTag::bg_color, VariationTag::bg_texture,
                                   VariationTag::obj_color, VariationTag::obj_shape,
                                   VariationTag::obj_texture};
    std::vector<std::string> object_colors{"white", "red", "yellow", "blue",
                                           "light gray", "green", "multicolor"};
    std::vector<std::string> background_colors{"black", "red", "yellow", "blue", "gray",
                                               "green"};
    std::vector<Shape> object_shapes{Shape::rectangle, Shape::triangle, Shape::polygon,
                                     Shape::star};
    std::vector<Pattern> object_patterns;      // empty = every object texture
    std::vector<Pattern> background_patterns;  // empty = every background texture
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct DatasetItem {
    SceneSpec spec;
    std::string image_id;
    std::string variant;
    std::size_t base_index = 0;
    std::int64_t true_count = 0;
    std::filesystem::path relative_dir;  // <variation_tag>/<variant>
};

/// Baseline placements for every bucket, then one scene set per variation
/// value reusing those placements. Scenes only; nothing is rendered.
std::vector<DatasetItem> plan_dataset(const DatasetConfig& config);

/// Scene for the baseline image at `index` (count drawn inside its bucket).
SceneSpec baseline_scene(const DatasetConfig& config, std::size_t index);
/// Copy of `base` with exactly the variation's factor changed.
SceneSpec vary_scene(const SceneSpec& base, VariationTag tag, const std::string& variant);

struct IndexEntry {
    std::string image_id;
    VariationTag variation = VariationTag::baseline;
    std::string variant;
    CountBucket bucket = CountBucket::below_10;
    std::int64_t true_count = 0;
    std::size_t base_index = 0;
    std::string png;       // relative to the dataset root
    std::string manifest;  // relative to the dataset root
};

struct DatasetIndex {
    std::uint64_t master_seed = 0;
    int images_per_bucket = 0;
    std::vector<IndexEntry> images;
};

nlohmann::json to_json(const DatasetIndex& index);
DatasetIndex index_from_json(const nlohmann::json& j);

/// Renders every planned scene to <root>/<tag>/<variant>/<image_id>.{png,json}
/// and writes <root>/index.json. Throws PlacementInfeasible naming the bucket.
DatasetIndex generate_dataset(const DatasetConfig& config, const std::filesystem::path& root,
                              Exec exec = Exec::parallel);

DatasetIndex load_index(const std::filesystem::path& root);
SceneManifest load_manifest(const std::filesystem::path& root, const IndexEntry& entry);

/// Fingerprint over manifest JSON and raw pixels of the planned dataset
/// (independent of PNG encoder details).
std::uint64_t dataset_fingerprint(const DatasetConfig& config);

/// "light gray" -> "light_gray"
std::string path_token(std::string_view s);

}  // namespace countlab
