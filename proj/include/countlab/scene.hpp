// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "countlab/exec.hpp"
#include "countlab/image.hpp"
#include "countlab/texture.hpp"

namespace countlab {

enum class Shape { circle, rectangle, triangle, polygon, star };

std::string_view to_string(Shape s);
/// Plural noun used in prompts ("circles", "stars").
std::string_view plural_noun(Shape s);
std::optional<Shape> shape_from_string(std::string_view s);

enum class VariationTag { baseline, bg_color, bg_texture, obj_color, obj_shape, obj_texture };

std::string_view to_string(VariationTag v);
std::optional<VariationTag> variation_from_string(std::string_view s);

enum class CountBucket { below_10, from_10_to_19, from_20_to_29, from_30_to_39, from_40_to_50 };

inline constexpr std::size_t kBucketCount = 5;

/// "<10", "10–19", "20–29", "30–39", "40–50" (en dash).
std::string_view to_string(CountBucket b);
std::optional<CountBucket> bucket_from_string(std::string_view s);
/// Counts of 50 and above land in the top bucket.
CountBucket bucketize(std::int64_t true_count);

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct ObjectSpec {
    Shape shape = Shape::circle;
    Style fill = Style::solid("black");
    Point center;
    int size = 0;  // radius for circles, circumradius otherwise

    friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct SceneSpec {
    int width = 512;
    int height = 512;
    Style background = Style::solid("white");
    std::vector<ObjectSpec> objects;
    VariationTag variation = VariationTag::baseline;
    std::uint64_t seed = 0;
};

/// Rasterizable outline of one object. Pixel (x, y) is inside when its center,
/// the integer point (x, y), lies inside the shape.
class ShapeGeometry {
  public:
    explicit ShapeGeometry(const ObjectSpec& object);

    bool contains(int x, int y) const;
    const Region& bounds() const { return bounds_; }
    const std::vector<Point>& vertices() const { return vertices_; }

  private:
    Shape shape_;
    Point center_;
    int size_;
    int half_w_ = 0;
    int half_h_ = 0;
    std::vector<Point> vertices_;
    Region bounds_;
};

struct SizeBounds {
    int min = 8;
    int max = 24;
};

struct Placement {
    Point center;
    int size = 0;
    friend bool operator==(const Placement&, const Placement&) = default;
};

struct PlacementRequest {
    int count = 0;
    SizeBounds sizes;
    int canvas_width = 512;
    int canvas_height = 512;
    int margin = 4;
    std::uint64_t seed = 0;
    int attempt_budget = 10'000;  // center resamples per object
};

/// Seeded rejection sampling of non-overlapping circumcircles: every pair
/// satisfies dist(c_i, c_j) >= s_i + s_j + margin and every center is at
/// least size + margin from each edge.
/// Throws PlacementInfeasible when the area heuristic fails or an object
/// exhausts its attempt budget.
std::vector<Placement> place_objects(const PlacementRequest& request);

/// Throws std::invalid_argument when objects leave the canvas, overlap, or use
/// a texture not allowed for their role.
void validate(const SceneSpec& spec);

Bitmap render_scene(const SceneSpec& spec, Exec exec = Exec::parallel);
BinaryMask derive_object_mask(const SceneSpec& spec, Exec exec = Exec::parallel);

}  // namespace countlab
