// SPDX-License-Identifier: Apache-2.0
#include "countlab/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "countlab/errors.hpp"
#include "countlab/rng.hpp"

namespace countlab {
namespace {

struct UnitOffset {
    double x;
    double y;
};

// y grows downward; all shapes point up.
constexpr std::array<UnitOffset, 3> kTriangle{{
    {0.0, -1.0}, {0.8660254037844386, 0.5}, {-0.8660254037844386, 0.5}}};

constexpr std::array<UnitOffset, 6> kHexagon{{
    {1.0, 0.0}, {0.5, 0.8660254037844386}, {-0.5, 0.8660254037844386},
    {-1.0, 0.0}, {-0.5, -0.8660254037844386}, {0.5, -0.8660254037844386}}};

constexpr double kStarInner = 0.38196601125010515;
constexpr std::array<UnitOffset, 10> kStar{{
    {0.0, -1.0},
    {kStarInner * 0.5877852522924731, kStarInner * -0.8090169943749475},
    {0.9510565162951535, -0.30901699437494745},
    {kStarInner * 0.9510565162951535, kStarInner * 0.30901699437494745},
    {0.5877852522924731, 0.8090169943749475},
    {0.0, kStarInner},
    {-0.5877852522924731, 0.8090169943749475},
    {kStarInner * -0.9510565162951535, kStarInner * 0.30901699437494745},
    {-0.9510565162951535, -0.30901699437494745},
    {kStarInner * -0.5877852522924731, kStarInner * -0.8090169943749475},
}};

// 2:1 rectangle inscribed in the circumcircle.
constexpr double kRectHalfW = 0.8944271909999159;  // 2/sqrt(5)
constexpr double kRectHalfH = 0.4472135954999579;  // 1/sqrt(5)

template <std::size_t N>
std::vector<Point> vertices_of(const std::array<UnitOffset, N>& unit, Point c, int size) {
    std::vector<Point> out;
    out.reserve(N);
    for (const auto& u : unit) {
        out.push_back({c.x + static_cast<int>(std::trunc(size * u.x)),
                       c.y + static_cast<int>(std::trunc(size * u.y))});
    }
    return out;
}

bool inside_polygon(const std::vector<Point>& poly, int x, int y) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const std::int64_t xi = poly[i].x, yi = poly[i].y;
        const std::int64_t xj = poly[j].x, yj = poly[j].y;
        if ((yi > y) != (yj > y)) {
            const std::int64_t den = yj - yi;
            const std::int64_t num = (y - yi) * (xj - xi);
            const std::int64_t lhs = (x - xi) * den;
            if (den > 0 ? lhs < num : lhs > num) {
                inside = !inside;
            }
        }
    }
    return inside;
}

struct ShapeName {
    Shape shape;
    std::string_view id;
    std::string_view plural;
};

constexpr std::array<ShapeName, 5> kShapeNames{{
    {Shape::circle, "circle", "circles"},
    {Shape::rectangle, "rectangle", "rectangles"},
    {Shape::triangle, "triangle", "triangles"},
    {Shape::polygon, "polygon", "polygons"},
    {Shape::star, "star", "stars"},
}};

constexpr std::array<std::pair<VariationTag, std::string_view>, 6> kVariationNames{{
    {VariationTag::baseline, "baseline"},
    {VariationTag::bg_color, "bg_color"},
    {VariationTag::bg_texture, "bg_texture"},
    {VariationTag::obj_color, "obj_color"},
    {VariationTag::obj_shape, "obj_shape"},
    {VariationTag::obj_texture, "obj_texture"},
}};

constexpr std::array<std::string_view, kBucketCount> kBucketNames{
    "<10", "10–19", "20–29", "30–39", "40–50"};

template <typename Fn>
void for_rows(int height, Exec exec, Fn&& fn) {
    if (exec == Exec::serial) {
        for (int y = 0; y < height; ++y) {
            fn(y);
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        fn(y);
    }
}

}  // namespace

std::string_view to_string(Shape s) {
    for (const auto& n : kShapeNames) {
        if (n.shape == s) {
            return n.id;
        }
    }
    return "unknown";
}

std::string_view plural_noun(Shape s) {
    for (const auto& n : kShapeNames) {
        if (n.shape == s) {
            return n.plural;
        }
    }
    return "objects";
}

std::optional<Shape> shape_from_string(std::string_view s) {
    for (const auto& n : kShapeNames) {
        if (n.id == s || n.plural == s) {
            return n.shape;
        }
    }
    return std::nullopt;
}

std::string_view to_string(VariationTag v) {
    for (const auto& [tag, name] : kVariationNames) {
        if (tag == v) {
            return name;
        }
    }
    return "unknown";
}

std::optional<VariationTag> variation_from_string(std::string_view s) {
    for (const auto& [tag, name] : kVariationNames) {
        if (name == s) {
            return tag;
        }
    }
    return std::nullopt;
}

std::string_view to_string(CountBucket b) { return kBucketNames[static_cast<std::size_t>(b)]; }

std::optional<CountBucket> bucket_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kBucketNames.size(); ++i) {
        if (kBucketNames[i] == s) {
            return static_cast<CountBucket>(i);
        }
    }
    return std::nullopt;
}

CountBucket bucketize(std::int64_t true_count) {
    if (true_count < 0) {
        throw std::invalid_argument("bucketize: negative count");
    }
    if (true_count >= 40) {
        return CountBucket::from_40_to_50;
    }
    return static_cast<CountBucket>(true_count / 10);
}

ShapeGeometry::ShapeGeometry(const ObjectSpec& object)
    : shape_(object.shape), center_(object.center), size_(object.size) {
    const Point c = center_;
    switch (shape_) {
        case Shape::circle:
            bounds_ = {c.x - size_, c.y - size_, c.x + size_ + 1, c.y + size_ + 1};
            return;
        case Shape::rectangle:
            half_w_ = static_cast<int>(std::trunc(size_ * kRectHalfW));
            half_h_ = static_cast<int>(std::trunc(size_ * kRectHalfH));
            bounds_ = {c.x - half_w_, c.y - half_h_, c.x + half_w_, c.y + half_h_};
            return;
        case Shape::triangle:
            vertices_ = vertices_of(kTriangle, c, size_);
            break;
        case Shape::polygon:
            vertices_ = vertices_of(kHexagon, c, size_);
            break;
        case Shape::star:
            vertices_ = vertices_of(kStar, c, size_);
            break;
    }
    bounds_ = {vertices_[0].x, vertices_[0].y, vertices_[0].x + 1, vertices_[0].y + 1};
    for (const auto& v : vertices_) {
        bounds_.x0 = std::min(bounds_.x0, v.x);
        bounds_.y0 = std::min(bounds_.y0, v.y);
        bounds_.x1 = std::max(bounds_.x1, v.x + 1);
        bounds_.y1 = std::max(bounds_.y1, v.y + 1);
    }
}

bool ShapeGeometry::contains(int x, int y) const {
    if (x < bounds_.x0 || x >= bounds_.x1 || y < bounds_.y0 || y >= bounds_.y1) {
        return false;
    }
    switch (shape_) {
        case Shape::circle: {
            const std::int64_t dx = x - center_.x;
            const std::int64_t dy = y - center_.y;
            return dx * dx + dy * dy <= static_cast<std::int64_t>(size_) * size_;
        }
        case Shape::rectangle:
            return true;  // bounds are exactly the half-open box
        default:
            return inside_polygon(vertices_, x, y);
    }
}

std::vector<Placement> place_objects(const PlacementRequest& req) {
    if (req.count < 0) {
        throw std::invalid_argument("place_objects: negative count");
    }
    if (req.margin < 1) {
        throw std::invalid_argument("place_objects: margin must be at least 1 px");
    }
    if (req.sizes.min < 1 || req.sizes.max < req.sizes.min) {
        throw std::invalid_argument("place_objects: bad size bounds");
    }
    const double canvas_area = static_cast<double>(req.canvas_width) * req.canvas_height;
    const double worst_area = req.count * std::numbers::pi * req.sizes.max * req.sizes.max;
    if (worst_area > 0.4 * canvas_area) {
        throw PlacementInfeasible("place_objects: " + std::to_string(req.count) +
                                  " objects of size up to " + std::to_string(req.sizes.max) +
                                  " exceed 40% of the canvas area");
    }

    Rng rng(req.seed);
    std::vector<Placement> placed;
    placed.reserve(static_cast<std::size_t>(req.count));
    for (int k = 0; k < req.count; ++k) {
        const int size = static_cast<int>(rng.uniform_int(req.sizes.min, req.sizes.max));
        const int lo = size + req.margin;
        const int hi_x = req.canvas_width - size - req.margin;
        const int hi_y = req.canvas_height - size - req.margin;
        if (hi_x < lo || hi_y < lo) {
            throw PlacementInfeasible("place_objects: object of size " + std::to_string(size) +
                                      " does not fit on the canvas");
        }
        bool ok = false;
        for (int attempt = 0; attempt < req.attempt_budget && !ok; ++attempt) {
            const Point c{static_cast<int>(rng.uniform_int(lo, hi_x)),
                          static_cast<int>(rng.uniform_int(lo, hi_y))};
            ok = std::all_of(placed.begin(), placed.end(), [&](const Placement& p) {
                const std::int64_t dx = c.x - p.center.x;
                const std::int64_t dy = c.y - p.center.y;
                const std::int64_t gap = size + p.size + req.margin;
                return dx * dx + dy * dy >= gap * gap;
            });
            if (ok) {
                placed.push_back({c, size});
            }
        }
        if (!ok) {
            throw PlacementInfeasible("place_objects: object " + std::to_string(k) + " of " +
                                      std::to_string(req.count) + " not placed within " +
                                      std::to_string(req.attempt_budget) + " attempts");
        }
    }
    return placed;
}

void validate(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) {
        throw std::invalid_argument("scene: non-positive canvas");
    }
    if (spec.background.kind == Style::Kind::texture &&
        !allowed_for_background(spec.background.pattern)) {
        throw std::invalid_argument("scene: pattern " +
                                    std::string(to_string(spec.background.pattern)) +
                                    " is not a background texture");
    }
    std::vector<ShapeGeometry> shapes;
    shapes.reserve(spec.objects.size());
    for (const auto& o : spec.objects) {
        if (o.size < 1) {
            throw std::invalid_argument("scene: object size must be positive");
        }
        if (o.fill.kind == Style::Kind::texture && !allowed_for_objects(o.fill.pattern)) {
            throw std::invalid_argument("scene: pattern " + std::string(to_string(o.fill.pattern)) +
                                        " is not an object texture");
        }
        shapes.emplace_back(o);
        const auto& b = shapes.back().bounds();
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > spec.width || b.y1 > spec.height) {
            throw std::invalid_argument("scene: object leaves the canvas");
        }
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        for (std::size_t j = i + 1; j < shapes.size(); ++j) {
            const auto& a = shapes[i].bounds();
            const auto& b = shapes[j].bounds();
            const Region overlap{std::max(a.x0, b.x0), std::max(a.y0, b.y0),
                                 std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
            for (int y = overlap.y0; y < overlap.y1; ++y) {
                for (int x = overlap.x0; x < overlap.x1; ++x) {
                    if (shapes[i].contains(x, y) && shapes[j].contains(x, y)) {
                        throw std::invalid_argument("scene: objects " + std::to_string(i) +
                                                    " and " + std::to_string(j) + " overlap");
                    }
                }
            }
        }
    }
}

Bitmap render_scene(const SceneSpec& spec, Exec exec) {
    validate(spec);
    std::vector<ShapeGeometry> shapes;
    shapes.reserve(spec.objects.size());
    for (const auto& o : spec.objects) {
        shapes.emplace_back(o);
    }
    const Region canvas{0, 0, spec.width, spec.height};
    Bitmap image(spec.width, spec.height);
    for_rows(spec.height, exec, [&](int y) {
        for (int x = 0; x < spec.width; ++x) {
            image.set(x, y, shade(spec.background, x, y, canvas, spec.seed));
        }
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            const auto& b = shapes[i].bounds();
            if (y < b.y0 || y >= b.y1) {
                continue;
            }
            const auto object_seed = spec.seed ^ mix64(i + 1);
            for (int x = b.x0; x < b.x1; ++x) {
                if (shapes[i].contains(x, y)) {
                    image.set(x, y, shade(spec.objects[i].fill, x, y, b, object_seed));
                }
            }
        }
    });
    return image;
}

BinaryMask derive_object_mask(const SceneSpec& spec, Exec exec) {
    validate(spec);
    std::vector<ShapeGeometry> shapes;
    shapes.reserve(spec.objects.size());
    for (const auto& o : spec.objects) {
        shapes.emplace_back(o);
    }
    BinaryMask mask(spec.width, spec.height);
    for_rows(spec.height, exec, [&](int y) {
        for (const auto& s : shapes) {
            const auto& b = s.bounds();
            if (y < b.y0 || y >= b.y1) {
                continue;
            }
            for (int x = b.x0; x < b.x1; ++x) {
                if (s.contains(x, y)) {
                    mask.set(x, y);
                }
            }
        }
    });
    return mask;
}

}  // namespace countlab
