// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "countlab/image.hpp"

namespace countlab {

enum class Pattern {
    checkerboard,
    dots,
    diagonal_stripes,
    vertical_stripes,
    horizontal_stripes,
    linear_gradient,
    radial_gradient,
    concentric_circles,
    concentric_rings,
    crosshatch,
    zigzag,
    bubbles,
    noise,
};

std::string_view to_string(Pattern p);
/// Human phrasing used in prompts ("diagonal stripes", "linear gradient").
std::string_view display_name(Pattern p);
std::optional<Pattern> pattern_from_string(std::string_view s);

std::span<const Pattern> object_patterns();
std::span<const Pattern> background_patterns();
bool allowed_for_objects(Pattern p);
bool allowed_for_background(Pattern p);

struct NamedColor {
    std::string_view name;
    Rgb rgb;
};

/// Object fill colors in the benchmark (black is the baseline).
std::span<const NamedColor> object_colors();
/// Background colors in the benchmark (white is the baseline).
std::span<const NamedColor> background_colors();
/// Looks up any known color name, including "blue-green" and "gray".
std::optional<Rgb> color_by_name(std::string_view name);

struct TextureParams {
    int period = 16;      // stripes, circles, rings, crosshatch, zigzag
    int stroke = 4;
    int cell = 16;        // checkerboard
    int dot_radius = 3;
    int dot_grid = 16;

    friend bool operator==(const TextureParams&, const TextureParams&) = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Region {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    friend bool operator==(const Region&, const Region&) = default;
};

/// Fill of an object or of the background: a solid color or a two-color texture.
struct Style {
    enum class Kind { solid_color, texture };

    Kind kind = Kind::solid_color;
    std::string color_name = "white";  // solid color, or texture foreground color
    Rgb color{255, 255, 255};
    Pattern pattern = Pattern::checkerboard;
    Rgb base{255, 255, 255};  // texture background color
    TextureParams params;

    static Style solid(std::string_view name);
    static Style solid(std::string name, Rgb rgb);
    static Style texture(Pattern p, std::string_view fg_name, std::string_view base_name);

    friend bool operator==(const Style&, const Style&) = default;
};

/// Color of `style` at canvas pixel (x, y). `region` bounds gradients; `seed`
/// drives the noise and bubble layouts.
Rgb shade(const Style& style, int x, int y, const Region& region, std::uint64_t seed);

}  // namespace countlab
