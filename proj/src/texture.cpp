// SPDX-License-Identifier: Apache-2.0
#include "countlab/texture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "countlab/rng.hpp"

namespace countlab {
namespace {

struct PatternName {
    Pattern pattern;
    std::string_view id;
    std::string_view display;
};

constexpr std::array<PatternName, 13> kPatternNames{{
    {Pattern::checkerboard, "checkerboard", "checkerboard"},
    {Pattern::dots, "dots", "dots"},
    {Pattern::diagonal_stripes, "diagonal_stripes", "diagonal stripes"},
    {Pattern::vertical_stripes, "vertical_stripes", "vertical stripes"},
    {Pattern::horizontal_stripes, "horizontal_stripes", "horizontal stripes"},
    {Pattern::linear_gradient, "linear_gradient", "linear gradient"},
    {Pattern::radial_gradient, "radial_gradient", "radial gradient"},
    {Pattern::concentric_circles, "concentric_circles", "concentric circles"},
    {Pattern::concentric_rings, "concentric_rings", "concentric rings"},
    {Pattern::crosshatch, "crosshatch", "crosshatch"},
    {Pattern::zigzag, "zigzag", "zigzag"},
    {Pattern::bubbles, "bubbles", "bubbles"},
    {Pattern::noise, "noise", "noise"},
}};

constexpr std::array<Pattern, 10> kObjectPatterns{
    Pattern::checkerboard,     Pattern::concentric_circles, Pattern::crosshatch,
    Pattern::diagonal_stripes, Pattern::dots,               Pattern::horizontal_stripes,
    Pattern::linear_gradient,  Pattern::radial_gradient,    Pattern::vertical_stripes,
    Pattern::zigzag,
};

constexpr std::array<Pattern, 11> kBackgroundPatterns{
    Pattern::checkerboard,       Pattern::concentric_rings, Pattern::crosshatch,
    Pattern::diagonal_stripes,   Pattern::dots,             Pattern::horizontal_stripes,
    Pattern::linear_gradient,    Pattern::radial_gradient,  Pattern::vertical_stripes,
    Pattern::bubbles,            Pattern::noise,
};

constexpr std::array<NamedColor, 8> kObjectColors{{
    {"black", {0, 0, 0}},
    {"white", {255, 255, 255}},
    {"red", {255, 0, 0}},
    {"yellow", {255, 255, 0}},
    {"blue", {0, 0, 255}},
    {"light gray", {211, 211, 211}},
    {"green", {0, 128, 0}},
    {"multicolor", {0, 0, 0}},
}};

constexpr std::array<NamedColor, 7> kBackgroundColors{{
    {"white", {255, 255, 255}},
    {"black", {0, 0, 0}},
    {"red", {255, 0, 0}},
    {"yellow", {255, 255, 0}},
    {"blue", {0, 0, 255}},
    {"gray", {128, 128, 128}},
    {"green", {0, 128, 0}},
}};

constexpr NamedColor kBlueGreen{"blue-green", {0, 128, 128}};

std::uint64_t isqrt(std::uint64_t v) {
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(v)));
    while (r * r > v) {
        --r;
    }
    while ((r + 1) * (r + 1) <= v) {
        ++r;
    }
    return r;
}

int positive_mod(int a, int m) {
    const int r = a % m;
    return r < 0 ? r + m : r;
}

std::uint8_t lerp_channel(int from, int to, std::int64_t num, std::int64_t den) {
    if (den <= 0) {
        return static_cast<std::uint8_t>(from);
    }
    return static_cast<std::uint8_t>(from + (to - from) * num / den);
}

Rgb lerp(Rgb from, Rgb to, std::int64_t num, std::int64_t den) {
    return {lerp_channel(from.r, to.r, num, den), lerp_channel(from.g, to.g, num, den),
            lerp_channel(from.b, to.b, num, den)};
}

bool on_bubble(int x, int y, std::uint64_t seed) {
    constexpr int kCell = 48;
    const int cx = x / kCell;
    const int cy = y / kCell;
    for (int ny = cy - 1; ny <= cy + 1; ++ny) {
        for (int nx = cx - 1; nx <= cx + 1; ++nx) {
            const auto h = mix64(seed ^ mix64((static_cast<std::uint64_t>(nx + 64) << 32) |
                                              static_cast<std::uint64_t>(ny + 64)));
            const int ox = nx * kCell + 12 + static_cast<int>(h % 24);
            const int oy = ny * kCell + 12 + static_cast<int>((h >> 8) % 24);
            const int r = 6 + static_cast<int>((h >> 16) % 10);
            const std::int64_t dx = x - ox;
            const std::int64_t dy = y - oy;
            const std::int64_t d2 = dx * dx + dy * dy;
            if (d2 >= static_cast<std::int64_t>(r - 1) * (r - 1) &&
                d2 <= static_cast<std::int64_t>(r + 1) * (r + 1)) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

std::string_view to_string(Pattern p) {
    for (const auto& n : kPatternNames) {
        if (n.pattern == p) {
            return n.id;
        }
    }
    return "unknown";
}

std::string_view display_name(Pattern p) {
    for (const auto& n : kPatternNames) {
        if (n.pattern == p) {
            return n.display;
        }
    }
    return "unknown";
}

std::optional<Pattern> pattern_from_string(std::string_view s) {
    for (const auto& n : kPatternNames) {
        if (n.id == s || n.display == s) {
            return n.pattern;
        }
    }
    return std::nullopt;
}

std::span<const Pattern> object_patterns() { return kObjectPatterns; }
std::span<const Pattern> background_patterns() { return kBackgroundPatterns; }

bool allowed_for_objects(Pattern p) {
    return p != Pattern::bubbles && p != Pattern::noise && p != Pattern::concentric_rings;
}

bool allowed_for_background(Pattern p) {
    return p != Pattern::zigzag && p != Pattern::concentric_circles;
}

std::span<const NamedColor> object_colors() { return kObjectColors; }
std::span<const NamedColor> background_colors() { return kBackgroundColors; }

std::optional<Rgb> color_by_name(std::string_view name) {
    if (name == kBlueGreen.name) {
        return kBlueGreen.rgb;
    }
    for (const auto& c : kObjectColors) {
        if (c.name == name && c.name != "multicolor") {
            return c.rgb;
        }
    }
    for (const auto& c : kBackgroundColors) {
        if (c.name == name) {
            return c.rgb;
        }
    }
    return std::nullopt;
}

Style Style::solid(std::string_view name) {
    auto rgb = color_by_name(name);
    if (!rgb) {
        throw std::invalid_argument("unknown color: " + std::string(name));
    }
    return solid(std::string(name), *rgb);
}

Style Style::solid(std::string name, Rgb rgb) {
    Style s;
    s.kind = Kind::solid_color;
    s.color_name = std::move(name);
    s.color = rgb;
    s.base = rgb;
    return s;
}

Style Style::texture(Pattern p, std::string_view fg_name, std::string_view base_name) {
    auto fg = color_by_name(fg_name);
    auto base = color_by_name(base_name);
    if (!fg || !base) {
        throw std::invalid_argument("unknown texture palette color");
    }
    Style s;
    s.kind = Kind::texture;
    s.color_name = std::string(fg_name);
    s.color = *fg;
    s.pattern = p;
    s.base = *base;
    return s;
}

Rgb shade(const Style& style, int x, int y, const Region& region, std::uint64_t seed) {
    if (style.kind == Style::Kind::solid_color) {
        return style.color;
    }
    const auto& tp = style.params;
    const Rgb fg = style.color;
    const Rgb bg = style.base;
    auto pick = [&](bool on) { return on ? fg : bg; };

    switch (style.pattern) {
        case Pattern::checkerboard:
            return pick(((x / tp.cell) + (y / tp.cell)) % 2 == 0);
        case Pattern::dots: {
            const int dx = x % tp.dot_grid - tp.dot_grid / 2;
            const int dy = y % tp.dot_grid - tp.dot_grid / 2;
            return pick(dx * dx + dy * dy <= tp.dot_radius * tp.dot_radius);
        }
        case Pattern::diagonal_stripes:
            return pick((x + y) % tp.period < tp.stroke);
        case Pattern::vertical_stripes:
            return pick(x % tp.period < tp.stroke);
        case Pattern::horizontal_stripes:
            return pick(y % tp.period < tp.stroke);
        case Pattern::linear_gradient:
            return lerp(fg, bg, x - region.x0, region.width() - 1);
        case Pattern::radial_gradient: {
            // doubled coordinates keep the region center on the integer lattice
            const std::int64_t dx = 2 * x - (region.x0 + region.x1 - 1);
            const std::int64_t dy = 2 * y - (region.y0 + region.y1 - 1);
            const std::int64_t w = region.width();
            const std::int64_t h = region.height();
            const auto d = static_cast<std::int64_t>(isqrt(static_cast<std::uint64_t>(dx * dx + dy * dy)));
            const auto dmax = static_cast<std::int64_t>(isqrt(static_cast<std::uint64_t>(w * w + h * h)));
            return lerp(fg, bg, std::min(d, dmax), dmax);
        }
        case Pattern::concentric_circles:
        case Pattern::concentric_rings: {
            const std::int64_t dx = 2 * x - (region.x0 + region.x1 - 1);
            const std::int64_t dy = 2 * y - (region.y0 + region.y1 - 1);
            const auto d = static_cast<int>(isqrt(static_cast<std::uint64_t>(dx * dx + dy * dy)) / 2);
            if (style.pattern == Pattern::concentric_circles) {
                return pick(d % tp.period < tp.stroke);
            }
            return pick(d % tp.period < tp.period / 2);
        }
        case Pattern::crosshatch:
            return pick((x + y) % tp.period < tp.stroke / 2 ||
                        positive_mod(x - y, tp.period) < tp.stroke / 2);
        case Pattern::zigzag: {
            const int tri = std::abs(x % (2 * tp.period) - tp.period);
            return pick((y + tri) % tp.period < tp.stroke);
        }
        case Pattern::bubbles:
            return pick(on_bubble(x, y, seed));
        case Pattern::noise: {
            const auto v = static_cast<std::uint8_t>(
                mix64(seed ^ ((static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint64_t>(x))) & 0xff);
            return {v, v, v};
        }
    }
    return bg;
}

}  // namespace countlab
