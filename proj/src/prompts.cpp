// SPDX-License-Identifier: Apache-2.0
#include "countlab/prompts.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "countlab/dataset.hpp"
#include "countlab/errors.hpp"

namespace countlab {
namespace {

constexpr std::array<std::pair<LadderCategory, std::string_view>, 5> kCategoryNames{{
    {LadderCategory::bg_color, "bg_color"},
    {LadderCategory::bg_texture, "bg_texture"},
    {LadderCategory::obj_color, "obj_color"},
    {LadderCategory::obj_shape, "obj_shape"},
    {LadderCategory::obj_texture, "obj_texture"},
}};

constexpr std::string_view kGeneric = "Count the number of distinct objects in this image";

using Rules = std::map<std::string, BindingField>;

PromptSpec rung(LadderCategory c, std::string id, std::string text, std::string note, Rules rules) {
    return {std::move(id), c, std::move(text), std::move(note), std::move(rules)};
}

}  // namespace

std::string_view to_string(LadderCategory c) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (cat == c) {
            return name;
        }
    }
    return "unknown";
}

std::optional<LadderCategory> ladder_category_from_string(std::string_view s) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (name == s) {
            return cat;
        }
    }
    return std::nullopt;
}

LadderCategory default_category(VariationTag tag) {
    switch (tag) {
        case VariationTag::bg_color: return LadderCategory::bg_color;
        case VariationTag::bg_texture: return LadderCategory::bg_texture;
        case VariationTag::obj_shape: return LadderCategory::obj_shape;
        case VariationTag::obj_texture: return LadderCategory::obj_texture;
        case VariationTag::baseline:
        case VariationTag::obj_color: return LadderCategory::obj_color;
    }
    return LadderCategory::obj_color;
}

const std::string& AttributeBindings::get(BindingField f) const {
    switch (f) {
        case BindingField::color: return color;
        case BindingField::shape: return shape;
        case BindingField::pattern: return pattern;
        case BindingField::background_color: return background_color;
        case BindingField::background_pattern: return background_pattern;
    }
    return color;
}

std::string PromptSpec::prompt_id() const { return std::string(to_string(category)) + "/" + ladder_id; }

std::vector<PromptSpec> ladder_for(LadderCategory c) {
    using F = BindingField;
    const std::string generic(kGeneric);
    switch (c) {
        case LadderCategory::obj_color:
        case LadderCategory::obj_shape:
            return {
                rung(c, "P1", generic, "Baseline: generic unconstrained prompt", {}),
                rung(c, "P2", "Count the number of {color} color objects in this image",
                     "Single (simple) attribute: color", {{"color", F::color}}),
                rung(c, "P3", "Count the number of {color} color {shape} in this image",
                     "Compositional (simple) attribute: color and shape",
                     {{"color", F::color}, {"shape", F::shape}}),
            };
        case LadderCategory::bg_color:
            return {
                rung(c, "P1", generic, "Baseline: generic unconstrained prompt", {}),
                rung(c, "P2",
                     "Count the number of {color} objects in this image with {background_color} background",
                     "Compositional (simple) attribute: object color and background color",
                     {{"color", F::color}, {"background_color", F::background_color}}),
                rung(c, "P3",
                     "Count the number of {color} {shape} in this image with {background_color} background",
                     "Compositional (complex) attribute: two object attributes and background color",
                     {{"color", F::color}, {"shape", F::shape},
                      {"background_color", F::background_color}}),
            };
        case LadderCategory::obj_texture:
            return {
                rung(c, "P1", generic, "Baseline: generic unconstrained prompt", {}),
                rung(c, "P2", "Count the number of {color} color objects in this image",
                     "Single (simple) attribute: color", {{"color", F::color}}),
                rung(c, "P3", "Count the number of objects with {pattern} pattern in this image",
                     "Single (complex) attribute: texture", {{"pattern", F::pattern}}),
                rung(c, "P4",
                     "Count the number of {pattern} pattern with {color} color objects in this image",
                     "Compositional (target): texture and color",
                     {{"pattern", F::pattern}, {"color", F::color}}),
                rung(c, "P5",
                     "Count the number of {pattern} pattern with {color} color {shape} in this image",
                     "Compositional (high load): texture, color and shape",
                     {{"pattern", F::pattern}, {"color", F::color}, {"shape", F::shape}}),
            };
        case LadderCategory::bg_texture:
            return {
                rung(c, "P1", generic, "Baseline: generic unconstrained prompt", {}),
                rung(c, "P2", "Count the number of {color} color objects in this image",
                     "Single (simple) attribute: object color", {{"color", F::color}}),
                rung(c, "P3", "Count the number of {color} color {shape} in this image",
                     "Compositional (target): object color and shape",
                     {{"color", F::color}, {"shape", F::shape}}),
                rung(c, "P4",
                     "Count the number of {color} color objects in this image with {pattern} background",
                     "Compositional (target+): object color and background texture",
                     {{"color", F::color}, {"pattern", F::background_pattern}}),
                rung(c, "P5",
                     "Count the number of {color} color {shape} in this image with "
                     "{background_color} {pattern} background",
                     "Compositional (high load): object color, shape, background color and texture",
                     {{"color", F::color}, {"shape", F::shape},
                      {"background_color", F::background_color}, {"pattern", F::background_pattern}}),
            };
    }
    return {};
}

std::vector<std::string> placeholders(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        const auto close = text.find('}', pos + 1);
        if (close == std::string_view::npos) {
            break;
        }
        const auto name = text.substr(pos + 1, close - pos - 1);
        const bool identifier = !name.empty() && std::all_of(name.begin(), name.end(), [](char ch) {
            return std::islower(static_cast<unsigned char>(ch)) || ch == '_';
        });
        if (identifier && std::find(out.begin(), out.end(), name) == out.end()) {
            out.emplace_back(name);
        }
        pos = close + 1;
    }
    return out;
}

std::string build_prompt(const PromptSpec& spec, const AttributeBindings& bindings) {
    std::string text = spec.template_text;
    for (const auto& name : placeholders(spec.template_text)) {
        const auto rule = spec.rules.find(name);
        if (rule == spec.rules.end() || bindings.get(rule->second).empty()) {
            throw MissingBinding(name);
        }
        const std::string token = "{" + name + "}";
        const auto& value = bindings.get(rule->second);
        for (auto pos = text.find(token); pos != std::string::npos;
             pos = text.find(token, pos + value.size())) {
            text.replace(pos, token.size(), value);
        }
    }
    return text + std::string(kAnswerSuffix);
}

AttributeBindings bindings_for(const SceneManifest& m) {
    AttributeBindings b;
    const bool bg_axis = m.variation == VariationTag::bg_color || m.variation == VariationTag::bg_texture;
    if (!m.objects.empty()) {
        const auto& fill = m.objects.front().object.fill;
        b.color = fill.color_name;
        b.shape = std::string(plural_noun(m.objects.front().object.shape));
        if (fill.kind == Style::Kind::texture) {
            b.pattern = std::string(display_name(fill.pattern));
        }
    } else {
        b.color = m.variation == VariationTag::obj_texture ? "blue-green" : bg_axis ? "white" : "black";
        b.shape = "circles";
    }
    b.background_color = m.background.color_name;
    if (m.background.kind == Style::Kind::texture) {
        b.background_pattern = std::string(display_name(m.background.pattern));
    }
    return b;
}

}  // namespace countlab
