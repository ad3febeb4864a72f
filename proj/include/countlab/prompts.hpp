// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "countlab/scene.hpp"

namespace countlab {

struct SceneManifest;

enum class LadderCategory { bg_color, bg_texture, obj_color, obj_shape, obj_texture };

std::string_view to_string(LadderCategory c);
std::optional<LadderCategory> ladder_category_from_string(std::string_view s);
/// Ladder used for images of a variation axis; baseline images use obj_color.
LadderCategory default_category(VariationTag tag);

enum class BindingField { color, shape, pattern, background_color, background_pattern };

struct AttributeBindings {
    std::string color;
    std::string shape;
    std::string pattern;
    std::string background_color;
    std::string background_pattern;

    const std::string& get(BindingField f) const;
};

/// One rung of a prompt ladder. `rules` maps every {placeholder} in the
/// template to the binding field that fills it.
struct PromptSpec {
    std::string ladder_id;  // "P1".."P5"
    LadderCategory category = LadderCategory::obj_color;
    std::string template_text;
    std::string role_note;
    std::map<std::string, BindingField> rules;

    std::string prompt_id() const;  // "obj_texture/P2"
};

inline constexpr std::string_view kAnswerSuffix =
    ". Answer the count within curly brackets, eg. {10}";

/// Full rung sequence in ladder order: 3 rungs for color/shape ladders, 5 for texture ladders.
std::vector<PromptSpec> ladder_for(LadderCategory category);

/// Names of the {placeholders} in a template, in order of first appearance.
std::vector<std::string> placeholders(std::string_view template_text);

/// Substitutes every placeholder and appends kAnswerSuffix.
/// Throws MissingBinding when a placeholder's bound value is empty.
std::string build_prompt(const PromptSpec& spec, const AttributeBindings& bindings);

/// Binding values read from a manifest's vocabulary; falls back to the ladder
/// defaults (blue-green objects for object textures, white objects on
/// background variations, circles) when the scene has no objects.
AttributeBindings bindings_for(const SceneManifest& manifest);

}  // namespace countlab
