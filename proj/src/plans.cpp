// SPDX-License-Identifier: Apache-2.0
#include "countlab/plans.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "countlab/errors.hpp"

namespace countlab {
using nlohmann::json;

std::string_view to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::qwen25: return "qwen25";
        case ModelFamily::qwen3: return "qwen3";
        case ModelFamily::kimi: return "kimi";
        case ModelFamily::internvl: return "internvl";
        case ModelFamily::mock: return "mock";
    }
    return "mock";
}

std::optional<ModelFamily> model_family_from_string(std::string_view s) {
    for (auto f : {ModelFamily::qwen25, ModelFamily::qwen3, ModelFamily::kimi, ModelFamily::internvl,
                   ModelFamily::mock}) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

LayerGroup LayerGroups::group_of(std::size_t layer) const {
    if (layer < early_end) return LayerGroup::early;
    if (layer < middle_end) return LayerGroup::middle;
    return LayerGroup::late;
}

void LayerGroups::validate() const {
    if (!(0 < early_end && early_end < middle_end && middle_end < layers)) {
        throw std::invalid_argument("layer groups must satisfy 0 < early_end < middle_end < layers");
    }
}

LayerGroups proportional_groups(std::size_t layers) {
    LayerGroups g{layers / 4, layers * 3 / 4, layers};
    g.validate();
    return g;
}

LayerGroups layer_groups(ModelFamily f) {
    switch (f) {
        case ModelFamily::qwen25:
        case ModelFamily::qwen3: return {8, 24, 32};
        case ModelFamily::kimi: return {9, 18, 27};
        case ModelFamily::internvl: return proportional_groups(48);
        case ModelFamily::mock: return proportional_groups(6);
    }
    return proportional_groups(6);
}

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::decode: return "decode";
        case Phase::prefill: return "prefill";
        case Phase::both: return "both";
    }
    return "decode";
}

std::optional<Phase> phase_from_string(std::string_view s) {
    for (auto p : {Phase::decode, Phase::prefill, Phase::both}) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

const std::vector<std::string>& strategy_names() {
    static const std::vector<std::string> names{
        "baseline",
        "uniform_amplify",
        "uniform_suppress",
        "uniform_focus",
        "uniform_balance",
        "progressive_visual_fade",
        "progressive_visual_grow",
        "early_visual_only",
        "middle_visual_boost",
        "late_visual_retention",
        "extreme_visual_early",
        "extreme_text_late",
        "alternating_amp_sup",
        "early_amplify_visual_mask",
        "middle_amplify_visual_mask",
        "late_amplify_visual_mask",
        "early_amplify_visual_mask_bg_suppress",
        "middle_amplify_visual_mask_bg_suppress",
        "late_amplify_visual_mask_bg_suppress",
    };
    return names;
}

bool is_strategy_name(std::string_view name) {
    const auto& n = strategy_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

namespace {

using Kind = StrategyKind;

// Kind per layer for the named strategy; mask strategies return the target group.
std::vector<Kind> schedule(std::string_view name, const LayerGroups& g) {
    const std::size_t L = g.layers;
    std::vector<Kind> k(L, Kind::none);
    auto by_group = [&](Kind early, Kind middle, Kind late) {
        for (std::size_t l = 0; l < L; ++l) {
            switch (g.group_of(l)) {
                case LayerGroup::early: k[l] = early; break;
                case LayerGroup::middle: k[l] = middle; break;
                case LayerGroup::late: k[l] = late; break;
            }
        }
    };
    const std::size_t extreme = L * 3 / 8;  // 37.5% rounded down

    if (name == "baseline") {
    } else if (name == "uniform_amplify") {
        by_group(Kind::amplify, Kind::amplify, Kind::amplify);
    } else if (name == "uniform_suppress") {
        by_group(Kind::suppress, Kind::suppress, Kind::suppress);
    } else if (name == "uniform_focus") {
        by_group(Kind::focus, Kind::focus, Kind::focus);
    } else if (name == "uniform_balance") {
        by_group(Kind::balance, Kind::balance, Kind::balance);
    } else if (name == "progressive_visual_fade") {
        by_group(Kind::amplify, Kind::balance, Kind::suppress);
    } else if (name == "progressive_visual_grow") {
        by_group(Kind::suppress, Kind::balance, Kind::amplify);
    } else if (name == "early_visual_only") {
        by_group(Kind::focus, Kind::suppress, Kind::suppress);
    } else if (name == "middle_visual_boost") {
        by_group(Kind::balance, Kind::amplify, Kind::balance);
    } else if (name == "late_visual_retention") {
        by_group(Kind::balance, Kind::balance, Kind::amplify);
    } else if (name == "extreme_visual_early") {
        for (std::size_t l = 0; l < L; ++l) k[l] = l < extreme ? Kind::focus : Kind::balance;
    } else if (name == "extreme_text_late") {
        for (std::size_t l = 0; l < L; ++l) k[l] = l >= L - extreme ? Kind::suppress : Kind::balance;
    } else if (name == "alternating_amp_sup") {
        for (std::size_t l = 0; l < L; ++l) k[l] = l % 2 == 0 ? Kind::amplify : Kind::suppress;
    } else if (name.find("_amplify_visual_mask") != std::string_view::npos) {
        const auto group = name.starts_with("early")    ? LayerGroup::early
                           : name.starts_with("middle") ? LayerGroup::middle
                                                        : LayerGroup::late;
        for (std::size_t l = 0; l < L; ++l) {
            if (g.group_of(l) == group) k[l] = Kind::mask_amplify;
        }
    }
    return k;
}

}  // namespace

InterventionPlan make_plan(std::string_view name, ModelFamily family, const StrategyConfig& params) {
    return make_plan(name, family, layer_groups(family), params);
}

InterventionPlan make_plan(std::string_view name, ModelFamily family, const LayerGroups& groups,
                           const StrategyConfig& params) {
    if (!is_strategy_name(name)) {
        throw std::invalid_argument("unknown strategy: " + std::string(name));
    }
    groups.validate();
    params.validate();
    InterventionPlan plan;
    plan.name = std::string(name);
    plan.family = family;
    plan.groups = groups;
    plan.params = params;
    plan.params.kind = StrategyKind::none;

    StrategyConfig layer_params = plan.params;
    if (name.find("_amplify_visual_mask") != std::string_view::npos &&
        !name.ends_with("_bg_suppress")) {
        layer_params.alpha_bg = 1.0;  // object amplification only
    }
    for (Kind kind : schedule(name, groups)) {
        StrategyConfig c = layer_params;
        c.kind = kind;
        plan.layers.push_back(c);
    }
    return plan;
}

StrategyConfig plan_lookup(const InterventionPlan& plan, std::size_t layer) {
    if (layer >= plan.layers.size()) {
        StrategyConfig c = plan.params;
        c.kind = StrategyKind::none;
        return c;
    }
    return plan.layers[layer];
}

bool requires_mask(const InterventionPlan& plan) {
    return std::any_of(plan.layers.begin(), plan.layers.end(),
                       [](const StrategyConfig& c) { return c.kind == StrategyKind::mask_amplify; });
}

json to_json(const InterventionPlan& plan) {
    json overrides = json::object();
    for (const auto& [layer, cfg] : plan.overrides) overrides[std::to_string(layer)] = to_json(cfg);
    json params = to_json(plan.params);
    params.erase("kind");
    json per_layer = json::array();
    for (const auto& c : plan.layers) per_layer.push_back(to_string(c.kind));
    return {{"name", plan.name},
            {"model_family", to_string(plan.family)},
            {"groups",
             {{"early", {0, plan.groups.early_end}},
              {"middle", {plan.groups.early_end, plan.groups.middle_end}},
              {"late", {plan.groups.middle_end, plan.groups.layers}}}},
            {"phase", to_string(plan.phase)},
            {"params", params},
            {"overrides", overrides},
            {"layers", per_layer}};
}

InterventionPlan plan_from_json(const json& j) {
    const auto name = j.at("name").get<std::string>();
    const auto fam_s = j.value("model_family", std::string("mock"));
    const auto family = model_family_from_string(fam_s);
    if (!family) throw FormatError("unknown model family: " + fam_s);

    LayerGroups groups = layer_groups(*family);
    if (j.contains("groups")) {
        const auto& g = j["groups"];
        const auto early = g.at("early").get<std::vector<std::size_t>>();
        const auto middle = g.at("middle").get<std::vector<std::size_t>>();
        const auto late = g.at("late").get<std::vector<std::size_t>>();
        if (early.size() != 2 || middle.size() != 2 || late.size() != 2 || early[0] != 0 ||
            early[1] != middle[0] || middle[1] != late[0]) {
            throw FormatError("plan groups must be contiguous half-open ranges starting at 0");
        }
        groups = {early[1], middle[1], late[1]};
    }
    StrategyConfig params;
    if (j.contains("params")) params = strategy_from_json(j["params"]);

    InterventionPlan plan = make_plan(name, *family, groups, params);
    if (j.contains("phase")) {
        const auto s = j["phase"].get<std::string>();
        const auto p = phase_from_string(s);
        if (!p) throw FormatError("unknown phase: " + s);
        plan.phase = *p;
    }
    if (j.contains("overrides")) {
        for (const auto& [key, value] : j["overrides"].items()) {
            const std::size_t layer = std::stoul(key);
            if (layer >= plan.layers.size()) {
                throw FormatError("override for layer " + key + " beyond " +
                                  std::to_string(plan.layers.size()) + " layers");
            }
            const auto cfg = strategy_from_json(value, plan.layers[layer]);
            plan.overrides[layer] = cfg;
            plan.layers[layer] = cfg;
        }
    }
    return plan;
}

InterventionPlan load_plan(const std::string& name_or_path, ModelFamily family) {
    if (is_strategy_name(name_or_path)) {
        return make_plan(name_or_path, family);
    }
    std::ifstream in(name_or_path);
    if (!in) {
        throw std::invalid_argument("neither a strategy name nor a readable plan file: " + name_or_path);
    }
    try {
        return plan_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw FormatError(name_or_path + ": " + e.what());
    }
}

std::vector<AttentionTensor> apply_intervention(std::span<const AttentionTensor> layers,
                                                const InterventionPlan& plan, VisualSpan v,
                                                const std::vector<std::size_t>* object_keys,
                                                std::size_t decode_start, Exec exec,
                                                InterventionStats* stats) {
    if (requires_mask(plan) && !object_keys) {
        throw MissingMask("plan " + plan.name + " uses mask_amplify but no object tokens were given");
    }
    QueryRange rows;
    if (plan.phase == Phase::decode) rows.begin = decode_start;
    if (plan.phase == Phase::prefill) rows.end = decode_start;

    std::vector<AttentionTensor> out;
    out.reserve(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const StrategyConfig cfg = plan_lookup(plan, l);
        std::size_t passed = 0;
        out.push_back(apply_strategy(layers[l], v, cfg, object_keys, rows, exec, &passed));
        if (stats) {
            stats->balance_passed_through += passed;
            if (cfg.kind != StrategyKind::none) ++stats->layers_modified;
        }
    }
    return out;
}

}  // namespace countlab
