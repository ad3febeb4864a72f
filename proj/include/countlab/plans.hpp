// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "countlab/attention.hpp"

namespace countlab {

enum class ModelFamily { qwen25, qwen3, kimi, internvl, mock };

std::string_view to_string(ModelFamily f);
std::optional<ModelFamily> model_family_from_string(std::string_view s);

enum class LayerGroup { early, middle, late };

/// Early/middle/late as half-open ranges [0, early_end), [early_end, middle_end),
/// [middle_end, layers).
struct LayerGroups {
    std::size_t early_end = 0;
    std::size_t middle_end = 0;
    std::size_t layers = 0;

    LayerGroup group_of(std::size_t layer) const;
    /// Throws std::invalid_argument unless 0 < early_end < middle_end < layers.
    void validate() const;

    friend bool operator==(const LayerGroups&, const LayerGroups&) = default;
};

LayerGroups layer_groups(ModelFamily f);
/// Quarter / three-quarter split for families without published boundaries.
LayerGroups proportional_groups(std::size_t layers);

/// Which query rows an intervention touches.
enum class Phase { decode, prefill, both };

std::string_view to_string(Phase p);
std::optional<Phase> phase_from_string(std::string_view s);

struct InterventionPlan {
    std::string name;
    ModelFamily family = ModelFamily::mock;
    LayerGroups groups;
    Phase phase = Phase::decode;
    StrategyConfig params;                        // shared strategy constants
    std::map<std::size_t, StrategyConfig> overrides;
    std::vector<StrategyConfig> layers;           // materialized, one per layer (overrides applied)
};

/// The 19 strategy ids, baseline first.
const std::vector<std::string>& strategy_names();
bool is_strategy_name(std::string_view name);

/// Throws std::invalid_argument for an unknown name.
InterventionPlan make_plan(std::string_view name, ModelFamily family, const StrategyConfig& params = {});
InterventionPlan make_plan(std::string_view name, ModelFamily family, const LayerGroups& groups,
                           const StrategyConfig& params = {});

/// Config for `layer`; kind none past the last layer.
StrategyConfig plan_lookup(const InterventionPlan& plan, std::size_t layer);
bool requires_mask(const InterventionPlan& plan);

nlohmann::json to_json(const InterventionPlan& plan);
InterventionPlan plan_from_json(const nlohmann::json& j);
InterventionPlan load_plan(const std::string& name_or_path, ModelFamily family);

struct InterventionStats {
    std::size_t layers_modified = 0;
    std::size_t balance_passed_through = 0;
};

/// Transforms layer l by plan_lookup(plan, l). Decode rows are queries at or
/// after `decode_start`; the plan's phase picks decode rows, prefill rows or both.
/// `object_keys` holds absolute key indices; MissingMask when the plan needs it and it is absent.
std::vector<AttentionTensor> apply_intervention(std::span<const AttentionTensor> layers,
                                                const InterventionPlan& plan, VisualSpan v,
                                                const std::vector<std::size_t>* object_keys,
                                                std::size_t decode_start = 0,
                                                Exec exec = Exec::parallel,
                                                InterventionStats* stats = nullptr);

}  // namespace countlab
