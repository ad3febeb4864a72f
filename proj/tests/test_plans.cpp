// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <random>

#include "countlab/errors.hpp"
#include "countlab/plans.hpp"
#include "test_util.hpp"

using namespace countlab;

namespace {

std::vector<AttentionTensor> random_layers(std::mt19937_64& gen, std::size_t n, std::size_t q, std::size_t k) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<AttentionTensor> out;
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<double> w(2 * q * k);
        for (auto& x : w) x = u(gen);
        out.push_back(renormalize(AttentionTensor(2, q, k, std::move(w))));
    }
    return out;
}

}  // namespace

TEST_SUITE("plans") {

TEST_CASE("family layer groups") {
    CHECK(layer_groups(ModelFamily::qwen25) == LayerGroups{8, 24, 32});
    CHECK(layer_groups(ModelFamily::qwen3) == LayerGroups{8, 24, 32});
    CHECK(layer_groups(ModelFamily::kimi) == LayerGroups{9, 18, 27});
    CHECK(layer_groups(ModelFamily::mock) == LayerGroups{1, 4, 6});
    const auto g = layer_groups(ModelFamily::qwen25);
    CHECK(g.group_of(7) == LayerGroup::early);
    CHECK(g.group_of(8) == LayerGroup::middle);
    CHECK(g.group_of(23) == LayerGroup::middle);
    CHECK(g.group_of(24) == LayerGroup::late);
    CHECK_THROWS(LayerGroups{5, 5, 10}.validate());
}

TEST_CASE("plan_lookup examples") {
    const auto grow = make_plan("progressive_visual_grow", ModelFamily::qwen25);
    CHECK(plan_lookup(grow, 3).kind == StrategyKind::suppress);
    CHECK(plan_lookup(grow, 10).kind == StrategyKind::balance);
    CHECK(plan_lookup(grow, 30).kind == StrategyKind::amplify);
    const auto alt = make_plan("alternating_amp_sup", ModelFamily::qwen25);
    CHECK(plan_lookup(alt, 4).kind == StrategyKind::amplify);
    CHECK(plan_lookup(alt, 5).kind == StrategyKind::suppress);
    const auto base = make_plan("baseline", ModelFamily::kimi);
    for (std::size_t l = 0; l < 40; ++l) CHECK(plan_lookup(base, l).kind == StrategyKind::none);
    CHECK_THROWS(make_plan("sideways", ModelFamily::qwen25));
}

TEST_CASE("every strategy covers every layer on both geometries") {
    CHECK(strategy_names().size() == 19);
    CHECK(strategy_names().front() == "baseline");
    for (auto fam : {ModelFamily::qwen25, ModelFamily::kimi}) {
        const auto g = layer_groups(fam);
        for (const auto& name : strategy_names()) {
            const auto p = make_plan(name, fam);
            CHECK(p.layers.size() == g.layers);
            CHECK(requires_mask(p) == (name.find("mask") != std::string::npos));
            if (name.ends_with("_amplify_visual_mask")) {
                for (const auto& c : p.layers)
                    if (c.kind == StrategyKind::mask_amplify) CHECK(c.alpha_bg == 1.0);
            }
        }
    }
}

TEST_CASE("extreme strategies cover three eighths of the layers") {
    const auto e = make_plan("extreme_visual_early", ModelFamily::qwen25);
    CHECK(plan_lookup(e, 11).kind == StrategyKind::focus);
    CHECK(plan_lookup(e, 12).kind == StrategyKind::balance);
    const auto t = make_plan("extreme_text_late", ModelFamily::qwen25);
    CHECK(plan_lookup(t, 19).kind == StrategyKind::balance);
    CHECK(plan_lookup(t, 20).kind == StrategyKind::suppress);
}

TEST_CASE("early mask on the 27-layer geometry touches layers 0-8 only") {
    std::mt19937_64 gen(8);
    const auto layers = random_layers(gen, 27, 3, 8);
    const auto plan = make_plan("early_amplify_visual_mask", ModelFamily::kimi);
    const std::vector<std::size_t> obj{2, 3};
    InterventionStats stats;
    const auto out = apply_intervention(layers, plan, VisualSpan{1, 5}, &obj, 0, Exec::parallel, &stats);
    CHECK(stats.layers_modified == 9);
    for (std::size_t l = 0; l < 27; ++l) {
        CHECK((out[l] == layers[l]) == (l >= 9));
        CHECK(out[l].max_row_sum_error() < 1e-6);
    }
    CHECK_THROWS_AS(apply_intervention(layers, plan, VisualSpan{1, 5}, nullptr), MissingMask);
}

TEST_CASE("uniform_amplify equals scale_visual layer by layer") {
    std::mt19937_64 gen(2);
    const auto layers = random_layers(gen, 2, 4, 6);
    const auto plan = make_plan("uniform_amplify", ModelFamily::mock, LayerGroups{1, 2, 2 + 1});
    const VisualSpan v{0, 2};
    const auto out = apply_intervention(layers, plan, v, nullptr, 0);
    for (std::size_t l = 0; l < 2; ++l) CHECK(out[l] == scale_visual(layers[l], v, 2.0));
    const auto base = apply_intervention(layers, make_plan("baseline", ModelFamily::mock), v, nullptr);
    for (std::size_t l = 0; l < 2; ++l) CHECK(base[l] == layers[l]);
}

TEST_CASE("phase selects decode or prefill rows") {
    std::mt19937_64 gen(4);
    const auto layers = random_layers(gen, 1, 4, 6);
    auto plan = make_plan("uniform_amplify", ModelFamily::mock);
    const VisualSpan v{0, 2};
    const auto dec = apply_intervention(layers, plan, v, nullptr, 2)[0];
    plan.phase = Phase::prefill;
    const auto pre = apply_intervention(layers, plan, v, nullptr, 2)[0];
    plan.phase = Phase::both;
    const auto both = apply_intervention(layers, plan, v, nullptr, 2)[0];
    const auto full = scale_visual(layers[0], v, 2.0);
    for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t q = 0; q < 4; ++q) {
            for (std::size_t k = 0; k < 6; ++k) {
                CHECK(dec.at(h, q, k) == (q >= 2 ? full : layers[0]).at(h, q, k));
                CHECK(pre.at(h, q, k) == (q < 2 ? full : layers[0]).at(h, q, k));
                CHECK(both.at(h, q, k) == full.at(h, q, k));
            }
        }
    }
}

TEST_CASE("plan JSON round-trip with overrides") {
    auto j = to_json(make_plan("late_visual_retention", ModelFamily::qwen25));
    j["overrides"] = {{"3", {{"kind", "focus"}, {"epsilon", 1e-8}}}};
    j["phase"] = "both";
    const auto p = plan_from_json(j);
    CHECK(plan_lookup(p, 3).kind == StrategyKind::focus);
    CHECK(plan_lookup(p, 3).epsilon == 1e-8);
    CHECK(plan_lookup(p, 2).kind == StrategyKind::balance);
    CHECK(p.phase == Phase::both);
    const auto again = plan_from_json(to_json(p));
    CHECK(to_json(again) == to_json(p));

    test_util::TempDir dir("plan");
    const auto path = dir.path / "plan.json";
    std::ofstream(path) << to_json(p).dump(2);
    CHECK(to_json(load_plan(path.string(), ModelFamily::mock)) == to_json(p));
    CHECK(load_plan("uniform_focus", ModelFamily::kimi).layers.size() == 27);

    auto bad = to_json(p);
    bad["groups"]["middle"] = {9, 24};
    CHECK_THROWS_AS(plan_from_json(bad), FormatError);
    auto far = to_json(p);
    far["overrides"] = {{"99", {{"kind", "focus"}}}};
    CHECK_THROWS_AS(plan_from_json(far), FormatError);
}

}  // TEST_SUITE
