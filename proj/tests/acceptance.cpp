// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "countlab/attention.hpp"
#include "countlab/dataset.hpp"
#include "countlab/gqa.hpp"
#include "countlab/harness.hpp"
#include "countlab/metrics.hpp"
#include "countlab/plans.hpp"
#include "countlab/relevance.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace countlab;
namespace fs = std::filesystem;

namespace {

// Pixel-level fingerprint of the default dataset (manifests plus raw RGB).
constexpr std::uint64_t kDefaultFingerprint = 0xb525458e39046487ULL;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first few failure messages of a criterion.
struct Check {
    Outcome out;
    std::size_t failures = 0;

    void operator()(bool ok, const std::string& what) {
        if (ok) return;
        out.pass = false;
        if (++failures <= 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
    }
};

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

AttentionTensor random_attention(std::mt19937_64& gen, std::size_t h, std::size_t q, std::size_t k) {
    std::uniform_real_distribution<double> u(1e-4, 1.0);
    std::vector<double> w(h * q * k);
    for (auto& x : w) x = u(gen);
    return AttentionTensor(h, q, k, std::move(w));  // row-positive, not yet normalized
}

Outcome dataset_determinism() {
    Check check;
    const DatasetConfig config;
    test_util::TempDir a("accept_a"), b("accept_b");
    generate_dataset(config, a.path, Exec::parallel);
    generate_dataset(config, b.path, Exec::serial);
    const auto da = test_util::tree_digest(a.path), db = test_util::tree_digest(b.path);
    check(da == db, "trees differ");
    const auto fp = dataset_fingerprint(config);
    check(fp == kDefaultFingerprint, "fingerprint " + std::to_string(fp));
    const auto index = load_index(a.path);
    check(index.images.size() == 1950, "image count " + std::to_string(index.images.size()));
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::to_string(index.images.size()) +
                        " images, trees identical, fingerprint pinned";
    return check.out;
}

Outcome bucket_balance() {
    Check check;
    const DatasetConfig config;
    std::map<CountBucket, int> hist;
    std::size_t scenes = 0;
    for (const auto& item : plan_dataset(config)) {
        if (item.spec.variation != VariationTag::baseline) continue;
        ++hist[bucketize(item.true_count)];
        ++scenes;
        // every pixel owned by at most one object
        BinaryMask seen(item.spec.width, item.spec.height);
        for (const auto& o : item.spec.objects) {
            const ShapeGeometry g(o);
            const auto& bb = g.bounds();
            for (int y = bb.y0; y < bb.y1; ++y) {
                for (int x = bb.x0; x < bb.x1; ++x) {
                    if (!g.contains(x, y)) continue;
                    check(!seen.get(x, y), item.image_id + " overlap at " + std::to_string(x) + "," + std::to_string(y));
                    seen.set(x, y);
                }
            }
        }
    }
    check(hist.size() == kBucketCount, "missing bucket");
    for (const auto& [b, n] : hist) check(n == 10, std::string(to_string(b)) + " has " + std::to_string(n));
    if (check.out.pass) check.out.detail = std::to_string(scenes) + " scenes, 10 per bucket, no shared pixels";
    return check.out;
}

Outcome variation_isolation() {
    Check check;
    const auto items = plan_dataset(DatasetConfig{});
    std::map<std::size_t, const DatasetItem*> base;
    for (const auto& it : items)
        if (it.spec.variation == VariationTag::baseline) base[it.base_index] = &it;
    std::size_t compared = 0;
    for (const auto& it : items) {
        if (it.spec.variation == VariationTag::baseline) continue;
        const auto& b = base.at(it.base_index)->spec;
        check(it.spec.objects.size() == b.objects.size(), it.image_id + " object count");
        for (std::size_t i = 0; i < std::min(b.objects.size(), it.spec.objects.size()); ++i) {
            check(it.spec.objects[i].center == b.objects[i].center, it.image_id + " center");
            check(it.spec.objects[i].size == b.objects[i].size, it.image_id + " size");
        }
        ++compared;
    }
    if (check.out.pass) check.out.detail = std::to_string(compared) + " variation images";
    return check.out;
}

Outcome mrce_oracle() {
    Check check;
    std::mt19937_64 gen(20251);
    std::uniform_int_distribution<long long> truth(0, 50), pred(0, 100), kind(0, 9);
    std::vector<PredictionRecord> records;
    std::vector<oracle::Pair> pairs;
    std::size_t zeros = 0, unparsable = 0;
    for (int i = 0; i < 1000; ++i) {
        PredictionRecord r;
        r.image_id = "r" + std::to_string(i);
        r.true_count = kind(gen) == 0 ? 0 : truth(gen);
        const bool parse = kind(gen) != 0;
        r.raw_text = parse ? "{" + std::to_string(pred(gen)) + "}" : "no idea";
        r.parsed_count = parse_count(r.raw_text);
        zeros += r.true_count == 0;
        unparsable += !r.parsed_count;
        records.push_back(r);
        pairs.push_back({r.parsed_count, r.true_count});
    }
    const auto got = mrce(records);
    const auto want = oracle::mrce(pairs);
    check(got.has_value() && want.has_value(), "undefined");
    const double delta = std::abs(*got - *want);
    check(delta < 1e-12, "delta " + fmt(delta));
    check(zeros > 0 && unparsable > 0, "edge cases not exercised");
    const auto s = score(records);
    check(s.unparsable == unparsable, "unparsable tally");
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::string("|delta| = ") + fmt(delta) + ", " +
                        std::to_string(zeros) + " zero-count, " + std::to_string(unparsable) + " unparsable";
    return check.out;
}

Outcome attention_operators() {
    Check check;
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<std::size_t> dim(2, 12);
    std::uniform_real_distribution<double> f(0.05, 8.0);
    double worst_sum = 0.0, worst_ratio = 0.0, worst_mask = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t h = dim(gen) / 3 + 1, q = dim(gen), k = dim(gen) + 2;
        const auto a = random_attention(gen, h, q, k);
        std::uniform_int_distribution<std::size_t> pos(0, k - 2);
        std::size_t s0 = pos(gen), s1 = pos(gen);
        if (s0 > s1) std::swap(s0, s1);
        const VisualSpan v{s0, s1};
        const double factor = f(gen);
        std::vector<std::size_t> all, some;
        for (std::size_t c = s0; c <= s1; ++c) {
            all.push_back(c);
            if (gen() % 2) some.push_back(c);
        }
        const auto norm = renormalize(a);
        const auto sc = scale_visual(norm, v, factor);
        const auto outs = {norm,
                           sc,
                           focus_visual(norm, v, 1e-10),
                           balance_visual(norm, v, 0.4, BalanceMode::paper_literal).attention,
                           balance_visual(norm, v, 0.4, BalanceMode::exact).attention,
                           mask_amplify(norm, v, some, 2.0, 0.5)};
        for (const auto& o : outs) worst_sum = std::max(worst_sum, o.max_row_sum_error());

        const std::size_t text = s1 + 1;  // a non-visual key
        for (std::size_t hh = 0; hh < h; ++hh) {
            for (std::size_t qq = 0; qq < q; ++qq) {
                const double before = norm.at(hh, qq, s0) / norm.at(hh, qq, text);
                const double after = sc.at(hh, qq, s0) / sc.at(hh, qq, text);
                worst_ratio = std::max(worst_ratio, std::abs(after - factor * before) / std::max(1.0, factor * before));
            }
        }
        const auto m = mask_amplify(norm, v, all, factor, factor);
        for (std::size_t i = 0; i < m.data().size(); ++i)
            worst_mask = std::max(worst_mask, std::abs(m.data()[i] - sc.data()[i]));
    }
    check(worst_sum <= 1e-6, "row sum error " + fmt(worst_sum));
    check(worst_ratio <= 1e-9, "ratio law error " + fmt(worst_ratio));
    check(worst_mask <= 1e-12, "mask vs scale " + fmt(worst_mask));
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::string("row sum ") + fmt(worst_sum) +
                        ", ratio law " + fmt(worst_ratio) + ", mask/scale " + fmt(worst_mask);
    return check.out;
}

Outcome balance_modes() {
    Check check;
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> rc(0.01, 0.99), rt(0.05, 0.95), u(0.05, 1.0);
    double worst_exact = 0.0, worst_literal = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const double r = rc(gen), target = rt(gen);
        // 3 visual keys carrying mass r, 4 text keys carrying 1 - r
        std::vector<double> w(7);
        double vs = 0.0, ts = 0.0;
        for (std::size_t k = 0; k < 7; ++k) (k < 3 ? vs : ts) += w[k] = u(gen);
        for (std::size_t k = 0; k < 7; ++k) w[k] *= k < 3 ? r / vs : (1 - r) / ts;
        const AttentionTensor a(1, 1, 7, w);
        const VisualSpan v{0, 2};
        auto mass = [&](const AttentionTensor& x) { return x.at(0, 0, 0) + x.at(0, 0, 1) + x.at(0, 0, 2); };
        const double rcur = mass(a);
        worst_exact = std::max(worst_exact, std::abs(mass(balance_visual(a, v, target, BalanceMode::exact).attention) - target));
        const double closed = target / (target + 1.0 - rcur);
        worst_literal = std::max(
            worst_literal, std::abs(mass(balance_visual(a, v, target, BalanceMode::paper_literal).attention) - closed));
    }
    check(worst_exact <= 1e-6, "exact error " + fmt(worst_exact));
    check(worst_literal <= 1e-9, "literal error " + fmt(worst_literal));
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::string("exact ") + fmt(worst_exact) +
                        ", paper_literal " + fmt(worst_literal);
    return check.out;
}

Outcome overlap_ratio_criterion() {
    Check check;
    std::mt19937_64 gen(13);
    const int patches[] = {8, 14, 16, 32};
    for (int t = 0; t < 100; ++t) {
        const int p = patches[t % 4];
        const int w = p * static_cast<int>(1 + gen() % 12), h = p * static_cast<int>(1 + gen() % 12);
        BinaryMask m(w, h);
        std::bernoulli_distribution on(static_cast<double>(t) / 100.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (on(gen)) m.set(x, y);
        const auto o = overlap_ratio(m, PatchGrid{p, w, h});
        long double total = 0.0L;
        for (double r : o.ratio) total += static_cast<long double>(r) * p * p;
        check(std::llround(static_cast<double>(total)) == static_cast<long long>(m.popcount()) &&
                  std::abs(static_cast<double>(total) - static_cast<double>(m.popcount())) < 1e-9,
              "mask " + std::to_string(t) + " sum " + fmt(static_cast<double>(total)));
        std::uint64_t covered = 0;
        for (auto c : o.covered) covered += c;
        check(covered == m.popcount(), "covered pixels differ for mask " + std::to_string(t));
    }
    const std::vector<double> edge{0.1, 0.100001};
    check(object_token_set(edge, 0.1) == std::vector<std::size_t>{1}, "tau boundary");
    // exactly 10% of a 10 x 10 patch from pixels
    BinaryMask tenth(10, 10);
    for (int x = 0; x < 10; ++x) tenth.set(x, 0);
    const auto r = overlap_ratio(tenth, PatchGrid{10, 10, 10}).ratio;
    check(object_token_set(r, 0.1).empty(), "10% patch included");
    if (check.out.pass) check.out.detail = "100 masks conserve popcount; rho = 0.1 excluded, 0.100001 included";
    return check.out;
}

Outcome gqa_expansion() {
    Check check;
    std::mt19937_64 gen(17);
    std::normal_distribution<float> n;
    struct Geo { std::size_t b, kv, g, l, d; };
    const Geo geos[] = {{1, 8, 4, 6, 16}, {2, 2, 2, 3, 4}, {3, 4, 1, 5, 7}, {1, 1, 7, 9, 3}};
    for (const auto& geo : geos) {
        Tensor4 in(geo.b, geo.kv, geo.l, geo.d);
        for (auto& x : in.data) x = n(gen);
        for (auto exec : {Exec::serial, Exec::parallel}) {
            const auto out = expand_kv_heads(in, geo.g, exec);
            check(out.heads == geo.kv * geo.g, "head count");
            for (std::size_t b = 0; b < geo.b; ++b)
                for (std::size_t h = 0; h < out.heads; ++h)
                    for (std::size_t l = 0; l < geo.l; ++l)
                        for (std::size_t d = 0; d < geo.d; ++d)
                            check(out.at(b, h, l, d) == in.at(b, h / geo.g, l, d), "element mismatch");
        }
    }
    check(expand_kv_heads(Tensor4(1, 8, 1, 1), 4).heads == 32, "8 x 4 != 32");
    if (check.out.pass) check.out.detail = "4 geometries incl. 8 kv heads x 4 = 32";
    return check.out;
}

Outcome lpv() {
    Check check;
    std::mt19937_64 gen(19);
    std::normal_distribution<double> nd;
    double worst = 0.0, worst_compose = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t s = 3 + t % 6;
        auto a = renormalize(random_attention(gen, 2, s, s));
        AttentionTensor g(2, s, s);
        for (auto& x : g.data()) x = nd(gen);
        const auto m = transition_matrix(gradient_weighted_map(a, g));
        worst = std::max(worst, m.max_row_sum_error());
        if (t % 10 == 0) {
            std::vector<Matrix> ms;
            for (int l = 0; l < 3; ++l) {
                Matrix x(s);
                const auto v = oracle::random_stochastic(s, gen);
                std::copy(v.begin(), v.end(), x.data().begin());
                ms.push_back(x);
            }
            const auto c = compose(ms, 2);
            worst = std::max(worst, c.max_row_sum_error());
            const auto want = oracle::matmul({ms[1].data().begin(), ms[1].data().end()},
                                             {ms[2].data().begin(), ms[2].data().end()}, s);
            for (std::size_t i = 0; i < s * s; ++i) worst_compose = std::max(worst_compose, std::abs(c.data()[i] - want[i]));
        }
    }
    check(worst <= 1e-6, "row sum " + fmt(worst));
    check(worst_compose <= 1e-10, "compose " + fmt(worst_compose));

    // zero gradients at every layer
    std::vector<Matrix> ms;
    for (int l = 0; l < 4; ++l)
        ms.push_back(transition_matrix(gradient_weighted_map(renormalize(random_attention(gen, 2, 6, 6)), AttentionTensor(2, 6, 6))));
    check(compose(ms, 4) == Matrix::identity(6), "zero gradient C != I");

    // negative gradients clamp to zero
    const auto clamp = gradient_weighted_map(renormalize(random_attention(gen, 2, 5, 5)), AttentionTensor(2, 5, 5, -0.5));
    check(std::all_of(clamp.data().begin(), clamp.data().end(), [](double x) { return x == 0.0; }), "ReLU clamp");
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::string("row sum ") + fmt(worst) +
                        ", compose " + fmt(worst_compose);
    return check.out;
}

Outcome iou_readout() {
    Check check;
    std::mt19937_64 gen(23);
    const PatchGrid grid{32, 512, 512};
    for (int t = 0; t < 20; ++t) {
        BinaryMask mask(512, 512);
        std::vector<double> rel(grid.tokens(), 0.0);
        for (std::size_t i = 0; i < rel.size(); ++i) {
            if (gen() % 4 != 0) continue;
            rel[i] = 1.0;
            const int r = static_cast<int>(i) / grid.cols(), c = static_cast<int>(i) % grid.cols();
            for (int y = r * 32; y < r * 32 + 32; ++y)
                for (int x = c * 32; x < c * 32 + 32; ++x) mask.set(x, y);
        }
        const double total = std::accumulate(rel.begin(), rel.end(), 0.0);
        if (total == 0.0) continue;
        for (auto& x : rel) x /= total;
        check(attention_iou(rel, grid, mask).iou_object == 1.0, "aligned indicator");
        const auto z = attention_iou(std::vector<double>(grid.tokens(), 0.0), grid, mask);
        check(z.iou_object == 0.0 && z.iou_background == 0.0, "zero relevance");
    }
    if (check.out.pass) check.out.detail = "indicator -> 1.0, zero -> (0, 0)";
    return check.out;
}

Outcome end_to_end() {
    Check check;
    test_util::TempDir dir("accept_e2e");
    DatasetConfig dc;
    dc.axes.clear();
    generate_dataset(dc, dir.path / "data");
    ExperimentConfig cfg;
    cfg.dataset_root = dir.path / "data";
    cfg.rungs = {1, 2, 3};

    cfg.backend = "mock:oracle";
    cfg.output = dir.path / "oracle.jsonl";
    run_experiment(cfg);
    const auto oracle_recs = read_records(cfg.output);
    const auto so = score(oracle_recs);
    check(oracle_recs.size() == 150, "oracle records " + std::to_string(oracle_recs.size()));
    check(so.n > 0 && so.correct == so.n, "oracle accuracy");
    check(so.mrce && *so.mrce == 0.0, "oracle MRCE");

    cfg.backend = "mock:biased:0.8";
    cfg.output = dir.path / "biased.jsonl";
    run_experiment(cfg);
    const auto biased = read_records(cfg.output);
    std::vector<long long> counts;
    for (const auto& r : biased) counts.push_back(r.true_count);
    const double bound = oracle::biased_mrce(counts, 0.8);
    const auto got = mrce(biased);
    check(got && std::abs(*got - bound) < 1e-12, "biased MRCE " + (got ? fmt(*got) : "undefined"));
    check(bound >= 0.16 && bound <= 0.24, "oracle bound " + fmt(bound));

    auto part = cfg;
    part.output = dir.path / "resumed.jsonl";
    run_experiment(part, RunOptions{.stop_after = 61});
    const auto second = run_experiment(part, RunOptions{.resume = true});
    check(second.skipped == 61, "resume skipped " + std::to_string(second.skipped));
    check(test_util::slurp(part.output) == test_util::slurp(cfg.output), "resumed JSONL differs");
    check.out.detail += (check.out.detail.empty() ? "" : "; ") + std::string("oracle acc ") +
                        fmt(so.n ? static_cast<double>(so.correct) / static_cast<double>(so.n) : 0.0) +
                        ", biased MRCE " + (got ? fmt(*got) : "n/a") + " (oracle " + fmt(bound) + ")";
    return check.out;
}

Outcome strategy_plans() {
    Check check;
    const struct { ModelFamily family; LayerGroups groups; } geos[] = {
        {ModelFamily::qwen25, {8, 24, 32}}, {ModelFamily::kimi, {9, 18, 27}}};
    std::size_t built = 0;
    for (const auto& geo : geos) {
        const auto& g = layer_groups(geo.family);
        check(g == geo.groups, std::string(to_string(geo.family)) + " groups");
        std::map<LayerGroup, std::size_t> sizes;
        for (std::size_t l = 0; l < g.layers; ++l) ++sizes[g.group_of(l)];
        check(sizes[LayerGroup::early] == g.early_end && sizes[LayerGroup::middle] == g.middle_end - g.early_end &&
                  sizes[LayerGroup::late] == g.layers - g.middle_end,
              "groups overlap or leave gaps");
        for (const auto& name : strategy_names()) {
            const auto p = make_plan(name, geo.family);
            check(p.layers.size() == g.layers, name + " layer count");
            for (std::size_t l = 0; l < g.layers; ++l) {
                try {
                    plan_lookup(p, l).validate();
                } catch (const std::exception& e) {
                    check(false, name + " layer " + std::to_string(l) + ": " + e.what());
                }
            }
            ++built;
        }
    }
    check(built == 38, "plans built " + std::to_string(built));
    if (check.out.pass) check.out.detail = "19 strategies x {32-layer, 27-layer}";
    return check.out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"dataset determinism", dataset_determinism},
        {"bucket balance", bucket_balance},
        {"variation isolation", variation_isolation},
        {"MRCE oracle", mrce_oracle},
        {"attention operators", attention_operators},
        {"balance modes", balance_modes},
        {"overlap ratio", overlap_ratio_criterion},
        {"GQA expansion", gqa_expansion},
        {"LPV", lpv},
        {"IoU readout", iou_readout},
        {"end-to-end", end_to_end},
        {"strategy plans", strategy_plans},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
