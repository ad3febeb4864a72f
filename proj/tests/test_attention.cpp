// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "countlab/attention.hpp"
#include "countlab/errors.hpp"
#include "countlab/image.hpp"
#include "oracles.hpp"

using namespace countlab;

namespace {

AttentionTensor one_row(std::vector<double> w) {
    const auto k = w.size();
    return AttentionTensor(1, 1, k, std::move(w));
}

AttentionTensor random_tensor(std::mt19937_64& gen, std::size_t h, std::size_t q, std::size_t k) {
    std::uniform_real_distribution<double> u(0.001, 1.0);
    std::vector<double> w(h * q * k);
    for (auto& x : w) x = u(gen);
    return renormalize(AttentionTensor(h, q, k, std::move(w)), Exec::serial);
}

double visual_mass(std::span<const double> row, VisualSpan v) {
    double s = 0.0;
    for (std::size_t k = v.v_start; k <= v.v_end; ++k) s += row[k];
    return s;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("renormalize examples") {
    const auto r = renormalize(one_row({0.6, 0.7}));
    CHECK(r.at(0, 0, 0) == doctest::Approx(6.0 / 13.0).epsilon(1e-15));
    CHECK(r.at(0, 0, 1) == doctest::Approx(7.0 / 13.0).epsilon(1e-15));
    const auto again = renormalize(r);
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(again.at(0, 0, k) - r.at(0, 0, k)) < 1e-12);
    CHECK_THROWS_AS(renormalize(one_row({0.0, 0.0})), DegenerateRow);
    CHECK_THROWS_AS(AttentionTensor(1, 2, 2, std::vector<double>{1.0}), ShapeMismatch);
}

TEST_CASE("scale_visual examples") {
    const VisualSpan v{0, 0};
    const auto up = scale_visual(one_row({0.3, 0.7}), v, 2.0);
    CHECK(up.at(0, 0, 0) == doctest::Approx(0.6 / 1.3).epsilon(1e-14));
    CHECK(up.at(0, 0, 1) == doctest::Approx(0.7 / 1.3).epsilon(1e-14));
    const auto down = scale_visual(one_row({0.3, 0.7}), v, 0.5);
    CHECK(down.at(0, 0, 0) == doctest::Approx(0.15 / 0.85).epsilon(1e-14));
    CHECK(down.at(0, 0, 1) == doctest::Approx(0.7 / 0.85).epsilon(1e-14));
    const auto same = scale_visual(one_row({0.3, 0.7}), v, 1.0);
    CHECK(std::abs(same.at(0, 0, 0) - 0.3) < 1e-15);
    CHECK_THROWS(scale_visual(one_row({0.3, 0.7}), v, 0.0));
    CHECK_THROWS(scale_visual(one_row({0.3, 0.7}), VisualSpan{1, 2}, 2.0));
}

TEST_CASE("focus_visual examples") {
    const auto f = focus_visual(one_row({0.3, 0.7}), VisualSpan{0, 0}, 1e-10);
    CHECK(f.at(0, 0, 0) == doctest::Approx(0.3 / (0.3 + 1e-10)).epsilon(1e-15));
    CHECK(f.at(0, 0, 1) == doctest::Approx(1e-10 / (0.3 + 1e-10)).epsilon(1e-9));
    const auto all = focus_visual(one_row({0.3, 0.7}), VisualSpan{0, 1}, 1e-10);
    CHECK(std::abs(all.at(0, 0, 0) - 0.3) < 1e-15);
    const auto zero = focus_visual(one_row({0.0, 0.0, 0.5, 0.5}), VisualSpan{0, 1}, 1e-10);
    CHECK(zero.max_row_sum_error() < 1e-12);
    CHECK(zero.at(0, 0, 2) == doctest::Approx(0.5));
}

TEST_CASE("balance_visual examples") {
    const VisualSpan v{0, 0};
    const auto lit = balance_visual(one_row({0.2, 0.8}), v, 0.4, BalanceMode::paper_literal);
    CHECK(lit.attention.at(0, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(lit.attention.at(0, 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    const auto ex = balance_visual(one_row({0.2, 0.8}), v, 0.4, BalanceMode::exact);
    CHECK(std::abs(ex.attention.at(0, 0, 0) - 0.4) < 1e-12);
    // gamma = 8/3 applied by hand
    CHECK(std::abs(ex.attention.at(0, 0, 0) - (0.2 * 8.0 / 3.0) / (0.2 * 8.0 / 3.0 + 0.8)) < 1e-14);
    for (auto mode : {BalanceMode::paper_literal, BalanceMode::exact}) {
        const auto fixed = balance_visual(one_row({0.4, 0.6}), v, 0.4, mode);
        CHECK(std::abs(fixed.attention.at(0, 0, 0) - 0.4) < 1e-15);
        const auto none = balance_visual(one_row({0.0, 1.0}), v, 0.4, mode);
        CHECK(none.passed_through == 1);
        CHECK(none.attention.at(0, 0, 1) == 1.0);
    }
}

TEST_CASE("balance modes on random rows") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> rc(0.01, 0.99), rt(0.05, 0.95);
    for (int t = 0; t < 500; ++t) {
        const double r = rc(gen), target = rt(gen);
        const auto row = one_row({r * 0.25, r * 0.75, (1 - r) * 0.5, (1 - r) * 0.5});
        const VisualSpan v{0, 1};
        const auto ex = balance_visual(row, v, target, BalanceMode::exact);
        CHECK(std::abs(visual_mass(ex.attention.row(0, 0), v) - target) < 1e-6);
        const auto lit = balance_visual(row, v, target, BalanceMode::paper_literal);
        const double closed = target / (target + 1.0 - r);
        CHECK(std::abs(visual_mass(lit.attention.row(0, 0), v) - closed) < 1e-9);
    }
}

TEST_CASE("mask_amplify examples") {
    const VisualSpan v{0, 1};
    const std::vector<std::size_t> obj{0};
    const auto m = mask_amplify(one_row({0.2, 0.3, 0.5}), v, obj, 2.0, 0.5);
    CHECK(m.at(0, 0, 0) == doctest::Approx(0.4 / 1.05).epsilon(1e-14));
    CHECK(m.at(0, 0, 1) == doctest::Approx(0.15 / 1.05).epsilon(1e-14));
    CHECK(m.at(0, 0, 2) == doctest::Approx(0.5 / 1.05).epsilon(1e-14));
    const auto id = mask_amplify(one_row({0.2, 0.3, 0.5}), v, obj, 1.0, 1.0);
    CHECK(std::abs(id.at(0, 0, 1) - 0.3) < 1e-15);
    const std::vector<std::size_t> outside{2};
    CHECK_THROWS(mask_amplify(one_row({0.2, 0.3, 0.5}), v, outside, 2.0, 0.5));
    StrategyConfig cfg;
    cfg.kind = StrategyKind::mask_amplify;
    CHECK_THROWS_AS(apply_strategy(one_row({0.2, 0.3, 0.5}), v, cfg), MissingMask);
}

TEST_CASE("random tensors: row-stochastic, ratio law and mask reduction") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> factor(0.1, 5.0);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_tensor(gen, 2, 3, 9);
        const VisualSpan v{2, 6};
        const double f = factor(gen);
        const auto s = scale_visual(a, v, f);
        const auto fo = focus_visual(a, v, 1e-10);
        const auto b = balance_visual(a, v, 0.4, BalanceMode::exact).attention;
        const auto bl = balance_visual(a, v, 0.4, BalanceMode::paper_literal).attention;
        const std::vector<std::size_t> all{2, 3, 4, 5, 6}, some{3, 5};
        const auto m = mask_amplify(a, v, all, f, f);
        const auto m2 = mask_amplify(a, v, some, 2.0, 0.5);
        for (const auto* out : {&s, &fo, &b, &bl, &m, &m2}) CHECK(out->max_row_sum_error() < 1e-6);
        for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(std::abs(m.data()[i] - s.data()[i]) < 1e-12);
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t q = 0; q < 3; ++q) {
                const double before = a.at(h, q, 3) / a.at(h, q, 0);
                const double after = s.at(h, q, 3) / s.at(h, q, 0);
                CHECK(std::abs(after - f * before) <= 1e-9 * std::max(1.0, f * before));
                // oracle row
                std::vector<double> row(a.row(h, q).begin(), a.row(h, q).end()), fac(9, 1.0);
                for (std::size_t k = 2; k <= 6; ++k) fac[k] = f;
                const auto want = oracle::scaled_row(row, fac);
                for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(s.at(h, q, k) - want[k]) < 1e-12);
            }
        }
    }
}

TEST_CASE("permuting non-visual columns commutes with every operator") {
    std::mt19937_64 gen(21);
    const VisualSpan v{1, 3};
    const std::vector<std::size_t> perm{5, 1, 2, 3, 0, 4};  // only text keys move
    for (int t = 0; t < 50; ++t) {
        const auto a = random_tensor(gen, 1, 2, 6);
        AttentionTensor p(1, 2, 6);
        for (std::size_t q = 0; q < 2; ++q)
            for (std::size_t k = 0; k < 6; ++k) p.at(0, q, k) = a.at(0, q, perm[k]);
        const std::vector<std::size_t> obj{2};
        for (auto kind : {StrategyKind::amplify, StrategyKind::suppress, StrategyKind::focus,
                          StrategyKind::balance, StrategyKind::mask_amplify}) {
            StrategyConfig cfg;
            cfg.kind = kind;
            const auto x = apply_strategy(a, v, cfg, &obj);
            const auto y = apply_strategy(p, v, cfg, &obj);
            for (std::size_t q = 0; q < 2; ++q)
                for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(y.at(0, q, k) - x.at(0, q, perm[k])) < 1e-12);
        }
    }
}

TEST_CASE("query range limits the rows touched") {
    std::mt19937_64 gen(5);
    const auto a = random_tensor(gen, 2, 4, 5);
    const auto s = scale_visual(a, VisualSpan{0, 1}, 2.0, QueryRange{2, 4});
    for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(s.at(h, 0, k) == a.at(h, 0, k));
            CHECK(s.at(h, 1, k) == a.at(h, 1, k));
        }
        CHECK(s.at(h, 3, 0) > a.at(h, 3, 0));
    }
}

TEST_CASE("strategy config validation and JSON") {
    StrategyConfig c;
    c.kind = StrategyKind::balance;
    c.balance_mode = BalanceMode::exact;
    CHECK(strategy_from_json(to_json(c)) == c);
    CHECK_NOTHROW(c.validate());
    StrategyConfig bad;
    bad.alpha = 1.0;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.beta = 1.0;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.tau = 1.5;
    CHECK_THROWS(bad.validate());
    CHECK(strategy_kind_from_string("focus") == StrategyKind::focus);
    CHECK_FALSE(strategy_kind_from_string("zoom").has_value());
}

TEST_CASE("overlap_ratio examples") {
    const PatchGrid g{14, 14, 14};
    BinaryMask half(14, 14);
    for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 7; ++x) half.set(x, y);
    CHECK(overlap_ratio(half, g).ratio == std::vector<double>{0.5});

    const PatchGrid g2{14, 28, 42};
    BinaryMask ones(28, 42), zeros(28, 42);
    for (int y = 0; y < 42; ++y)
        for (int x = 0; x < 28; ++x) ones.set(x, y);
    for (double r : overlap_ratio(ones, g2).ratio) CHECK(r == 1.0);
    for (double r : overlap_ratio(zeros, g2).ratio) CHECK(r == 0.0);
    CHECK_THROWS_AS(overlap_ratio(BinaryMask(10, 10), g2), DimensionMismatch);
}

TEST_CASE("overlap_ratio conserves mask pixels and orders tokens row-major") {
    std::mt19937_64 gen(77);
    const PatchGrid g{8, 64, 48};
    for (int t = 0; t < 20; ++t) {
        BinaryMask m(64, 48);
        std::bernoulli_distribution on(0.1 + 0.04 * t);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 64; ++x)
                if (on(gen)) m.set(x, y);
        const auto o = overlap_ratio(m, g);
        double s = 0.0;
        for (double r : o.ratio) s += r * 64.0;
        CHECK(s == static_cast<double>(m.popcount()));
        // per-patch brute force
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) {
                int n = 0;
                for (int y = r * 8; y < r * 8 + 8; ++y)
                    for (int x = c * 8; x < c * 8 + 8; ++x) n += m.get(x, y);
                CHECK(o.covered[static_cast<std::size_t>(r * g.cols() + c)] == static_cast<std::uint32_t>(n));
            }
        }
    }
}

TEST_CASE("partial patches use their true area") {
    const PatchGrid g{14, 20, 20};
    CHECK(g.tokens() == 4);
    CHECK(g.area(0, 0) == 196);
    CHECK(g.area(0, 1) == 84);
    CHECK(g.area(1, 1) == 36);
    BinaryMask m(20, 20);
    m.set(19, 19);
    CHECK(overlap_ratio(m, g).ratio[3] == doctest::Approx(1.0 / 36.0));
}

TEST_CASE("object_token_set uses strict inequality") {
    const std::vector<double> r{0.0, 0.1, 0.11};
    CHECK(object_token_set(r, 0.1) == std::vector<std::size_t>{2});
    const std::vector<double> edge{0.1, 0.100001};
    CHECK(object_token_set(edge, 0.1) == std::vector<std::size_t>{1});
    CHECK(object_token_set(r, 0.0) == std::vector<std::size_t>{1, 2});
    const std::vector<double> zeros(5, 0.0);
    CHECK(object_token_set(zeros, 0.1).empty());
}

}  // TEST_SUITE
