// SPDX-License-Identifier: Apache-2.0
#include "countlab/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "countlab/errors.hpp"
#include "countlab/kernels.hpp"

namespace countlab {
using nlohmann::json;

namespace {

kernels::Rows rows_of(AttentionTensor& a, QueryRange range) {
    return {a.data().data(), a.heads(), a.queries(), a.keys(), range.begin, range.end};
}

void raise_degenerate(const AttentionTensor& a, std::size_t flat) {
    if (flat != kernels::kNoRow) {
        throw DegenerateRow(flat / a.queries(), flat % a.queries());
    }
}

std::size_t run_reweight(AttentionTensor& a, const std::vector<double>& factor, QueryRange r, Exec exec) {
    return exec == Exec::serial ? kernels::serial::reweight(rows_of(a, r), factor.data())
                                : kernels::parallel::reweight(rows_of(a, r), factor.data());
}

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument(std::string(what) + " must be positive and finite");
    }
}

}  // namespace

AttentionTensor::AttentionTensor(std::size_t heads, std::size_t queries, std::size_t keys,
                                 std::vector<double> weights)
    : heads_(heads), queries_(queries), keys_(keys), w_(std::move(weights)) {
    if (w_.size() != heads * queries * keys) {
        throw ShapeMismatch("attention weights: expected " + std::to_string(heads * queries * keys) +
                            " values, got " + std::to_string(w_.size()));
    }
}

double AttentionTensor::max_row_sum_error() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows(); ++r) {
        double sum = 0.0;
        for (std::size_t k = 0; k < keys_; ++k) sum += w_[r * keys_ + k];
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

void AttentionTensor::validate(double tol) const {
    if (std::any_of(w_.begin(), w_.end(), [](double x) { return !(x >= 0.0); })) {
        throw std::invalid_argument("attention weights must be non-negative");
    }
    if (max_row_sum_error() > tol) {
        throw std::invalid_argument("attention rows are not row-stochastic");
    }
}

void VisualSpan::validate(std::size_t keys) const {
    if (v_start > v_end || v_end >= keys) {
        throw std::invalid_argument("visual span [" + std::to_string(v_start) + ", " +
                                    std::to_string(v_end) + "] outside " + std::to_string(keys) +
                                    " keys");
    }
}

std::string_view to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::none: return "none";
        case StrategyKind::amplify: return "amplify";
        case StrategyKind::suppress: return "suppress";
        case StrategyKind::focus: return "focus";
        case StrategyKind::balance: return "balance";
        case StrategyKind::mask_amplify: return "mask_amplify";
    }
    return "none";
}

std::optional<StrategyKind> strategy_kind_from_string(std::string_view s) {
    for (auto k : {StrategyKind::none, StrategyKind::amplify, StrategyKind::suppress,
                   StrategyKind::focus, StrategyKind::balance, StrategyKind::mask_amplify}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::string_view to_string(BalanceMode m) {
    return m == BalanceMode::exact ? "exact" : "paper_literal";
}

std::optional<BalanceMode> balance_mode_from_string(std::string_view s) {
    if (s == "exact") return BalanceMode::exact;
    if (s == "paper_literal") return BalanceMode::paper_literal;
    return std::nullopt;
}

void StrategyConfig::validate() const {
    if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(target_ratio > 0.0 && target_ratio < 1.0)) {
        throw std::invalid_argument("target_ratio must lie in (0, 1)");
    }
    require_positive(alpha_obj, "alpha_obj");
    require_positive(alpha_bg, "alpha_bg");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
}

json to_json(const StrategyConfig& c) {
    return {{"kind", to_string(c.kind)},         {"alpha", c.alpha},
            {"beta", c.beta},                    {"epsilon", c.epsilon},
            {"target_ratio", c.target_ratio},    {"alpha_obj", c.alpha_obj},
            {"alpha_bg", c.alpha_bg},            {"tau", c.tau},
            {"balance_mode", to_string(c.balance_mode)}};
}

StrategyConfig strategy_from_json(const json& j, const StrategyConfig& base) {
    StrategyConfig c = base;
    if (j.contains("kind")) {
        const auto s = j["kind"].get<std::string>();
        const auto k = strategy_kind_from_string(s);
        if (!k) throw FormatError("unknown strategy kind: " + s);
        c.kind = *k;
    }
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.target_ratio = j.value("target_ratio", c.target_ratio);
    c.alpha_obj = j.value("alpha_obj", c.alpha_obj);
    c.alpha_bg = j.value("alpha_bg", c.alpha_bg);
    c.tau = j.value("tau", c.tau);
    if (j.contains("balance_mode")) {
        const auto s = j["balance_mode"].get<std::string>();
        const auto m = balance_mode_from_string(s);
        if (!m) throw FormatError("unknown balance mode: " + s);
        c.balance_mode = *m;
    }
    c.validate();
    return c;
}

AttentionTensor renormalize(const AttentionTensor& a, Exec exec) {
    AttentionTensor out = a;
    const QueryRange all{};
    const auto bad = exec == Exec::serial ? kernels::serial::renormalize(rows_of(out, all))
                                          : kernels::parallel::renormalize(rows_of(out, all));
    raise_degenerate(a, bad);
    return out;
}

AttentionTensor scale_visual(const AttentionTensor& a, VisualSpan v, double factor, QueryRange rows,
                             Exec exec) {
    v.validate(a.keys());
    require_positive(factor, "factor");
    std::vector<double> f(a.keys(), 1.0);
    std::fill(f.begin() + static_cast<std::ptrdiff_t>(v.v_start),
              f.begin() + static_cast<std::ptrdiff_t>(v.v_end + 1), factor);
    AttentionTensor out = a;
    raise_degenerate(a, run_reweight(out, f, rows, exec));
    return out;
}

AttentionTensor focus_visual(const AttentionTensor& a, VisualSpan v, double epsilon, QueryRange rows,
                             Exec exec) {
    v.validate(a.keys());
    require_positive(epsilon, "epsilon");
    AttentionTensor out = a;
    const auto bad = exec == Exec::serial
                         ? kernels::serial::focus(rows_of(out, rows), v.v_start, v.v_end, epsilon)
                         : kernels::parallel::focus(rows_of(out, rows), v.v_start, v.v_end, epsilon);
    raise_degenerate(a, bad);
    return out;
}

BalanceResult balance_visual(const AttentionTensor& a, VisualSpan v, double target_ratio,
                             BalanceMode mode, QueryRange rows, Exec exec) {
    v.validate(a.keys());
    if (!(target_ratio > 0.0 && target_ratio < 1.0)) {
        throw std::invalid_argument("target_ratio must lie in (0, 1)");
    }
    BalanceResult res{a, 0};
    const bool exact = mode == BalanceMode::exact;
    auto r = rows_of(res.attention, rows);
    res.passed_through = exec == Exec::serial
                             ? kernels::serial::balance(r, v.v_start, v.v_end, target_ratio, exact)
                             : kernels::parallel::balance(r, v.v_start, v.v_end, target_ratio, exact);
    return res;
}

AttentionTensor mask_amplify(const AttentionTensor& a, VisualSpan v,
                             std::span<const std::size_t> object_keys, double alpha_obj,
                             double alpha_bg, QueryRange rows, Exec exec) {
    v.validate(a.keys());
    require_positive(alpha_obj, "alpha_obj");
    require_positive(alpha_bg, "alpha_bg");
    std::vector<double> f(a.keys(), 1.0);
    std::fill(f.begin() + static_cast<std::ptrdiff_t>(v.v_start),
              f.begin() + static_cast<std::ptrdiff_t>(v.v_end + 1), alpha_bg);
    for (std::size_t k : object_keys) {
        if (!v.contains(k)) {
            throw std::invalid_argument("object key " + std::to_string(k) + " outside the visual span");
        }
        f[k] = alpha_obj;
    }
    AttentionTensor out = a;
    raise_degenerate(a, run_reweight(out, f, rows, exec));
    return out;
}

AttentionTensor apply_strategy(const AttentionTensor& a, VisualSpan v, const StrategyConfig& cfg,
                               const std::vector<std::size_t>* object_keys, QueryRange rows,
                               Exec exec, std::size_t* passed_through) {
    switch (cfg.kind) {
        case StrategyKind::none: return a;
        case StrategyKind::amplify: return scale_visual(a, v, cfg.alpha, rows, exec);
        case StrategyKind::suppress: return scale_visual(a, v, cfg.beta, rows, exec);
        case StrategyKind::focus: return focus_visual(a, v, cfg.epsilon, rows, exec);
        case StrategyKind::balance: {
            auto res = balance_visual(a, v, cfg.target_ratio, cfg.balance_mode, rows, exec);
            if (passed_through) *passed_through += res.passed_through;
            return std::move(res.attention);
        }
        case StrategyKind::mask_amplify:
            if (!object_keys) throw MissingMask("mask_amplify needs the object token set");
            return mask_amplify(a, v, *object_keys, cfg.alpha_obj, cfg.alpha_bg, rows, exec);
    }
    return a;
}

std::uint32_t PatchGrid::area(int r, int c) const {
    const int w = std::min(patch, image_width - c * patch);
    const int h = std::min(patch, image_height - r * patch);
    return static_cast<std::uint32_t>(w) * static_cast<std::uint32_t>(h);
}

void PatchGrid::validate() const {
    if (patch <= 0 || image_width <= 0 || image_height <= 0) {
        throw std::invalid_argument("patch grid needs positive patch size and image dimensions");
    }
}

OverlapRatios overlap_ratio(const BinaryMask& mask, const PatchGrid& grid, Exec exec) {
    grid.validate();
    if (mask.width() != grid.image_width || mask.height() != grid.image_height) {
        throw DimensionMismatch("mask is " + std::to_string(mask.width()) + "x" +
                                std::to_string(mask.height()) + ", grid expects " +
                                std::to_string(grid.image_width) + "x" +
                                std::to_string(grid.image_height));
    }
    OverlapRatios out;
    const std::size_t n = grid.tokens();
    out.covered.resize(n);
    out.area.resize(n);
    out.ratio.resize(n);
    if (exec == Exec::serial) {
        kernels::serial::overlap_counts(mask.bits().data(), mask.width(), mask.height(), grid.patch,
                                        out.covered.data());
    } else {
        kernels::parallel::overlap_counts(mask.bits().data(), mask.width(), mask.height(),
                                          grid.patch, out.covered.data());
    }
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * grid.cols() + c;
            out.area[i] = grid.area(r, c);
            out.ratio[i] = static_cast<double>(out.covered[i]) / static_cast<double>(out.area[i]);
        }
    }
    return out;
}

std::vector<std::size_t> object_token_set(std::span<const double> ratio, double tau) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        if (ratio[i] > tau) out.push_back(i);
    }
    return out;
}

}  // namespace countlab
