// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "countlab/exec.hpp"
#include "countlab/image.hpp"

namespace countlab {

/// Attention weights of one layer, heads x queries x keys, row-major.
class AttentionTensor {
  public:
    AttentionTensor() = default;
    AttentionTensor(std::size_t heads, std::size_t queries, std::size_t keys, double fill = 0.0)
        : heads_(heads), queries_(queries), keys_(keys), w_(heads * queries * keys, fill) {}
    AttentionTensor(std::size_t heads, std::size_t queries, std::size_t keys,
                    std::vector<double> weights);

    std::size_t heads() const { return heads_; }
    std::size_t queries() const { return queries_; }
    std::size_t keys() const { return keys_; }
    std::size_t rows() const { return heads_ * queries_; }

    double& at(std::size_t h, std::size_t q, std::size_t k) { return w_[(h * queries_ + q) * keys_ + k]; }
    double at(std::size_t h, std::size_t q, std::size_t k) const { return w_[(h * queries_ + q) * keys_ + k]; }

    std::span<double> row(std::size_t h, std::size_t q) { return {&w_[(h * queries_ + q) * keys_], keys_}; }
    std::span<const double> row(std::size_t h, std::size_t q) const {
        return {&w_[(h * queries_ + q) * keys_], keys_};
    }

    std::span<double> data() { return w_; }
    std::span<const double> data() const { return w_; }

    /// Largest |row sum - 1| over all rows.
    double max_row_sum_error() const;
    /// Throws std::invalid_argument on a negative entry or a row sum off by more than `tol`.
    void validate(double tol = 1e-6) const;

    friend bool operator==(const AttentionTensor&, const AttentionTensor&) = default;

  private:
    std::size_t heads_ = 0;
    std::size_t queries_ = 0;
    std::size_t keys_ = 0;
    std::vector<double> w_;
};

/// Inclusive key range holding the visual tokens.
struct VisualSpan {
    std::size_t v_start = 0;
    std::size_t v_end = 0;

    std::size_t size() const { return v_end - v_start + 1; }
    bool contains(std::size_t k) const { return k >= v_start && k <= v_end; }
    /// Throws std::invalid_argument unless v_start <= v_end < keys.
    void validate(std::size_t keys) const;
};

/// Half-open range of query rows an operator touches.
struct QueryRange {
    std::size_t begin = 0;
    std::size_t end = static_cast<std::size_t>(-1);
};

enum class StrategyKind { none, amplify, suppress, focus, balance, mask_amplify };
enum class BalanceMode { paper_literal, exact };

std::string_view to_string(StrategyKind k);
std::optional<StrategyKind> strategy_kind_from_string(std::string_view s);
std::string_view to_string(BalanceMode m);
std::optional<BalanceMode> balance_mode_from_string(std::string_view s);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::none;
    double alpha = 2.0;
    double beta = 0.5;
    double epsilon = 1e-10;
    double target_ratio = 0.4;
    double alpha_obj = 2.0;
    double alpha_bg = 0.5;
    double tau = 0.1;
    BalanceMode balance_mode = BalanceMode::paper_literal;

    void validate() const;
    friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

nlohmann::json to_json(const StrategyConfig& c);
/// Missing fields keep their defaults from `base`.
StrategyConfig strategy_from_json(const nlohmann::json& j, const StrategyConfig& base = {});

/// Every row divided by its sum. Throws DegenerateRow on a zero row.
AttentionTensor renormalize(const AttentionTensor& a, Exec exec = Exec::parallel);

/// Columns in `v` multiplied by `factor`, then renormalized.
AttentionTensor scale_visual(const AttentionTensor& a, VisualSpan v, double factor,
                             QueryRange rows = {}, Exec exec = Exec::parallel);

/// Non-visual entries replaced by `epsilon`, then renormalized.
AttentionTensor focus_visual(const AttentionTensor& a, VisualSpan v, double epsilon,
                             QueryRange rows = {}, Exec exec = Exec::parallel);

struct BalanceResult {
    AttentionTensor attention;
    std::size_t passed_through = 0;  // rows with no visual mass, left unchanged
};

BalanceResult balance_visual(const AttentionTensor& a, VisualSpan v, double target_ratio,
                             BalanceMode mode, QueryRange rows = {}, Exec exec = Exec::parallel);

/// Object keys (absolute indices, subset of `v`) scaled by alpha_obj, the rest
/// of `v` by alpha_bg, then renormalized.
AttentionTensor mask_amplify(const AttentionTensor& a, VisualSpan v,
                             std::span<const std::size_t> object_keys, double alpha_obj,
                             double alpha_bg, QueryRange rows = {}, Exec exec = Exec::parallel);

/// Dispatches on cfg.kind. `object_keys` is required for mask_amplify
/// (MissingMask otherwise). `passed_through` receives the balance tally.
AttentionTensor apply_strategy(const AttentionTensor& a, VisualSpan v, const StrategyConfig& cfg,
                               const std::vector<std::size_t>* object_keys = nullptr,
                               QueryRange rows = {}, Exec exec = Exec::parallel,
                               std::size_t* passed_through = nullptr);

/// Square patches over an image; the last row/column may be partial.
struct PatchGrid {
    int patch = 14;
    int image_width = 0;
    int image_height = 0;

    int cols() const { return (image_width + patch - 1) / patch; }
    int rows() const { return (image_height + patch - 1) / patch; }
    std::size_t tokens() const { return static_cast<std::size_t>(cols()) * static_cast<std::size_t>(rows()); }
    /// Pixel count of the patch at (r, c).
    std::uint32_t area(int r, int c) const;
    bool divides() const { return image_width % patch == 0 && image_height % patch == 0; }
    void validate() const;

    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

struct OverlapRatios {
    std::vector<double> ratio;            // covered / area, row-major token order
    std::vector<std::uint32_t> covered;   // mask pixels inside each patch
    std::vector<std::uint32_t> area;      // pixels inside each patch
};

/// Fraction of each patch covered by the mask. Throws DimensionMismatch.
OverlapRatios overlap_ratio(const BinaryMask& mask, const PatchGrid& grid, Exec exec = Exec::parallel);

/// Token indices (relative to the visual span) with ratio strictly above tau.
std::vector<std::size_t> object_token_set(std::span<const double> ratio, double tau);

}  // namespace countlab
