// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "countlab/attention.hpp"
#include "countlab/capture.hpp"
#include "countlab/exec.hpp"
#include "countlab/image.hpp"

namespace countlab {

/// Dense square float64 matrix, row-major.
class Matrix {
  public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), v_(n * n, fill) {}
    static Matrix identity(std::size_t n);

    std::size_t size() const { return n_; }
    double& at(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {&v_[i * n_], n_}; }
    std::span<double> data() { return v_; }
    std::span<const double> data() const { return v_; }

    double max_row_sum_error() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t n_ = 0;
    std::vector<double> v_;
};

Matrix multiply(const Matrix& a, const Matrix& b, Exec exec = Exec::parallel);

/// Head mean of A * max(G, 0). A and G are H x S x S; ShapeMismatch otherwise.
Matrix gradient_weighted_map(const AttentionTensor& attention, const AttentionTensor& gradient,
                             Exec exec = Exec::parallel);

/// Row-normalized (H + I).
Matrix transition_matrix(const Matrix& h, Exec exec = Exec::parallel);

/// Product of the last `depth` transitions in layer order. BadDepth unless 1 <= depth <= size.
Matrix compose(std::span<const Matrix> transitions, std::size_t depth, Exec exec = Exec::parallel);

/// Row t of C, or the renormalized mean of the rows for several tokens.
std::vector<double> token_relevance(const Matrix& c, std::span<const std::size_t> tokens);

struct LocalizationScore {
    double iou_object = 0.0;
    double iou_background = 0.0;
    double threshold = 0.5;
    bool empty_relevance = false;  // max relevance was zero
};

/// Binarizes patch relevance at threshold * max (inclusive), fills each patch's
/// pixels, and compares with the mask and its complement.
/// DimensionMismatch when sizes disagree with the grid.
LocalizationScore attention_iou(std::span<const double> visual_relevance, const PatchGrid& grid,
                                const BinaryMask& object_mask, double threshold = 0.5);

/// Image blended with a blue-to-red colormap of relevance scaled to its max.
Bitmap relevance_overlay(const Bitmap& image, std::span<const double> visual_relevance,
                         const PatchGrid& grid, double opacity = 0.5);

struct RelevanceResult {
    CaptureSidecar sidecar;
    std::size_t depth = 0;
    Matrix joint;                          // C
    std::vector<double> relevance;         // over every position
    std::vector<double> visual_relevance;  // restricted to the visual span
};

/// Loads the sidecar's captures, composes the last `depth` layers (clipped to
/// the captured count) and reads relevance for the selected positions.
RelevanceResult relevance_from_capture(const std::filesystem::path& sidecar_path, std::size_t depth,
                                       Exec exec = Exec::parallel);

}  // namespace countlab
