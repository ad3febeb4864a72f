// SPDX-License-Identifier: Apache-2.0
#include "countlab/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "countlab/errors.hpp"
#include "countlab/kernels.hpp"

namespace countlab {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

double Matrix::max_row_sum_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double sum = 0.0;
        for (double x : row(i)) sum += x;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

Matrix multiply(const Matrix& a, const Matrix& b, Exec exec) {
    if (a.size() != b.size()) {
        throw ShapeMismatch("cannot multiply " + std::to_string(a.size()) + "x" +
                            std::to_string(a.size()) + " by " + std::to_string(b.size()) + "x" +
                            std::to_string(b.size()));
    }
    Matrix c(a.size());
    if (exec == Exec::serial) {
        kernels::serial::matmul(a.data().data(), b.data().data(), c.data().data(), a.size());
    } else {
        kernels::parallel::matmul(a.data().data(), b.data().data(), c.data().data(), a.size());
    }
    return c;
}

Matrix gradient_weighted_map(const AttentionTensor& attention, const AttentionTensor& gradient,
                             Exec exec) {
    if (attention.heads() != gradient.heads() || attention.queries() != gradient.queries() ||
        attention.keys() != gradient.keys()) {
        throw ShapeMismatch("attention and gradient shapes differ");
    }
    if (attention.queries() != attention.keys() || attention.heads() == 0) {
        throw ShapeMismatch("relevance needs square H x S x S captures with H > 0");
    }
    Matrix out(attention.keys());
    const auto s = attention.keys();
    if (exec == Exec::serial) {
        kernels::serial::gradient_weighted_map(attention.data().data(), gradient.data().data(),
                                               attention.heads(), s, out.data().data());
    } else {
        kernels::parallel::gradient_weighted_map(attention.data().data(), gradient.data().data(),
                                                 attention.heads(), s, out.data().data());
    }
    return out;
}

Matrix transition_matrix(const Matrix& h, Exec exec) {
    if (std::any_of(h.data().begin(), h.data().end(), [](double x) { return !(x >= 0.0); })) {
        throw std::invalid_argument("gradient-weighted map must be non-negative");
    }
    Matrix m = h;
    if (exec == Exec::serial) {
        kernels::serial::transition(m.data().data(), m.size());
    } else {
        kernels::parallel::transition(m.data().data(), m.size());
    }
    return m;
}

Matrix compose(std::span<const Matrix> transitions, std::size_t depth, Exec exec) {
    if (depth < 1 || depth > transitions.size()) {
        throw BadDepth("compose depth " + std::to_string(depth) + " outside [1, " +
                       std::to_string(transitions.size()) + "]");
    }
    const std::size_t first = transitions.size() - depth;
    Matrix c = transitions[first];
    for (std::size_t l = first + 1; l < transitions.size(); ++l) {
        c = multiply(c, transitions[l], exec);
    }
    return c;
}

std::vector<double> token_relevance(const Matrix& c, std::span<const std::size_t> tokens) {
    if (tokens.empty()) {
        throw std::invalid_argument("token_relevance needs at least one token");
    }
    std::vector<double> out(c.size(), 0.0);
    for (std::size_t t : tokens) {
        if (t >= c.size()) {
            throw std::invalid_argument("token " + std::to_string(t) + " outside " +
                                        std::to_string(c.size()) + " positions");
        }
        const auto r = c.row(t);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
    }
    if (tokens.size() == 1) {
        return out;
    }
    double sum = 0.0;
    for (double& x : out) {
        x /= static_cast<double>(tokens.size());
        sum += x;
    }
    if (sum > 0.0) {
        for (double& x : out) x /= sum;
    }
    return out;
}

namespace {

void check_grid(std::span<const double> rel, const PatchGrid& grid) {
    grid.validate();
    if (rel.size() != grid.tokens()) {
        throw DimensionMismatch("relevance has " + std::to_string(rel.size()) + " entries, grid has " +
                                std::to_string(grid.tokens()) + " patches");
    }
}

double iou(std::size_t inter, std::size_t uni) {
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

LocalizationScore attention_iou(std::span<const double> rel, const PatchGrid& grid,
                                const BinaryMask& mask, double threshold) {
    check_grid(rel, grid);
    if (mask.width() != grid.image_width || mask.height() != grid.image_height) {
        throw DimensionMismatch("mask dimensions differ from the patch grid image");
    }
    LocalizationScore s;
    s.threshold = threshold;
    const double peak = rel.empty() ? 0.0 : *std::max_element(rel.begin(), rel.end());
    if (!(peak > 0.0)) {
        s.empty_relevance = true;
        return s;
    }
    std::vector<std::uint8_t> on(rel.size());
    for (std::size_t i = 0; i < rel.size(); ++i) on[i] = rel[i] >= threshold * peak;

    std::size_t obj_inter = 0, obj_union = 0, bg_inter = 0, bg_union = 0;
    const int cols = grid.cols();
    for (int y = 0; y < mask.height(); ++y) {
        const std::size_t row = static_cast<std::size_t>(y / grid.patch) * cols;
        for (int x = 0; x < mask.width(); ++x) {
            const bool b = on[row + x / grid.patch] != 0;
            const bool m = mask.get(x, y);
            obj_inter += b && m;
            obj_union += b || m;
            bg_inter += b && !m;
            bg_union += b || !m;
        }
    }
    s.iou_object = iou(obj_inter, obj_union);
    s.iou_background = iou(bg_inter, bg_union);
    return s;
}

Bitmap relevance_overlay(const Bitmap& image, std::span<const double> rel, const PatchGrid& grid,
                         double opacity) {
    check_grid(rel, grid);
    if (image.width() != grid.image_width || image.height() != grid.image_height) {
        throw DimensionMismatch("image dimensions differ from the patch grid image");
    }
    const double peak = rel.empty() ? 0.0 : *std::max_element(rel.begin(), rel.end());
    auto colormap = [](double v) {
        // blue -> cyan -> yellow -> red
        auto ch = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
        return Rgb{ch(2.0 * v - 0.5), ch(v < 0.5 ? 2.0 * v + 0.25 : 2.0 - 2.0 * v), ch(1.0 - 2.0 * v)};
    };
    Bitmap out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y / grid.patch) * grid.cols() + x / grid.patch;
            const double v = peak > 0.0 ? rel[i] / peak : 0.0;
            const Rgb heat = colormap(v);
            const Rgb base = image.at(x, y);
            auto mix = [opacity](std::uint8_t a, std::uint8_t b) {
                return static_cast<std::uint8_t>(std::lround((1.0 - opacity) * a + opacity * b));
            };
            out.set(x, y, {mix(base.r, heat.r), mix(base.g, heat.g), mix(base.b, heat.b)});
        }
    }
    return out;
}

RelevanceResult relevance_from_capture(const std::filesystem::path& sidecar_path, std::size_t depth,
                                       Exec exec) {
    RelevanceResult res;
    res.sidecar = read_sidecar(sidecar_path);
    const auto dir = sidecar_path.parent_path();
    const auto& sc = res.sidecar;
    if (sc.layers.empty()) {
        throw FormatError(sidecar_path.string() + ": no captured layers");
    }

    auto layers = sc.layers;
    std::sort(layers.begin(), layers.end(), [](const auto& a, const auto& b) { return a.layer < b.layer; });
    res.depth = std::clamp<std::size_t>(depth, 1, layers.size());

    std::vector<Matrix> transitions;
    for (std::size_t i = layers.size() - res.depth; i < layers.size(); ++i) {
        const auto& files = layers[i];
        const auto a = to_tensor(read_capture(dir / files.attention));
        if (files.gradient.empty()) {
            throw FormatError("layer " + std::to_string(files.layer) + " has no gradient capture");
        }
        const auto g = to_tensor(read_capture(dir / files.gradient));
        if (a.keys() != sc.seq_len) {
            throw ShapeMismatch("layer " + std::to_string(files.layer) + " has " +
                                std::to_string(a.keys()) + " positions, sidecar says " +
                                std::to_string(sc.seq_len));
        }
        transitions.push_back(transition_matrix(gradient_weighted_map(a, g, exec), exec));
    }
    res.joint = compose(transitions, transitions.size(), exec);

    std::vector<std::size_t> tokens = sc.selected_positions;
    if (tokens.empty()) tokens.push_back(sc.seq_len - 1);
    res.relevance = token_relevance(res.joint, tokens);
    res.visual_relevance.assign(res.relevance.begin() + static_cast<std::ptrdiff_t>(sc.visual_span.v_start),
                                res.relevance.begin() + static_cast<std::ptrdiff_t>(sc.visual_span.v_end + 1));
    return res;
}

}  // namespace countlab
