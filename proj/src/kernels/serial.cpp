// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstring>

#include "countlab/kernels.hpp"

namespace countlab::kernels::serial {
namespace {

std::size_t q_stop(const Rows& a) { return std::min(a.q_end, a.queries); }

// Divides by the sum; false when the row has no mass.
bool normalize_row(double* row, std::size_t n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += row[k];
    if (!(sum > 0.0)) return false;
    for (std::size_t k = 0; k < n; ++k) row[k] /= sum;
    return true;
}

}  // namespace

std::size_t reweight(Rows a, const double* factor) {
    std::size_t bad = kNoRow;
    for (std::size_t h = 0; h < a.heads; ++h) {
        for (std::size_t q = a.q_begin; q < q_stop(a); ++q) {
            double* row = a.data + (h * a.queries + q) * a.keys;
            for (std::size_t k = 0; k < a.keys; ++k) row[k] *= factor[k];
            if (!normalize_row(row, a.keys) && bad == kNoRow) bad = h * a.queries + q;
        }
    }
    return bad;
}

std::size_t renormalize(Rows a) {
    std::size_t bad = kNoRow;
    for (std::size_t h = 0; h < a.heads; ++h) {
        for (std::size_t q = a.q_begin; q < q_stop(a); ++q) {
            double* row = a.data + (h * a.queries + q) * a.keys;
            if (!normalize_row(row, a.keys) && bad == kNoRow) bad = h * a.queries + q;
        }
    }
    return bad;
}

std::size_t focus(Rows a, std::size_t v_start, std::size_t v_end, double epsilon) {
    std::size_t bad = kNoRow;
    for (std::size_t h = 0; h < a.heads; ++h) {
        for (std::size_t q = a.q_begin; q < q_stop(a); ++q) {
            double* row = a.data + (h * a.queries + q) * a.keys;
            for (std::size_t k = 0; k < a.keys; ++k) {
                if (k < v_start || k > v_end) row[k] = epsilon;
            }
            if (!normalize_row(row, a.keys) && bad == kNoRow) bad = h * a.queries + q;
        }
    }
    return bad;
}

std::size_t balance(Rows a, std::size_t v_start, std::size_t v_end, double target, bool exact) {
    std::size_t skipped = 0;
    for (std::size_t h = 0; h < a.heads; ++h) {
        for (std::size_t q = a.q_begin; q < q_stop(a); ++q) {
            double* row = a.data + (h * a.queries + q) * a.keys;
            double vis = 0.0;
            double total = 0.0;
            for (std::size_t k = 0; k < a.keys; ++k) {
                total += row[k];
                if (k >= v_start && k <= v_end) vis += row[k];
            }
            const double r = vis / total;
            if (!(vis > 0.0) || (exact && !(r < 1.0))) {
                ++skipped;
                continue;
            }
            const double gamma = exact ? (target / (1.0 - target)) * ((1.0 - r) / r) : target / r;
            for (std::size_t k = v_start; k <= v_end; ++k) row[k] *= gamma;
            normalize_row(row, a.keys);
        }
    }
    return skipped;
}

void gradient_weighted_map(const double* a, const double* g, std::size_t heads, std::size_t s,
                           double* out) {
    const std::size_t plane = s * s;
    for (std::size_t e = 0; e < plane; ++e) {
        double acc = 0.0;
        for (std::size_t h = 0; h < heads; ++h) {
            acc += a[h * plane + e] * std::max(g[h * plane + e], 0.0);
        }
        out[e] = acc / static_cast<double>(heads);
    }
}

void transition(double* m, std::size_t s) {
    for (std::size_t i = 0; i < s; ++i) {
        m[i * s + i] += 1.0;
        normalize_row(m + i * s, s);
    }
}

void matmul(const double* a, const double* b, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += a[i * n + k] * b[k * n + j];
            c[i * n + j] = acc;
        }
    }
}

void overlap_counts(const std::uint8_t* mask, int width, int height, int patch,
                    std::uint32_t* counts) {
    const int cols = (width + patch - 1) / patch;
    const int rows = (height + patch - 1) / patch;
    std::fill(counts, counts + static_cast<std::size_t>(cols) * rows, 0u);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (mask[static_cast<std::size_t>(y) * width + x]) {
                ++counts[static_cast<std::size_t>(y / patch) * cols + x / patch];
            }
        }
    }
}

void expand_kv(const float* in, std::size_t batch, std::size_t kv_heads, std::size_t len,
               std::size_t dim, std::size_t group, float* out) {
    const std::size_t block = len * dim;
    const std::size_t heads = kv_heads * group;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
            const float* src = in + (b * kv_heads + h / group) * block;
            std::copy(src, src + block, out + (b * heads + h) * block);
        }
    }
}

}  // namespace countlab::kernels::serial
