// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdint>

#include "countlab/kernels.hpp"

namespace countlab::kernels::parallel {
namespace {

struct RowSet {
    std::size_t count;
    std::size_t span;  // active queries per head
    std::size_t begin;
};

RowSet active(const Rows& a) {
    const std::size_t stop = std::min(a.q_end, a.queries);
    const std::size_t span = stop > a.q_begin ? stop - a.q_begin : 0;
    return {a.heads * span, span, a.q_begin};
}

std::size_t flat(const Rows& a, const RowSet& s, std::size_t i) {
    return (i / s.span) * a.queries + s.begin + i % s.span;
}

bool normalize_row(double* row, std::size_t n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += row[k];
    if (!(sum > 0.0)) return false;
    for (std::size_t k = 0; k < n; ++k) row[k] /= sum;
    return true;
}

}  // namespace

std::size_t reweight(Rows a, const double* factor) {
    const RowSet s = active(a);
    std::size_t bad = kNoRow;
    const auto n = static_cast<std::int64_t>(s.count);
#pragma omp parallel for schedule(static) reduction(min : bad)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t r = flat(a, s, static_cast<std::size_t>(i));
        double* row = a.data + r * a.keys;
        for (std::size_t k = 0; k < a.keys; ++k) row[k] *= factor[k];
        if (!normalize_row(row, a.keys)) bad = std::min(bad, r);
    }
    return bad;
}

std::size_t renormalize(Rows a) {
    const RowSet s = active(a);
    std::size_t bad = kNoRow;
    const auto n = static_cast<std::int64_t>(s.count);
#pragma omp parallel for schedule(static) reduction(min : bad)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t r = flat(a, s, static_cast<std::size_t>(i));
        if (!normalize_row(a.data + r * a.keys, a.keys)) bad = std::min(bad, r);
    }
    return bad;
}

std::size_t focus(Rows a, std::size_t v_start, std::size_t v_end, double epsilon) {
    const RowSet s = active(a);
    std::size_t bad = kNoRow;
    const auto n = static_cast<std::int64_t>(s.count);
#pragma omp parallel for schedule(static) reduction(min : bad)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t r = flat(a, s, static_cast<std::size_t>(i));
        double* row = a.data + r * a.keys;
        std::fill(row, row + v_start, epsilon);
        std::fill(row + v_end + 1, row + a.keys, epsilon);
        if (!normalize_row(row, a.keys)) bad = std::min(bad, r);
    }
    return bad;
}

std::size_t balance(Rows a, std::size_t v_start, std::size_t v_end, double target, bool exact) {
    const RowSet s = active(a);
    std::size_t skipped = 0;
    const auto n = static_cast<std::int64_t>(s.count);
#pragma omp parallel for schedule(static) reduction(+ : skipped)
    for (std::int64_t i = 0; i < n; ++i) {
        double* row = a.data + flat(a, s, static_cast<std::size_t>(i)) * a.keys;
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
    return skipped;
}

void gradient_weighted_map(const double* a, const double* g, std::size_t heads, std::size_t s,
                           double* out) {
    const std::size_t plane = s * s;
    const auto n = static_cast<std::int64_t>(s);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < s; ++j) {
            const std::size_t e = static_cast<std::size_t>(i) * s + j;
            double acc = 0.0;
            for (std::size_t h = 0; h < heads; ++h) {
                acc += a[h * plane + e] * std::max(g[h * plane + e], 0.0);
            }
            out[e] = acc / static_cast<double>(heads);
        }
    }
}

void transition(double* m, std::size_t s) {
    const auto n = static_cast<std::int64_t>(s);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        m[r * s + r] += 1.0;
        normalize_row(m + r * s, s);
    }
}

void matmul(const double* a, const double* b, double* c, std::size_t n) {
    // i-k-j order streams rows of b; each c[i,j] still accumulates k = 0..n-1
    // in sequence, so the result matches the serial dot-product loop bit for bit.
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* ci = c + i * n;
        std::fill(ci, ci + n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a[i * n + k];
            const double* bk = b + k * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void overlap_counts(const std::uint8_t* mask, int width, int height, int patch,
                    std::uint32_t* counts) {
    const int cols = (width + patch - 1) / patch;
    const int rows = (height + patch - 1) / patch;
#pragma omp parallel for schedule(static)
    for (int pr = 0; pr < rows; ++pr) {
        std::uint32_t* out = counts + static_cast<std::size_t>(pr) * cols;
        std::fill(out, out + cols, 0u);
        const int y_end = std::min(height, (pr + 1) * patch);
        for (int y = pr * patch; y < y_end; ++y) {
            const std::uint8_t* line = mask + static_cast<std::size_t>(y) * width;
            for (int x = 0; x < width; ++x) out[x / patch] += line[x] != 0;
        }
    }
}

void expand_kv(const float* in, std::size_t batch, std::size_t kv_heads, std::size_t len,
               std::size_t dim, std::size_t group, float* out) {
    const std::size_t block = len * dim;
    const std::size_t heads = kv_heads * group;
    const auto n = static_cast<std::int64_t>(batch * heads);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t b = static_cast<std::size_t>(i) / heads;
        const std::size_t h = static_cast<std::size_t>(i) % heads;
        const float* src = in + (b * kv_heads + h / group) * block;
        std::copy(src, src + block, out + static_cast<std::size_t>(i) * block);
    }
}

}  // namespace countlab::kernels::parallel
