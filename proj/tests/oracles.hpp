// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference computations for tests. Nothing here calls the
// library's numeric code; each function is the direct definition, written the
// slow and obvious way.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

/// Pixels (x, y) on [0, w) x [0, h) with (x - cx)^2 + (y - cy)^2 <= r^2.
inline std::size_t disk_pixels(int cx, int cy, int r, int w = 512, int h = 512) {
    std::size_t n = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const long dx = x - cx;
            const long dy = y - cy;
            if (dx * dx + dy * dy <= static_cast<long>(r) * r) ++n;
        }
    }
    return n;
}

struct Pair {
    std::optional<long long> pred;
    long long truth;
};

/// Mean of |pred - true| / true over parsed, true > 0 pairs, in input order.
inline std::optional<double> mrce(const std::vector<Pair>& pairs) {
    long double sum = 0.0L;
    std::size_t n = 0;
    for (const auto& p : pairs) {
        if (!p.pred || p.truth == 0) continue;
        const long double diff = *p.pred > p.truth ? *p.pred - p.truth : p.truth - *p.pred;
        sum += diff / static_cast<long double>(p.truth);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(sum / static_cast<long double>(n));
}

/// Row of weights scaled per column then divided by the new sum.
inline std::vector<double> scaled_row(const std::vector<double>& row, const std::vector<double>& factor) {
    std::vector<double> out(row.size());
    long double s = 0.0L;
    for (std::size_t k = 0; k < row.size(); ++k) {
        out[k] = row[k] * factor[k];
        s += out[k];
    }
    for (double& x : out) x = static_cast<double>(x / s);
    return out;
}

/// n x n product, row-major, long double accumulation.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            long double s = 0.0L;
            for (std::size_t k = 0; k < n; ++k) s += static_cast<long double>(a[i * n + k]) * b[k * n + j];
            c[i * n + j] = static_cast<double>(s);
        }
    }
    return c;
}

/// Random row-stochastic n x n matrix with strictly positive entries.
inline std::vector<double> random_stochastic(std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += m[i * n + j] = u(gen);
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] /= s;
    }
    return m;
}

/// round(f * c) / c averaged over the given counts.
inline double biased_mrce(const std::vector<long long>& counts, double factor) {
    long double s = 0.0L;
    for (long long c : counts) {
        const long long pred = std::llround(static_cast<double>(c) * factor);
        s += std::abs(static_cast<long double>(pred - c)) / static_cast<long double>(c);
    }
    return static_cast<double>(s / static_cast<long double>(counts.size()));
}

}  // namespace oracle
