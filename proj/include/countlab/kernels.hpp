// SPDX-License-Identifier: Apache-2.0
#pragma once

// Raw numeric loops behind the attention and relevance operators. `serial`
// is the reference; `parallel` spreads rows over OpenMP threads and must give
// bit-identical results.

#include <cstddef>
#include <cstdint>

namespace countlab::kernels {

/// Row block of an H x Q x K tensor; rows with query index in [q_begin, q_end) are touched.
struct Rows {
    double* data;
    std::size_t heads;
    std::size_t queries;
    std::size_t keys;
    std::size_t q_begin;
    std::size_t q_end;
};

inline constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

namespace serial {

/// Multiplies column k by factor[k] and renormalizes. Returns the flat index
/// (h * queries + q) of the first zero-sum row, or kNoRow.
std::size_t reweight(Rows a, const double* factor);
std::size_t renormalize(Rows a);
/// Returns the first zero-sum row as reweight does.
std::size_t focus(Rows a, std::size_t v_start, std::size_t v_end, double epsilon);
/// Returns the number of rows left unchanged for lack of visual mass.
std::size_t balance(Rows a, std::size_t v_start, std::size_t v_end, double target, bool exact);

/// out[i,j] = mean over h of a[h,i,j] * max(g[h,i,j], 0)
void gradient_weighted_map(const double* a, const double* g, std::size_t heads, std::size_t s,
                           double* out);
/// In place: m <- rownorm(m + I)
void transition(double* m, std::size_t s);
/// c = a * b for n x n matrices
void matmul(const double* a, const double* b, double* c, std::size_t n);

/// Mask pixels per patch, row-major patch order.
void overlap_counts(const std::uint8_t* mask, int width, int height, int patch,
                    std::uint32_t* counts);

/// out[b, h] = in[b, h / group]
void expand_kv(const float* in, std::size_t batch, std::size_t kv_heads, std::size_t len,
               std::size_t dim, std::size_t group, float* out);

}  // namespace serial

namespace parallel {

/// Multiplies column k by factor[k] and renormalizes. Returns the flat index
/// (h * queries + q) of the first zero-sum row, or kNoRow.
std::size_t reweight(Rows a, const double* factor);
std::size_t renormalize(Rows a);
/// Returns the first zero-sum row as reweight does.
std::size_t focus(Rows a, std::size_t v_start, std::size_t v_end, double epsilon);
/// Returns the number of rows left unchanged for lack of visual mass.
std::size_t balance(Rows a, std::size_t v_start, std::size_t v_end, double target, bool exact);

/// out[i,j] = mean over h of a[h,i,j] * max(g[h,i,j], 0)
void gradient_weighted_map(const double* a, const double* g, std::size_t heads, std::size_t s,
                           double* out);
/// In place: m <- rownorm(m + I)
void transition(double* m, std::size_t s);
/// c = a * b for n x n matrices
void matmul(const double* a, const double* b, double* c, std::size_t n);

/// Mask pixels per patch, row-major patch order.
void overlap_counts(const std::uint8_t* mask, int width, int height, int patch,
                    std::uint32_t* counts);

/// out[b, h] = in[b, h / group]
void expand_kv(const float* in, std::size_t batch, std::size_t kv_heads, std::size_t len,
               std::size_t dim, std::size_t group, float* out);

}  // namespace parallel

}  // namespace countlab::kernels
