// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "countlab/exec.hpp"

namespace countlab {

/// batch x heads x length x dim, row-major float32.
struct Tensor4 {
    std::size_t batch = 0;
    std::size_t heads = 0;
    std::size_t length = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    Tensor4() = default;
    Tensor4(std::size_t b, std::size_t h, std::size_t l, std::size_t d)
        : batch(b), heads(h), length(l), dim(d), data(b * h * l * d, 0.0f) {}

    float& at(std::size_t b, std::size_t h, std::size_t l, std::size_t d) {
        return data[((b * heads + h) * length + l) * dim + d];
    }
    float at(std::size_t b, std::size_t h, std::size_t l, std::size_t d) const {
        return data[((b * heads + h) * length + l) * dim + d];
    }
};

/// Repeats each key-value head `group` times: output head h is input head h / group.
/// Throws ShapeMismatch for group 0 or a data size that disagrees with the shape.
Tensor4 expand_kv_heads(const Tensor4& values, std::size_t group, Exec exec = Exec::parallel);

/// Expansion to `query_heads` heads; ShapeMismatch unless it is a multiple of values.heads.
Tensor4 expand_kv_heads_to(const Tensor4& values, std::size_t query_heads, Exec exec = Exec::parallel);

}  // namespace countlab
