// SPDX-License-Identifier: Apache-2.0
#include "countlab/gqa.hpp"

#include <string>

#include "countlab/errors.hpp"
#include "countlab/kernels.hpp"

namespace countlab {

Tensor4 expand_kv_heads(const Tensor4& values, std::size_t group, Exec exec) {
    if (group == 0) {
        throw ShapeMismatch("group factor must be at least 1");
    }
    if (values.data.size() != values.batch * values.heads * values.length * values.dim) {
        throw ShapeMismatch("value tensor holds " + std::to_string(values.data.size()) +
                            " floats, shape implies " +
                            std::to_string(values.batch * values.heads * values.length * values.dim));
    }
    Tensor4 out(values.batch, values.heads * group, values.length, values.dim);
    if (exec == Exec::serial) {
        kernels::serial::expand_kv(values.data.data(), values.batch, values.heads, values.length,
                                   values.dim, group, out.data.data());
    } else {
        kernels::parallel::expand_kv(values.data.data(), values.batch, values.heads, values.length,
                                     values.dim, group, out.data.data());
    }
    return out;
}

Tensor4 expand_kv_heads_to(const Tensor4& values, std::size_t query_heads, Exec exec) {
    if (values.heads == 0 || query_heads % values.heads != 0) {
        throw ShapeMismatch(std::to_string(query_heads) + " query heads is not a multiple of " +
                            std::to_string(values.heads) + " key-value heads");
    }
    return expand_kv_heads(values, query_heads / values.heads, exec);
}

}  // namespace countlab
