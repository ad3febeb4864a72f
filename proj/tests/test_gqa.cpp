// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "countlab/errors.hpp"
#include "countlab/gqa.hpp"

using namespace countlab;

namespace {

Tensor4 random_values(std::mt19937_64& gen, std::size_t b, std::size_t h, std::size_t l, std::size_t d) {
    std::normal_distribution<float> n;
    Tensor4 t(b, h, l, d);
    for (auto& x : t.data) x = n(gen);
    return t;
}

void check_expansion(const Tensor4& in, const Tensor4& out, std::size_t g) {
    REQUIRE(out.heads == in.heads * g);
    for (std::size_t b = 0; b < in.batch; ++b)
        for (std::size_t h = 0; h < out.heads; ++h)
            for (std::size_t l = 0; l < in.length; ++l)
                for (std::size_t d = 0; d < in.dim; ++d) CHECK(out.at(b, h, l, d) == in.at(b, h / g, l, d));
}

}  // namespace

TEST_SUITE("gqa") {

TEST_CASE("eight key-value heads with group four give 32 heads") {
    std::mt19937_64 gen(1);
    const auto in = random_values(gen, 2, 8, 5, 16);
    const auto out = expand_kv_heads(in, 4);
    CHECK(out.heads == 32);
    check_expansion(in, out, 4);
    CHECK(expand_kv_heads_to(in, 32).data == out.data);
}

TEST_CASE("group one is the identity") {
    std::mt19937_64 gen(2);
    const auto in = random_values(gen, 1, 3, 4, 5);
    CHECK(expand_kv_heads(in, 1).data == in.data);
}

TEST_CASE("small geometry index check") {
    std::mt19937_64 gen(3);
    const auto in = random_values(gen, 1, 2, 3, 4);
    const auto out = expand_kv_heads(in, 2);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t d = 0; d < 4; ++d) CHECK(out.at(0, 3, l, d) == in.at(0, 1, l, d));
    check_expansion(in, out, 2);
}

TEST_CASE("serial and parallel agree") {
    std::mt19937_64 gen(4);
    const auto in = random_values(gen, 3, 4, 7, 9);
    CHECK(expand_kv_heads(in, 3, Exec::serial).data == expand_kv_heads(in, 3, Exec::parallel).data);
}

TEST_CASE("shape errors") {
    Tensor4 in(1, 2, 3, 4);
    CHECK_THROWS_AS(expand_kv_heads(in, 0), ShapeMismatch);
    CHECK_THROWS_AS(expand_kv_heads_to(in, 5), ShapeMismatch);
    in.data.pop_back();
    CHECK_THROWS_AS(expand_kv_heads(in, 2), ShapeMismatch);
}

}  // TEST_SUITE
