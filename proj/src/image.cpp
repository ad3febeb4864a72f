// SPDX-License-Identifier: Apache-2.0
#include "countlab/image.hpp"

#include <algorithm>
#include <numeric>

#include "countlab/errors.hpp"

namespace countlab {

Bitmap::Bitmap(int width, int height, Rgb fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

std::size_t BinaryMask::popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
    BinaryMask out(width_, height_);
    std::transform(bits_.begin(), bits_.end(), out.bits_.begin(),
                   [](std::uint8_t b) -> std::uint8_t { return b ? 0 : 1; });
    return out;
}

std::vector<std::uint32_t> BinaryMask::run_lengths() const {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (auto b : bits_) {
        if (b != current) {
            runs.push_back(length);
            current = b;
            length = 0;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

BinaryMask BinaryMask::from_run_lengths(int width, int height,
                                        std::span<const std::uint32_t> runs) {
    BinaryMask out(width, height);
    const auto total = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
    if (total != out.bits_.size()) {
        throw FormatError("mask run lengths cover " + std::to_string(total) +
                          " pixels, expected " + std::to_string(out.bits_.size()));
    }
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (auto run : runs) {
        std::fill_n(out.bits_.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += run;
        value ^= 1;
    }
    return out;
}

}  // namespace countlab
