// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "countlab/image.hpp"

namespace countlab {

std::vector<std::uint8_t> encode_png(const Bitmap& image);
void write_png(const std::filesystem::path& path, const Bitmap& image);
Bitmap read_png(const std::filesystem::path& path);

}  // namespace countlab
