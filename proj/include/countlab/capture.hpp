// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-layer capture container:
//   bytes 0-3   magic "CLCP"
//   then uint32 version, layer, kind, H, Q, K (little-endian)
//   then H*Q*K float32 values, little-endian, row-major.
// A JSON sidecar next to the layer files names the visual span and the files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "countlab/attention.hpp"

namespace countlab {

enum class CaptureKind : std::uint32_t { attention = 0, gradient = 1 };

inline constexpr std::uint32_t kCaptureVersion = 1;

struct CaptureBlock {
    std::uint32_t layer = 0;
    CaptureKind kind = CaptureKind::attention;
    std::uint32_t heads = 0;
    std::uint32_t queries = 0;
    std::uint32_t keys = 0;
    std::vector<float> values;
};

CaptureBlock make_block(std::uint32_t layer, CaptureKind kind, const AttentionTensor& t);
AttentionTensor to_tensor(const CaptureBlock& b);

std::vector<std::uint8_t> encode_capture(const CaptureBlock& b);
/// Throws FormatError on a bad magic, version, kind or length.
CaptureBlock decode_capture(std::span<const std::uint8_t> bytes);

void write_capture(const std::filesystem::path& path, const CaptureBlock& b);
CaptureBlock read_capture(const std::filesystem::path& path);

struct CaptureLayerFiles {
    std::uint32_t layer = 0;
    std::string attention;  // relative to the sidecar directory
    std::string gradient;   // empty when gradients were not captured
};

struct CaptureSidecar {
    std::string image_id;
    std::string prompt_id;
    std::string backend_id;
    nlohmann::json plan;  // plan as applied by the backend
    VisualSpan visual_span;
    PatchGrid grid;
    std::size_t seq_len = 0;
    std::size_t decode_start = 0;
    std::vector<std::size_t> selected_positions;  // output positions the gradient supervises
    std::vector<CaptureLayerFiles> layers;
};

nlohmann::json to_json(const CaptureSidecar& s);
CaptureSidecar sidecar_from_json(const nlohmann::json& j);

void write_sidecar(const std::filesystem::path& path, const CaptureSidecar& s);
CaptureSidecar read_sidecar(const std::filesystem::path& path);

}  // namespace countlab
