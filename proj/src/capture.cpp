// SPDX-License-Identifier: Apache-2.0
#include "countlab/capture.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "countlab/errors.hpp"

namespace countlab {
using nlohmann::json;

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'L', 'C', 'P'};
constexpr std::size_t kHeaderBytes = 4 + 6 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

CaptureBlock make_block(std::uint32_t layer, CaptureKind kind, const AttentionTensor& t) {
    CaptureBlock b;
    b.layer = layer;
    b.kind = kind;
    b.heads = static_cast<std::uint32_t>(t.heads());
    b.queries = static_cast<std::uint32_t>(t.queries());
    b.keys = static_cast<std::uint32_t>(t.keys());
    b.values.assign(t.data().begin(), t.data().end());
    return b;
}

AttentionTensor to_tensor(const CaptureBlock& b) {
    return AttentionTensor(b.heads, b.queries, b.keys,
                           std::vector<double>(b.values.begin(), b.values.end()));
}

std::vector<std::uint8_t> encode_capture(const CaptureBlock& b) {
    const std::size_t n = static_cast<std::size_t>(b.heads) * b.queries * b.keys;
    if (b.values.size() != n) {
        throw ShapeMismatch("capture block holds " + std::to_string(b.values.size()) +
                            " values, header implies " + std::to_string(n));
    }
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    out.reserve(kHeaderBytes + 4 * n);
    put_u32(out, kCaptureVersion);
    put_u32(out, b.layer);
    put_u32(out, static_cast<std::uint32_t>(b.kind));
    put_u32(out, b.heads);
    put_u32(out, b.queries);
    put_u32(out, b.keys);
    for (float v : b.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

CaptureBlock decode_capture(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a capture container");
    }
    const std::uint8_t* p = bytes.data() + 4;
    if (get_u32(p) != kCaptureVersion) {
        throw FormatError("unsupported capture version " + std::to_string(get_u32(p)));
    }
    CaptureBlock b;
    b.layer = get_u32(p + 4);
    const std::uint32_t kind = get_u32(p + 8);
    if (kind > 1) throw FormatError("unknown capture kind " + std::to_string(kind));
    b.kind = static_cast<CaptureKind>(kind);
    b.heads = get_u32(p + 12);
    b.queries = get_u32(p + 16);
    b.keys = get_u32(p + 20);
    const std::size_t n = static_cast<std::size_t>(b.heads) * b.queries * b.keys;
    if (bytes.size() != kHeaderBytes + 4 * n) {
        throw FormatError("capture payload is " + std::to_string(bytes.size() - kHeaderBytes) +
                          " bytes, header implies " + std::to_string(4 * n));
    }
    b.values.resize(n);
    const std::uint8_t* data = bytes.data() + kHeaderBytes;
    for (std::size_t i = 0; i < n; ++i) b.values[i] = std::bit_cast<float>(get_u32(data + 4 * i));
    return b;
}

void write_capture(const std::filesystem::path& path, const CaptureBlock& b) {
    const auto bytes = encode_capture(b);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + path.string());
}

CaptureBlock read_capture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    try {
        return decode_capture(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

json to_json(const CaptureSidecar& s) {
    json layers = json::array();
    for (const auto& l : s.layers) {
        json e{{"layer", l.layer}, {"attention", l.attention}};
        if (!l.gradient.empty()) e["gradient"] = l.gradient;
        layers.push_back(e);
    }
    return {{"image_id", s.image_id},
            {"prompt_id", s.prompt_id},
            {"backend_id", s.backend_id},
            {"plan", s.plan},
            {"visual_span", {{"v_start", s.visual_span.v_start}, {"v_end", s.visual_span.v_end}}},
            {"grid",
             {{"patch", s.grid.patch},
              {"image_width", s.grid.image_width},
              {"image_height", s.grid.image_height}}},
            {"seq_len", s.seq_len},
            {"decode_start", s.decode_start},
            {"selected_positions", s.selected_positions},
            {"layers", layers}};
}

CaptureSidecar sidecar_from_json(const json& j) {
    CaptureSidecar s;
    s.image_id = j.value("image_id", "");
    s.prompt_id = j.value("prompt_id", "");
    s.backend_id = j.value("backend_id", "");
    s.plan = j.value("plan", json());
    const auto& v = j.at("visual_span");
    s.visual_span = {v.at("v_start").get<std::size_t>(), v.at("v_end").get<std::size_t>()};
    const auto& g = j.at("grid");
    s.grid = {g.at("patch").get<int>(), g.at("image_width").get<int>(), g.at("image_height").get<int>()};
    s.seq_len = j.at("seq_len").get<std::size_t>();
    s.decode_start = j.value("decode_start", std::size_t{0});
    s.selected_positions = j.value("selected_positions", std::vector<std::size_t>{});
    for (const auto& l : j.at("layers")) {
        s.layers.push_back({l.at("layer").get<std::uint32_t>(), l.at("attention").get<std::string>(),
                            l.value("gradient", "")});
    }
    s.visual_span.validate(s.seq_len);
    s.grid.validate();
    if (s.visual_span.size() != s.grid.tokens()) {
        throw FormatError("visual span holds " + std::to_string(s.visual_span.size()) +
                          " tokens, grid has " + std::to_string(s.grid.tokens()));
    }
    return s;
}

void write_sidecar(const std::filesystem::path& path, const CaptureSidecar& s) {
    std::ofstream out(path, std::ios::trunc);
    out << to_json(s).dump(2) << '\n';
    if (!out) throw Error("cannot write " + path.string());
}

CaptureSidecar read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return sidecar_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace countlab
