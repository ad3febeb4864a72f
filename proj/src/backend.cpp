// SPDX-License-Identifier: Apache-2.0
#include "countlab/backend.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "countlab/capture.hpp"
#include "countlab/errors.hpp"
#include "countlab/rng.hpp"

namespace countlab {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Capability c) {
    switch (c) {
        case Capability::answer: return "answer";
        case Capability::capture_attention: return "capture_attention";
        case Capability::capture_gradients: return "capture_gradients";
        case Capability::apply_plan: return "apply_plan";
    }
    return "answer";
}

std::optional<Capability> capability_from_string(std::string_view s) {
    for (auto c : {Capability::answer, Capability::capture_attention, Capability::capture_gradients,
                   Capability::apply_plan}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

namespace {

bool wants_plan(const BackendRequest& r) {
    return r.plan != nullptr && r.plan->name != "baseline";
}

void require(const BackendDescriptor& d, Capability c) {
    if (!d.supports(c)) {
        throw CapabilityUnsupported("backend " + d.id + " lacks capability " + std::string(to_string(c)));
    }
}

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

}  // namespace

BackendResponse backend_answer(const Backend& backend, const BackendRequest& request) {
    const auto& d = backend.descriptor();
    require(d, Capability::answer);
    if (wants_plan(request)) require(d, Capability::apply_plan);
    if (request.capture_dir) {
        require(d, Capability::capture_attention);
        require(d, Capability::capture_gradients);
    }
    if (request.manifest == nullptr) {
        throw std::invalid_argument("backend request without a manifest");
    }
    return backend.answer(request);
}

MockBehavior parse_mock_id(std::string_view id) {
    auto bad = [&] { return std::invalid_argument("unknown mock backend: " + std::string(id)); };
    if (!id.starts_with("mock:")) throw bad();
    std::string_view rest = id.substr(5);
    const auto colon = rest.find(':');
    const std::string_view kind = rest.substr(0, colon);
    const std::string_view arg = colon == std::string_view::npos ? "" : rest.substr(colon + 1);

    MockBehavior b;
    if (kind == "oracle" && arg.empty()) {
        b.kind = MockKind::oracle;
    } else if (kind == "unparsable" && arg.empty()) {
        b.kind = MockKind::unparsable;
    } else if (kind == "biased") {
        b.kind = MockKind::biased;
        const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), b.bias_factor);
        if (ec != std::errc{} || p != arg.data() + arg.size() || !(b.bias_factor > 0.0)) {
            throw std::invalid_argument("bias factor must be a positive number: " + std::string(id));
        }
    } else if (kind == "constant") {
        b.kind = MockKind::constant;
        const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), b.constant_value);
        if (ec != std::errc{} || p != arg.data() + arg.size() || b.constant_value < 0) {
            throw std::invalid_argument("constant must be a non-negative integer: " + std::string(id));
        }
    } else {
        throw bad();
    }
    return b;
}

std::string mock_answer(const MockBehavior& b, std::int64_t true_count) {
    switch (b.kind) {
        case MockKind::oracle: return "{" + std::to_string(true_count) + "}";
        case MockKind::biased:
            return "{" + std::to_string(std::llround(static_cast<double>(true_count) * b.bias_factor)) + "}";
        case MockKind::constant: return "{" + std::to_string(b.constant_value) + "}";
        case MockKind::unparsable: return "I see many objects.";
    }
    return {};
}

MockBackend::MockBackend(std::string id) : behavior_(parse_mock_id(id)) {
    descriptor_.id = std::move(id);
    descriptor_.model_family = ModelFamily::mock;
    descriptor_.capabilities = {Capability::answer, Capability::capture_attention,
                                Capability::capture_gradients, Capability::apply_plan};
}

BackendResponse MockBackend::answer(const BackendRequest& request) const {
    const SceneManifest& m = *request.manifest;
    BackendResponse res;
    res.raw_text = mock_answer(behavior_, m.true_count);
    if (!request.capture_dir) {
        return res;
    }

    const PatchGrid grid{kPatch, m.width, m.height};
    const auto rho = overlap_ratio(m.object_mask, grid).ratio;
    const std::size_t visual = grid.tokens();
    const std::size_t answer_tokens = std::clamp<std::size_t>(res.raw_text.size(), 1, 8);
    const std::size_t v_start = kPrefixTokens;
    const std::size_t decode_start = kPrefixTokens + visual + kPromptTokens;
    const std::size_t s = decode_start + answer_tokens;
    const VisualSpan span{v_start, v_start + visual - 1};

    const InterventionPlan plan =
        request.plan ? *request.plan : make_plan("baseline", descriptor_.model_family);
    const std::size_t n_layers = plan.layers.size();
    const std::uint64_t seed = mix64(request.seed ^ fnv1a64(m.image_id) ^ fnv1a64(request.prompt));

    std::vector<AttentionTensor> attn;
    std::vector<AttentionTensor> grad;
    for (std::size_t l = 0; l < n_layers; ++l) {
        AttentionTensor a(kHeads, s, s);
        AttentionTensor g(kHeads, s, s);
        for (std::size_t h = 0; h < kHeads; ++h) {
            for (std::size_t i = 0; i < s; ++i) {
                const std::uint64_t row_seed = mix64(seed ^ (l << 48) ^ (h << 40) ^ (i << 16));
                for (std::size_t k = 0; k < s; ++k) {
                    const double u = unit(mix64(row_seed + k));
                    const bool vis = span.contains(k);
                    const double r = vis ? rho[k - v_start] : 0.0;
                    if (k <= i) {
                        a.at(h, i, k) = vis ? 0.2 + 2.0 * r + 0.1 * u : 1.0 + 0.5 * u;
                    }
                    g.at(h, i, k) = vis ? r - 0.15 + 0.1 * (u - 0.5) : 0.2 * (u - 0.5);
                }
            }
        }
        attn.push_back(renormalize(a));
        grad.push_back(std::move(g));
    }

    std::vector<std::size_t> object_keys;
    for (std::size_t t : object_token_set(rho, plan.params.tau)) object_keys.push_back(v_start + t);
    attn = apply_intervention(attn, plan, span, &object_keys, decode_start);

    CaptureSidecar sc;
    sc.image_id = m.image_id;
    sc.prompt_id = request.prompt_id;
    sc.backend_id = descriptor_.id;
    sc.plan = to_json(plan);
    sc.visual_span = span;
    sc.grid = grid;
    sc.seq_len = s;
    sc.decode_start = decode_start;
    for (std::size_t t = 0; t < answer_tokens; ++t) {
        const char c = res.raw_text[std::min(t, res.raw_text.size() - 1)];
        if (std::isdigit(static_cast<unsigned char>(c))) sc.selected_positions.push_back(decode_start + t);
    }
    if (sc.selected_positions.empty()) {
        for (std::size_t t = 0; t < answer_tokens; ++t) sc.selected_positions.push_back(decode_start + t);
    }

    const fs::path dir = *request.capture_dir;
    fs::create_directories(dir);
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::ostringstream stem;
        stem << "layer" << std::setw(2) << std::setfill('0') << l;
        const auto layer = static_cast<std::uint32_t>(l);
        write_capture(dir / (stem.str() + ".attn.bin"), make_block(layer, CaptureKind::attention, attn[l]));
        write_capture(dir / (stem.str() + ".grad.bin"), make_block(layer, CaptureKind::gradient, grad[l]));
        sc.layers.push_back({layer, stem.str() + ".attn.bin", stem.str() + ".grad.bin"});
    }
    res.capture_sidecar = dir / "capture.json";
    write_sidecar(*res.capture_sidecar, sc);
    return res;
}

ExternalBackend::ExternalBackend(const fs::path& descriptor_path) : base_dir_(descriptor_path.parent_path()) {
    std::ifstream in(descriptor_path);
    if (!in) throw AdapterFailure("cannot open adapter descriptor " + descriptor_path.string());
    json j;
    try {
        j = json::parse(in);
        descriptor_.id = j.at("id").get<std::string>();
        command_ = j.at("command").get<std::string>();
        for (const auto& c : j.at("capabilities")) {
            const auto cap = capability_from_string(c.get<std::string>());
            if (!cap) throw FormatError("unknown capability " + c.get<std::string>());
            descriptor_.capabilities.insert(*cap);
        }
        const auto fam = model_family_from_string(j.value("model_family", "mock"));
        if (!fam) throw FormatError("unknown model family " + j.value("model_family", ""));
        descriptor_.model_family = *fam;
    } catch (const std::exception& e) {
        throw AdapterFailure("bad adapter descriptor " + descriptor_path.string() + ": " + e.what());
    }
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

}  // namespace

BackendResponse ExternalBackend::answer(const BackendRequest& request) const {
    const SceneManifest& m = *request.manifest;
    json req{{"image", fs::absolute(request.image_path).string()},
             {"image_id", m.image_id},
             {"prompt", request.prompt},
             {"prompt_id", request.prompt_id},
             {"plan", request.plan ? to_json(*request.plan) : json(nullptr)},
             {"capture_dir", request.capture_dir ? json(fs::absolute(*request.capture_dir).string()) : json(nullptr)},
             {"seed", request.seed},
             {"options", request.options}};
    const auto tag = fnv1a64(m.image_id + '\n' + request.prompt + '\n' +
                             (request.plan ? request.plan->name : std::string()));
    const fs::path req_path = fs::temp_directory_path() /
                              ("countlab-request-" + std::to_string(tag) + ".json");
    {
        std::ofstream out(req_path, std::ios::trunc);
        out << req.dump();
        if (!out) throw AdapterFailure("cannot write adapter request " + req_path.string());
    }

    const std::string cmd = "cd " + shell_quote(base_dir_.empty() ? "." : base_dir_.string()) + " && " +
                            command_ + " " + shell_quote(req_path.string());
    std::string output;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        fs::remove(req_path);
        throw AdapterFailure("cannot start adapter " + descriptor_.id);
    }
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
    const int status = ::pclose(pipe);
    std::error_code ec;
    fs::remove(req_path, ec);

    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw AdapterFailure("adapter " + descriptor_.id + " exited with status " +
                             std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status) +
                             "; output: " + output.substr(0, 500));
    }
    BackendResponse res;
    try {
        const json j = json::parse(output);
        res.raw_text = j.at("raw_text").get<std::string>();
        if (j.contains("capture_sidecar") && !j["capture_sidecar"].is_null()) {
            res.capture_sidecar = j["capture_sidecar"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw AdapterFailure("adapter " + descriptor_.id + " returned malformed JSON (" + e.what() +
                             "): " + output.substr(0, 500));
    }
    if (request.capture_dir && !res.capture_sidecar) {
        throw AdapterFailure("adapter " + descriptor_.id + " returned no capture for a capture request");
    }
    return res;
}

std::unique_ptr<Backend> make_backend(std::string_view id) {
    if (id.starts_with("mock:")) {
        return std::make_unique<MockBackend>(std::string(id));
    }
    const fs::path p{std::string(id)};
    if (fs::is_regular_file(p)) {
        return std::make_unique<ExternalBackend>(p);
    }
    throw std::invalid_argument("backend must be a mock id or an adapter descriptor file: " + std::string(id));
}

}  // namespace countlab
