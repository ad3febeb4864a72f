// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "countlab/dataset.hpp"
#include "countlab/plans.hpp"

namespace countlab {

enum class Capability { answer, capture_attention, capture_gradients, apply_plan };

std::string_view to_string(Capability c);
std::optional<Capability> capability_from_string(std::string_view s);

struct BackendDescriptor {
    std::string id;
    std::set<Capability> capabilities;
    ModelFamily model_family = ModelFamily::mock;

    bool supports(Capability c) const { return capabilities.contains(c); }
};

struct BackendRequest {
    const SceneManifest* manifest = nullptr;
    std::filesystem::path image_path;
    std::string prompt;
    std::string prompt_id;
    const InterventionPlan* plan = nullptr;          // nullptr or baseline = no intervention
    std::optional<std::filesystem::path> capture_dir;  // set = captures requested
    std::uint64_t seed = 0;
    nlohmann::json options = nlohmann::json::object();  // opaque decoding options
};

struct BackendResponse {
    std::string raw_text;
    std::optional<std::filesystem::path> capture_sidecar;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual const BackendDescriptor& descriptor() const = 0;
    /// Must be reentrant; the harness calls it from several threads.
    virtual BackendResponse answer(const BackendRequest& request) const = 0;
};

/// Checks the request against the descriptor (CapabilityUnsupported), then answers.
BackendResponse backend_answer(const Backend& backend, const BackendRequest& request);

enum class MockKind { oracle, biased, constant, unparsable };

struct MockBehavior {
    MockKind kind = MockKind::oracle;
    double bias_factor = 1.0;
    std::int64_t constant_value = 0;
};

/// "mock:oracle", "mock:biased:<factor>", "mock:constant:<n>", "mock:unparsable".
MockBehavior parse_mock_id(std::string_view id);
std::string mock_answer(const MockBehavior& behavior, std::int64_t true_count);

/// Deterministic answers from the manifest. Captures are synthesized from the
/// object mask (attention leaning on object patches, gradient positive on them)
/// with the requested plan applied, so the relevance pipeline can run end to end.
class MockBackend : public Backend {
  public:
    explicit MockBackend(std::string id);

    const BackendDescriptor& descriptor() const override { return descriptor_; }
    BackendResponse answer(const BackendRequest& request) const override;

    static constexpr int kPatch = 32;
    static constexpr std::size_t kHeads = 2;
    static constexpr std::size_t kPrefixTokens = 4;
    static constexpr std::size_t kPromptTokens = 16;

  private:
    BackendDescriptor descriptor_;
    MockBehavior behavior_;
};

/// Out-of-process adapter described by a JSON file
/// {id, command, capabilities, model_family}. The request JSON path is passed
/// as the command's last argument; the command prints the response JSON
/// {raw_text, capture_sidecar?} on stdout.
class ExternalBackend : public Backend {
  public:
    explicit ExternalBackend(const std::filesystem::path& descriptor_path);

    const BackendDescriptor& descriptor() const override { return descriptor_; }
    BackendResponse answer(const BackendRequest& request) const override;

  private:
    BackendDescriptor descriptor_;
    std::string command_;
    std::filesystem::path base_dir_;
};

/// Mock ids or a path to an adapter descriptor.
std::unique_ptr<Backend> make_backend(std::string_view id);

}  // namespace countlab
