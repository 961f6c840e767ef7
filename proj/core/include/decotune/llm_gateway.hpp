// Copyright 2026 The decotune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "decotune/error.hpp"

namespace decotune {

struct PromptRequest {
  std::string role_preamble;
  std::string body;
  /// Name of a registered response schema (see `validate_response`).
  std::string response_schema;
  double temperature = 0.0;
};

enum class GatewayMode { live, replay };

struct GatewayConfig {
  GatewayMode mode = GatewayMode::replay;
  std::string endpoint_url;
  std::string model_name;
  std::filesystem::path fixture_path;
  int max_retries = 2;
  std::string api_key_env = "OPENAI_API_KEY";
  /// Live mode only: accepted responses are appended to this fixture file.
  std::optional<std::filesystem::path> record_path;
  double timeout_seconds = 60.0;

  void check() const;
  static GatewayConfig load(const std::filesystem::path& path);
  static GatewayConfig from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
};

class GatewayError : public Error {
 public:
  using Error::Error;
};
class MissingFixture : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class SchemaError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct Completion {
  nlohmann::json value;
  int retry_count = 0;
  std::string key;
};

/// Whitespace runs collapse to one space, ends trimmed.
std::string normalize_whitespace(const std::string& text);

/// Canonical JSON form of a request (sorted keys, normalized text).
std::string canonical_request(const PromptRequest& request);

/// Hex SHA-256 of the canonical request; the replay fixture key.
std::string request_key(const PromptRequest& request);

/// Returns an error message when `value` does not match the named schema.
/// Known schemas: knob_knowledge, manager_classification, objective_weights,
/// expert_score.
std::optional<std::string> validate_response(const std::string& schema,
                                             const nlohmann::json& value);

/// Request-hash to response map, with a sidecar of the original prompts.
class FixtureStore {
 public:
  FixtureStore() = default;
  static FixtureStore load(const std::filesystem::path& path);

  /// Writes `path` and `path.prompts.json`.
  void save(const std::filesystem::path& path) const;

  void insert(const PromptRequest& request, nlohmann::json response);
  const nlohmann::json* find(const std::string& key) const;
  std::size_t size() const noexcept { return responses_.size(); }

  static std::filesystem::path sidecar_path(const std::filesystem::path& path);

 private:
  std::map<std::string, nlohmann::json> responses_;
  std::map<std::string, nlohmann::json> prompts_;
};

/// One raw exchange with a model. `repair` carries the repair note on
/// retries after an invalid reply.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the model's raw text reply, or throws TransportError /
  /// MissingFixture.
  virtual std::string send(const PromptRequest& request,
                           const std::optional<std::string>& repair) = 0;
};

class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(FixtureStore store) : store_(std::move(store)) {}
  std::string send(const PromptRequest& request,
                   const std::optional<std::string>& repair) override;
  const FixtureStore& store() const noexcept { return store_; }

 private:
  FixtureStore store_;
};

/// OpenAI-compatible chat-completions client.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string endpoint_url, std::string model_name, std::string api_key,
                double timeout_seconds);
  std::string send(const PromptRequest& request,
                   const std::optional<std::string>& repair) override;

  static nlohmann::json request_payload(const std::string& model,
                                        const PromptRequest& request);

 private:
  std::string base_url_;
  std::string path_;
  std::string model_;
  std::string api_key_;
  double timeout_seconds_;
};

/// The single boundary to the model. Validates every reply against the
/// request's schema, retrying with a repair note up to `max_retries` times.
/// Safe for concurrent `complete` calls.
class LlmGateway {
 public:
  LlmGateway(std::unique_ptr<Transport> transport, int max_retries,
             std::optional<std::filesystem::path> record_path = std::nullopt);
  ~LlmGateway();

  static std::unique_ptr<LlmGateway> from_config(const GatewayConfig& config);

  Completion complete(const PromptRequest& request) const;

  /// Appended to a request body when retrying after an invalid reply.
  static std::string repair_note(const std::string& schema, const std::string& problem);

 private:
  std::unique_ptr<Transport> transport_;
  int max_retries_;
  std::optional<std::filesystem::path> record_path_;
  mutable std::mutex mutex_;
  mutable FixtureStore recorded_;
};

}  // namespace decotune
