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

#include "decotune/llm_gateway.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "decotune/moe_selection.hpp"

// After Eigen: resolv.h, pulled in here, defines a `_res` macro.
#include <httplib.h>

namespace decotune {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GatewayError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw GatewayError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw GatewayError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

json canonical_json(const PromptRequest& r) {
  // nlohmann::json objects keep keys sorted.
  return json{{"body", normalize_whitespace(r.body)},
              {"response_schema", r.response_schema},
              {"role_preamble", normalize_whitespace(r.role_preamble)},
              {"temperature", r.temperature}};
}

/// Pulls a JSON object out of a model reply that may be wrapped in prose or
/// a fenced code block.
json parse_reply(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
  }
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw SchemaError("reply contains no JSON object");
  }
  try {
    return json::parse(text.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("reply is not valid JSON: ") + e.what());
  }
}

std::optional<std::string> check_weight_map(const json& weights,
                                            const std::function<bool(const std::string&)>& known,
                                            std::size_t max_entries) {
  if (!weights.is_object() || weights.empty()) return "weights must be a non-empty object";
  if (weights.size() > max_entries) return "too many weighted entries";
  double sum = 0.0;
  for (const auto& [name, w] : weights.items()) {
    if (!known(name)) return "unknown category '" + name + "'";
    if (!w.is_number()) return "weight for '" + name + "' is not a number";
    const double v = w.get<double>();
    if (!(v > 0.0 && v <= 1.0)) return "weight for '" + name + "' outside (0, 1]";
    sum += v;
  }
  if (sum < 0.95 || sum > 1.05) {
    std::ostringstream os;
    os << "weights sum to " << sum << ", outside [0.95, 1.05]";
    return os.str();
  }
  return std::nullopt;
}

bool is_bound_value(const json& v) { return v.is_null() || v.is_number() || v.is_string(); }

}  // namespace

void GatewayConfig::check() const {
  if (mode == GatewayMode::replay && fixture_path.empty()) {
    throw GatewayError("replay mode requires fixture_path");
  }
  if (mode == GatewayMode::live && endpoint_url.empty()) {
    throw GatewayError("live mode requires endpoint_url");
  }
  if (max_retries < 0) throw GatewayError("max_retries must be >= 0");
}

GatewayConfig GatewayConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  GatewayConfig c;
  const std::string mode = j.value("mode", std::string("replay"));
  if (mode == "live") c.mode = GatewayMode::live;
  else if (mode == "replay") c.mode = GatewayMode::replay;
  else throw GatewayError("gateway mode must be 'live' or 'replay', got '" + mode + "'");
  c.endpoint_url = j.value("endpoint_url", std::string{});
  c.model_name = j.value("model_name", std::string{});
  c.max_retries = j.value("max_retries", 2);
  c.api_key_env = j.value("api_key_env", std::string("OPENAI_API_KEY"));
  c.timeout_seconds = j.value("timeout_seconds", 60.0);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (j.contains("fixture_path")) c.fixture_path = resolve(j.at("fixture_path").get<std::string>());
  if (j.contains("record_path")) c.record_path = resolve(j.at("record_path").get<std::string>());
  c.check();
  return c;
}

GatewayConfig GatewayConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string canonical_request(const PromptRequest& request) {
  return canonical_json(request).dump();
}

std::string request_key(const PromptRequest& request) {
  return sha256_hex(canonical_request(request));
}

std::optional<std::string> validate_response(const std::string& schema, const json& value) {
  if (!value.is_object()) return "reply must be a JSON object";
  if (schema == "expert_score") {
    if (!value.contains("score") || !value.at("score").is_number()) return "missing numeric 'score'";
    const double s = value.at("score").get<double>();
    if (s != std::floor(s) || s < 1.0 || s > 100.0) return "'score' must be an integer in [1, 100]";
    if (!value.contains("reason") || !value.at("reason").is_string() ||
        value.at("reason").get<std::string>().empty()) {
      return "missing non-empty 'reason'";
    }
    return std::nullopt;
  }
  if (schema == "manager_classification") {
    if (!value.contains("categories")) return "missing 'categories'";
    return check_weight_map(
        value.at("categories"),
        [](const std::string& n) { return category_from_string(n).has_value(); },
        kExpertCategoryCount);
  }
  if (schema == "objective_weights") {
    for (const char* k : {"w_tps", "w_lat"}) {
      if (!value.contains(k) || !value.at(k).is_number()) {
        return std::string("missing numeric '") + k + "'";
      }
      const double v = value.at(k).get<double>();
      if (!(v >= 0.0 && v <= 1.0)) return std::string("'") + k + "' outside [0, 1]";
    }
    const double sum = value.at("w_tps").get<double>() + value.at("w_lat").get<double>();
    if (sum < 0.95 || sum > 1.05) return "objective weights do not sum to 1";
    return std::nullopt;
  }
  if (schema == "knob_knowledge") {
    if (!value.contains("D") || !value.at("D").is_string() ||
        value.at("D").get<std::string>().empty()) {
      return "missing non-empty 'D'";
    }
    if (value.contains("L") && !is_bound_value(value.at("L"))) return "'L' must be a bound";
    if (value.contains("U") && !is_bound_value(value.at("U"))) return "'U' must be a bound";
    return std::nullopt;
  }
  return "unknown response schema '" + schema + "'";
}

FixtureStore FixtureStore::load(const std::filesystem::path& path) {
  FixtureStore store;
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw GatewayError("fixture file must be a JSON object");
  for (const auto& [key, value] : doc.items()) store.responses_[key] = value;
  const auto sidecar = sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    const json prompts = read_json_file(sidecar);
    for (const auto& [key, value] : prompts.items()) store.prompts_[key] = value;
  }
  return store;
}

std::filesystem::path FixtureStore::sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".prompts.json");
}

void FixtureStore::save(const std::filesystem::path& path) const {
  json responses = json::object();
  for (const auto& [k, v] : responses_) responses[k] = v;
  json prompts = json::object();
  for (const auto& [k, v] : prompts_) prompts[k] = v;
  write_json_file(path, responses);
  write_json_file(sidecar_path(path), prompts);
}

void FixtureStore::insert(const PromptRequest& request, json response) {
  const std::string key = request_key(request);
  responses_[key] = std::move(response);
  json prompt = canonical_json(request);
  prompt["role_preamble"] = request.role_preamble;
  prompt["body"] = request.body;
  prompts_[key] = std::move(prompt);
}

const json* FixtureStore::find(const std::string& key) const {
  const auto it = responses_.find(key);
  return it == responses_.end() ? nullptr : &it->second;
}

std::string ReplayTransport::send(const PromptRequest& request,
                                  const std::optional<std::string>& /*repair*/) {
  const std::string key = request_key(request);
  const json* hit = store_.find(key);
  if (hit == nullptr) {
    throw MissingFixture("no replay fixture for request " + key + " (schema " +
                         request.response_schema + ")");
  }
  return hit->is_string() ? hit->get<std::string>() : hit->dump();
}

HttpTransport::HttpTransport(std::string endpoint_url, std::string model_name,
                             std::string api_key, double timeout_seconds)
    : model_(std::move(model_name)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos) {
    throw GatewayError("endpoint_url must include a scheme: '" + endpoint_url + "'");
  }
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_url_ = endpoint_url;
    path_ = "/v1/chat/completions";
  } else {
    base_url_ = endpoint_url.substr(0, path_start);
    path_ = endpoint_url.substr(path_start);
  }
}

json HttpTransport::request_payload(const std::string& model, const PromptRequest& request) {
  return json{{"model", model},
              {"temperature", request.temperature},
              {"response_format", {{"type", "json_object"}}},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.role_preamble}},
                            json{{"role", "user"}, {"content", request.body}}})}};
}

std::string HttpTransport::send(const PromptRequest& request,
                                const std::optional<std::string>& repair) {
  PromptRequest effective = request;
  if (repair) effective.body += "\n\n" + *repair;

  httplib::Client client(base_url_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto res = client.Post(path_, headers, request_payload(model_, effective).dump(),
                               "application/json");
  if (!res) {
    throw TransportError("request to " + base_url_ + path_ + " failed: " +
                         httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  }
  json envelope;
  try {
    envelope = json::parse(res->body);
    return envelope.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completions envelope: ") + e.what());
  }
}

LlmGateway::LlmGateway(std::unique_ptr<Transport> transport, int max_retries,
                       std::optional<std::filesystem::path> record_path)
    : transport_(std::move(transport)),
      max_retries_(max_retries),
      record_path_(std::move(record_path)) {
  if (!transport_) throw GatewayError("gateway needs a transport");
  if (record_path_ && std::filesystem::exists(*record_path_)) {
    recorded_ = FixtureStore::load(*record_path_);
  }
}

LlmGateway::~LlmGateway() = default;

std::unique_ptr<LlmGateway> LlmGateway::from_config(const GatewayConfig& config) {
  config.check();
  if (config.mode == GatewayMode::replay) {
    return std::make_unique<LlmGateway>(
        std::make_unique<ReplayTransport>(FixtureStore::load(config.fixture_path)),
        config.max_retries);
  }
  const char* key = std::getenv(config.api_key_env.c_str());
  return std::make_unique<LlmGateway>(
      std::make_unique<HttpTransport>(config.endpoint_url, config.model_name,
                                      key != nullptr ? key : "", config.timeout_seconds),
      config.max_retries, config.record_path);
}

std::string LlmGateway::repair_note(const std::string& schema, const std::string& problem) {
  return "Your previous reply was rejected (" + problem +
         "). Reply again with only one JSON object matching the '" + schema +
         "' format described above, no other text.";
}

Completion LlmGateway::complete(const PromptRequest& request) const {
  if (request.body.empty()) throw GatewayError("prompt body must not be empty");
  std::optional<std::string> repair;
  std::string last_problem;
  bool transport_failed = false;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    std::string text;
    try {
      text = transport_->send(request, repair);
    } catch (const MissingFixture&) {
      throw;
    } catch (const TransportError& e) {
      transport_failed = true;
      last_problem = e.what();
      continue;
    }
    transport_failed = false;
    json value;
    try {
      value = parse_reply(text);
    } catch (const SchemaError& e) {
      last_problem = e.what();
      repair = repair_note(request.response_schema, last_problem);
      continue;
    }
    if (auto problem = validate_response(request.response_schema, value)) {
      last_problem = *problem;
      repair = repair_note(request.response_schema, last_problem);
      continue;
    }
    if (record_path_) {
      std::lock_guard lock(mutex_);
      recorded_.insert(request, value);
      recorded_.save(*record_path_);
    }
    return Completion{std::move(value), attempt, request_key(request)};
  }
  const std::string msg = "schema '" + request.response_schema + "' failed after " +
                          std::to_string(max_retries_ + 1) + " attempts: " + last_problem;
  if (transport_failed) throw TransportError(msg);
  throw SchemaError(msg);
}

}  // namespace decotune
