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

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decotune/config_space.hpp"
#include "decotune/knowledge.hpp"
#include "decotune/llm_gateway.hpp"
#include "decotune/moe_selection.hpp"

namespace test_support {

decotune::TuningContext htap_context();

/// Replay gateway answering each listed request with the given JSON text.
std::unique_ptr<decotune::LlmGateway> scripted_gateway(
    const std::vector<std::pair<decotune::PromptRequest, std::string>>& answers,
    int max_retries = 2);

/// Returns the scripted replies in order, whatever the request.
class SequenceTransport final : public decotune::Transport {
 public:
  explicit SequenceTransport(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string send(const decotune::PromptRequest& request,
                   const std::optional<std::string>& repair) override;

  std::vector<std::optional<std::string>> repairs;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

/// random_page_cost with the manual's full double range.
decotune::Knob random_page_cost();

/// Manual-only knowledge for random_page_cost; the model supplies [1, 10].
decotune::KnowledgeFixtures random_page_cost_knowledge();

/// Validated summary of the manual entry plus the model's [1, 10].
decotune::KnowledgeSummary random_page_cost_summary(const decotune::TuningContext& ctx);

/// Every request the selection pipeline makes for random_page_cost: the
/// knowledge prompt, Manager weights {QueryOptimization 0.6, Disk 0.4},
/// expert scores 85 and 60, and the objective weights.
std::vector<std::pair<decotune::PromptRequest, std::string>> random_page_cost_answers(
    const decotune::TuningContext& ctx);

}  // namespace test_support
