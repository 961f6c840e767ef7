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

#include "test_support.hpp"

#include <limits>

#include <json.hpp>

namespace test_support {

using namespace decotune;

TuningContext htap_context() {
  TuningContext ctx;
  ctx.requirements = "Keep p95 latency low while sustaining the mixed workload";
  ctx.dbms = "PostgreSQL 14";
  ctx.workload = "HTAP: CH-benCHmark mix of TPC-C transactions and TPC-H queries";
  ctx.hardware = HardwareSpec{16.0 * (1ull << 30), 8.0, 512.0 * (1ull << 30)};
  return ctx;
}

std::unique_ptr<LlmGateway> scripted_gateway(
    const std::vector<std::pair<PromptRequest, std::string>>& answers, int max_retries) {
  FixtureStore store;
  for (const auto& [request, text] : answers) store.insert(request, nlohmann::json::parse(text));
  return std::make_unique<LlmGateway>(std::make_unique<ReplayTransport>(std::move(store)),
                                      max_retries);
}

std::string SequenceTransport::send(const PromptRequest&,
                                    const std::optional<std::string>& repair) {
  repairs.push_back(repair);
  if (next_ >= replies_.size()) throw TransportError("script exhausted");
  return replies_[next_++];
}

Knob random_page_cost() {
  return Knob::continuous("random_page_cost", 0.0, std::numeric_limits<double>::max(), 4.0);
}

KnowledgeFixtures random_page_cost_knowledge() {
  return KnowledgeFixtures::parse(R"({"random_page_cost": {"manual": {
      "description": "Sets the planner's estimate of the cost of a non-sequentially-fetched disk page.",
      "lower": "0", "upper": "1.79769e308"}}})");
}

KnowledgeSummary random_page_cost_summary(const TuningContext& ctx) {
  auto entries = *random_page_cost_knowledge().find("random_page_cost");
  SourceEntry llm;
  llm.source = Source::llm;
  llm.description = "Random page read cost relative to sequential; lower on SSDs.";
  llm.lower = "1";
  llm.upper = "10";
  entries.push_back(llm);
  return validate(random_page_cost(), entries, ctx.hardware);
}

std::vector<std::pair<PromptRequest, std::string>> random_page_cost_answers(
    const TuningContext& ctx) {
  std::vector<std::pair<PromptRequest, std::string>> out;
  out.emplace_back(knowledge_prompt(random_page_cost()),
                   R"({"D": "Random page read cost relative to sequential; lower on SSDs.",
                       "L": "1", "U": "10"})");
  const KnowledgeSummary summary = random_page_cost_summary(ctx);
  out.emplace_back(manager_prompt(summary, ctx),
                   R"({"categories": {"QueryOptimization": 0.6, "Disk": 0.4}})");
  out.emplace_back(expert_prompt(summary, ExpertCategory::QueryOptimization, ctx),
                   R"({"score": 85, "reason": "Steers the cost model between index and sequential scans."})");
  out.emplace_back(expert_prompt(summary, ExpertCategory::Disk, ctx),
                   R"({"score": 60, "reason": "Should match the random read cost of the device."})");
  out.emplace_back(objective_prompt(ctx), R"({"w_tps": 0.4, "w_lat": 0.6})");
  return out;
}

}  // namespace test_support
