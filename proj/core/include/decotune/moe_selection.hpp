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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "decotune/config_space.hpp"
#include "decotune/knowledge.hpp"
#include "decotune/llm_gateway.hpp"
#include "decotune/objective.hpp"

namespace decotune {

enum class ExpertCategory {
  AccessControl,
  QueryOptimization,
  QueryExecution,
  BackgroundProcesses,
  CPU,
  Memory,
  Disk,
};

inline constexpr std::size_t kExpertCategoryCount = 7;
inline constexpr std::array<ExpertCategory, kExpertCategoryCount> kExpertCategories{
    ExpertCategory::AccessControl,       ExpertCategory::QueryOptimization,
    ExpertCategory::QueryExecution,      ExpertCategory::BackgroundProcesses,
    ExpertCategory::CPU,                 ExpertCategory::Memory,
    ExpertCategory::Disk};

std::string_view to_string(ExpertCategory category) noexcept;
std::optional<ExpertCategory> category_from_string(std::string_view text);

/// User requirements plus the task: target DBMS, workload and hardware.
struct TuningContext {
  std::string requirements;
  std::string dbms;
  std::string workload;
  HardwareSpec hardware;

  void check() const;
};

struct CategoryAssignment {
  std::string knob_name;
  std::map<ExpertCategory, double> weights;

  void check() const;
};

struct ExpertVerdict {
  std::string knob_name;
  ExpertCategory category = ExpertCategory::AccessControl;
  int score = 1;
  std::string reason;

  bool operator==(const ExpertVerdict&) const = default;
};

struct KnobEvaluation {
  KnowledgeSummary summary;
  CategoryAssignment assignment;
  std::vector<ExpertVerdict> verdicts;
};

struct RankedKnob {
  std::string knob_name;
  double final_score = 0.0;
  std::vector<ExpertVerdict> verdicts;
  CategoryAssignment assignment;
  double lower = 0.0;
  double upper = 0.0;
};

PromptRequest manager_prompt(const KnowledgeSummary& knob, const TuningContext& ctx);
PromptRequest expert_prompt(const KnowledgeSummary& knob, ExpertCategory category,
                            const TuningContext& ctx);
PromptRequest objective_prompt(const TuningContext& ctx);

/// Manager step: category weights for one knob, renormalized to sum to one.
CategoryAssignment classify_and_weight(const KnowledgeSummary& knob, const TuningContext& ctx,
                                       const LlmGateway& gateway);

/// One verdict per weighted category, in category order.
std::vector<ExpertVerdict> expert_evaluate(const KnowledgeSummary& knob,
                                           const CategoryAssignment& assignment,
                                           const TuningContext& ctx,
                                           const LlmGateway& gateway);

/// Weighted sum of expert scores. Throws when a verdict's category carries
/// no weight.
double final_score(const CategoryAssignment& assignment,
                   std::span<const ExpertVerdict> verdicts);

/// Sorts by final score descending, knob name ascending on ties, and keeps
/// the first `top_n`.
std::vector<RankedKnob> rank_and_select(std::span<const KnobEvaluation> evaluations,
                                        std::size_t top_n,
                                        std::vector<std::string>* warnings = nullptr);

inline constexpr std::size_t kDefaultTopN = 20;

struct SelectionResult {
  std::vector<RankedKnob> ranked;
  ObjectiveWeights objective;
  std::vector<std::string> skipped;
  std::vector<std::string> warnings;
};

/// Knowledge ingestion and validation, then the three MoE steps, for every
/// knob of the space. Knobs whose knowledge or expert calls fail are skipped
/// with a warning.
SelectionResult run_selection(const ConfigurationSpace& space,
                              const KnowledgeFixtures& fixtures, const LlmGateway& gateway,
                              const TuningContext& ctx, std::size_t top_n = kDefaultTopN);

/// [{knob, final_score, weights, verdicts[{category, score, reason}], range}]
nlohmann::json selection_report_json(std::span<const RankedKnob> ranked);
std::vector<RankedKnob> parse_selection_report(const nlohmann::json& report);
std::vector<RankedKnob> load_selection_report(const std::filesystem::path& path);

}  // namespace decotune
