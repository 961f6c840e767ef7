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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decotune/config_space.hpp"
#include "decotune/error.hpp"

namespace decotune {

class LlmGateway;
struct PromptRequest;

/// Listed in description priority order.
enum class Source { manual, web, llm };

std::string_view to_string(Source source) noexcept;
std::optional<Source> source_from_string(std::string_view text);

/// What one source says about a knob. Bounds are unresolved expressions:
/// literals ("4", "inf") or hardware-relative ("50% of RAM").
struct SourceEntry {
  Source source = Source::manual;
  std::string description;
  std::optional<std::string> lower;
  std::optional<std::string> upper;

  void check() const;
};

struct KnowledgeSummary {
  std::string knob_name;
  std::string d_manual;
  std::string d_web;
  std::string d_llm;
  double lower = 0.0;
  double upper = 0.0;
  bool conflict_flag = false;

  /// Descriptions joined in priority order, labelled by source.
  std::string descriptions_by_priority() const;
};

class EmptyKnowledge : public Error {
 public:
  using Error::Error;
};

/// Pre-fetched manual/web/LLM documents keyed by knob name.
class KnowledgeFixtures {
 public:
  KnowledgeFixtures() = default;
  static KnowledgeFixtures load(const std::filesystem::path& path);
  static KnowledgeFixtures parse(std::string_view json_text);

  const std::vector<SourceEntry>* find(std::string_view knob) const;
  void add(const std::string& knob, SourceEntry entry);

 private:
  std::map<std::string, std::vector<SourceEntry>, std::less<>> by_knob_;
};

/// The request used to ask the model for a knob's description and range.
PromptRequest knowledge_prompt(const Knob& knob);

/// Fixture entries for the knob, plus an LLM entry requested through the
/// gateway when the fixtures carry none. A failing gateway contributes
/// nothing. Throws EmptyKnowledge when no source remains.
std::vector<SourceEntry> ingest(const Knob& knob, const KnowledgeFixtures& fixtures,
                                const LlmGateway* gateway,
                                std::vector<std::string>* warnings = nullptr);

/// Intersects the source ranges (max of lowers, min of uppers, clamped to
/// the native domain). Irreconcilable ranges set conflict_flag and fall back
/// to the highest-priority self-consistent source.
KnowledgeSummary validate(const Knob& knob, std::span<const SourceEntry> entries,
                          const HardwareSpec& hardware);

}  // namespace decotune
