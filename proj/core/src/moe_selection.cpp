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

#include "decotune/moe_selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace decotune {

using nlohmann::json;

namespace {

constexpr const char* kDraftPreamble =
    "Answer in draft style: reason in short drafts of at most five words per step and "
    "keep only the essential information. Reply with one JSON object and nothing else.";

std::string describe_hardware(const HardwareSpec& hw) {
  std::ostringstream os;
  os.precision(4);
  os << "RAM " << hw.ram_bytes / (1024.0 * 1024.0 * 1024.0) << " GB, " << hw.cpu_cores
     << " CPU cores, disk " << hw.disk_bytes / (1024.0 * 1024.0 * 1024.0) << " GB";
  return os.str();
}

std::string describe_task(const TuningContext& ctx) {
  std::ostringstream os;
  os << "DBMS: " << ctx.dbms << "\n"
     << "Workload: " << ctx.workload << "\n"
     << "Hardware: " << describe_hardware(ctx.hardware) << "\n"
     << "User requirements: " << ctx.requirements << "\n";
  return os.str();
}

std::string describe_knob(const KnowledgeSummary& knob) {
  std::ostringstream os;
  os.precision(17);
  os << "Knob: " << knob.knob_name << "\n"
     << "Validated range: [" << knob.lower << ", " << knob.upper << "]"
     << (knob.conflict_flag ? " (sources conflicted)" : "") << "\n"
     << "Knowledge, most authoritative first:\n"
     << knob.descriptions_by_priority() << "\n";
  return os.str();
}

std::string category_list() {
  std::string out;
  for (const auto c : kExpertCategories) {
    if (!out.empty()) out += ", ";
    out += to_string(c);
  }
  return out;
}

std::string_view category_focus(ExpertCategory c) {
  switch (c) {
    case ExpertCategory::AccessControl:
      return "connections, authentication, locking and concurrency control";
    case ExpertCategory::QueryOptimization:
      return "planner cost model, plan choice and statistics";
    case ExpertCategory::QueryExecution:
      return "executor behaviour, joins, sorts, parallel query";
    case ExpertCategory::BackgroundProcesses:
      return "vacuum, checkpoints, WAL writers and other background workers";
    case ExpertCategory::CPU:
      return "CPU utilisation and worker parallelism";
    case ExpertCategory::Memory:
      return "buffers, caches and working memory";
    case ExpertCategory::Disk:
      return "I/O patterns, storage cost and durability writes";
  }
  return "";
}

}  // namespace

std::string_view to_string(ExpertCategory category) noexcept {
  switch (category) {
    case ExpertCategory::AccessControl: return "AccessControl";
    case ExpertCategory::QueryOptimization: return "QueryOptimization";
    case ExpertCategory::QueryExecution: return "QueryExecution";
    case ExpertCategory::BackgroundProcesses: return "BackgroundProcesses";
    case ExpertCategory::CPU: return "CPU";
    case ExpertCategory::Memory: return "Memory";
    case ExpertCategory::Disk: return "Disk";
  }
  return "AccessControl";
}

std::optional<ExpertCategory> category_from_string(std::string_view text) {
  for (const auto c : kExpertCategories) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

void TuningContext::check() const { hardware.check(); }

void CategoryAssignment::check() const {
  if (weights.empty() || weights.size() > kExpertCategoryCount) {
    throw Error("knob '" + knob_name + "': assignment needs 1..7 weighted categories");
  }
  double sum = 0.0;
  for (const auto& [c, w] : weights) {
    if (!(w > 0.0 && w <= 1.0)) {
      throw Error("knob '" + knob_name + "': weight outside (0, 1]");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("knob '" + knob_name + "': weights must sum to 1");
}

PromptRequest manager_prompt(const KnowledgeSummary& knob, const TuningContext& ctx) {
  PromptRequest r;
  r.role_preamble = std::string("You are the Manager of a panel of database tuning experts. ") +
                    kDraftPreamble;
  std::ostringstream body;
  body << describe_task(ctx) << "\n"
       << describe_knob(knob) << "\n"
       << "Classify this knob into the expert categories it affects, chosen from: "
       << category_list() << ".\n"
       << "Give each affected category a weight reflecting its relevance to this task. "
          "The weights must sum to 1. Leave out categories irrelevant to the task.\n"
       << "Format: {\"categories\": {\"<Category>\": <weight>, ...}, \"reason\": \"<draft>\"}";
  r.body = body.str();
  r.response_schema = "manager_classification";
  return r;
}

PromptRequest expert_prompt(const KnowledgeSummary& knob, ExpertCategory category,
                            const TuningContext& ctx) {
  PromptRequest r;
  r.role_preamble = "You are the " + std::string(to_string(category)) +
                    " expert of a database tuning panel, specialised in " +
                    std::string(category_focus(category)) + ". " + kDraftPreamble;
  std::ostringstream body;
  body << describe_task(ctx) << "\n"
       << describe_knob(knob) << "\n"
       << "Within your specialty, score how much tuning this knob matters for the task, "
          "from 1 (minimal impact) to 100 (critical). Justify the score briefly.\n"
       << "Format: {\"score\": <integer 1-100>, \"reason\": \"<brief justification>\"}";
  r.body = body.str();
  r.response_schema = "expert_score";
  return r;
}

PromptRequest objective_prompt(const TuningContext& ctx) {
  PromptRequest r;
  r.role_preamble = std::string("You are the Manager of a panel of database tuning experts. ") +
                    kDraftPreamble;
  std::ostringstream body;
  body << describe_task(ctx) << "\n"
       << "Decide how much the tuning objective should weigh throughput (transactions per "
          "second) against latency for this task. The two weights must sum to 1; give 0 to "
          "a metric the task does not care about.\n"
       << "Format: {\"w_tps\": <weight>, \"w_lat\": <weight>, \"reason\": \"<draft>\"}";
  r.body = body.str();
  r.response_schema = "objective_weights";
  return r;
}

CategoryAssignment classify_and_weight(const KnowledgeSummary& knob, const TuningContext& ctx,
                                       const LlmGateway& gateway) {
  const Completion c = gateway.complete(manager_prompt(knob, ctx));
  CategoryAssignment a;
  a.knob_name = knob.knob_name;
  double sum = 0.0;
  for (const auto& [name, w] : c.value.at("categories").items()) {
    a.weights[*category_from_string(name)] = w.get<double>();
    sum += w.get<double>();
  }
  for (auto& [cat, w] : a.weights) w /= sum;
  a.check();
  return a;
}

std::vector<ExpertVerdict> expert_evaluate(const KnowledgeSummary& knob,
                                           const CategoryAssignment& assignment,
                                           const TuningContext& ctx,
                                           const LlmGateway& gateway) {
  if (assignment.weights.empty()) {
    throw Error("knob '" + knob.knob_name + "': empty category assignment");
  }
  std::vector<ExpertVerdict> out;
  out.reserve(assignment.weights.size());
  for (const auto& [category, weight] : assignment.weights) {
    const Completion c = gateway.complete(expert_prompt(knob, category, ctx));
    out.push_back(ExpertVerdict{knob.knob_name, category,
                                static_cast<int>(c.value.at("score").get<double>()),
                                c.value.at("reason").get<std::string>()});
  }
  return out;
}

double final_score(const CategoryAssignment& assignment,
                   std::span<const ExpertVerdict> verdicts) {
  double total = 0.0;
  for (const auto& v : verdicts) {
    const auto it = assignment.weights.find(v.category);
    if (it == assignment.weights.end()) {
      throw Error("knob '" + v.knob_name + "': verdict for unweighted category " +
                  std::string(to_string(v.category)));
    }
    total += it->second * static_cast<double>(v.score);
  }
  return total;
}

std::vector<RankedKnob> rank_and_select(std::span<const KnobEvaluation> evaluations,
                                        std::size_t top_n, std::vector<std::string>* warnings) {
  std::vector<RankedKnob> ranked;
  ranked.reserve(evaluations.size());
  for (const auto& e : evaluations) {
    RankedKnob r;
    r.knob_name = e.summary.knob_name;
    r.final_score = final_score(e.assignment, e.verdicts);
    r.verdicts = e.verdicts;
    r.assignment = e.assignment;
    r.lower = e.summary.lower;
    r.upper = e.summary.upper;
    ranked.push_back(std::move(r));
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedKnob& a, const RankedKnob& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.knob_name < b.knob_name;
  });
  if (top_n > ranked.size()) {
    if (warnings != nullptr) {
      warnings->push_back("top_n " + std::to_string(top_n) + " exceeds the " +
                          std::to_string(ranked.size()) + " evaluated knobs; returning all");
    }
  } else {
    ranked.resize(top_n);
  }
  return ranked;
}

SelectionResult run_selection(const ConfigurationSpace& space,
                              const KnowledgeFixtures& fixtures, const LlmGateway& gateway,
                              const TuningContext& ctx, std::size_t top_n) {
  ctx.check();
  SelectionResult result;
  result.objective = assign_weights(ctx, gateway);
  std::vector<KnobEvaluation> evaluations;
  for (const auto& knob : space.knobs()) {
    try {
      const auto entries = ingest(knob, fixtures, &gateway, &result.warnings);
      KnobEvaluation e;
      e.summary = validate(knob, entries, ctx.hardware);
      if (e.summary.conflict_flag) {
        result.warnings.push_back("knob '" + knob.name +
                                  "': source ranges conflict, fell back to one source");
      }
      e.assignment = classify_and_weight(e.summary, ctx, gateway);
      e.verdicts = expert_evaluate(e.summary, e.assignment, ctx, gateway);
      evaluations.push_back(std::move(e));
    } catch (const Error& err) {
      result.skipped.push_back(knob.name);
      result.warnings.push_back("knob '" + knob.name + "' skipped: " + err.what());
    }
  }
  result.ranked = rank_and_select(evaluations, top_n, &result.warnings);
  return result;
}

json selection_report_json(std::span<const RankedKnob> ranked) {
  json out = json::array();
  for (const auto& r : ranked) {
    json weights = json::object();
    for (const auto& [c, w] : r.assignment.weights) weights[std::string(to_string(c))] = w;
    json verdicts = json::array();
    for (const auto& v : r.verdicts) {
      verdicts.push_back(
          {{"category", std::string(to_string(v.category))}, {"score", v.score}, {"reason", v.reason}});
    }
    out.push_back({{"knob", r.knob_name},
                   {"final_score", r.final_score},
                   {"weights", weights},
                   {"verdicts", verdicts},
                   {"range", json::array({r.lower, r.upper})}});
  }
  return out;
}

std::vector<RankedKnob> parse_selection_report(const json& report) {
  if (!report.is_array()) throw ParseError("selection report must be a JSON array");
  std::vector<RankedKnob> out;
  try {
    for (const auto& e : report) {
      RankedKnob r;
      r.knob_name = e.at("knob").get<std::string>();
      r.final_score = e.at("final_score").get<double>();
      r.assignment.knob_name = r.knob_name;
      for (const auto& [name, w] : e.at("weights").items()) {
        const auto c = category_from_string(name);
        if (!c) throw ParseError("unknown category '" + name + "' in report");
        r.assignment.weights[*c] = w.get<double>();
      }
      for (const auto& v : e.at("verdicts")) {
        const auto c = category_from_string(v.at("category").get<std::string>());
        if (!c) throw ParseError("unknown verdict category in report");
        r.verdicts.push_back(ExpertVerdict{r.knob_name, *c, v.at("score").get<int>(),
                                           v.at("reason").get<std::string>()});
      }
      if (e.contains("range")) {
        r.lower = e.at("range").at(0).get<double>();
        r.upper = e.at("range").at(1).get<double>();
      } else {
        r.lower = -std::numeric_limits<double>::infinity();
        r.upper = std::numeric_limits<double>::infinity();
      }
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed selection report: ") + e.what());
  }
  return out;
}

std::vector<RankedKnob> load_selection_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open selection report '" + path.string() + "'");
  try {
    return parse_selection_report(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("selection report '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace decotune
