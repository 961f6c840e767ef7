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

#include "decotune/knowledge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decotune/llm_gateway.hpp"

namespace decotune {

using nlohmann::json;

std::string_view to_string(Source source) noexcept {
  switch (source) {
    case Source::manual: return "manual";
    case Source::web: return "web";
    case Source::llm: return "llm";
  }
  return "manual";
}

std::optional<Source> source_from_string(std::string_view text) {
  if (text == "manual") return Source::manual;
  if (text == "web") return Source::web;
  if (text == "llm") return Source::llm;
  return std::nullopt;
}

void SourceEntry::check() const {
  if (description.empty()) {
    throw Error(std::string(to_string(source)) + " entry has an empty description");
  }
  if (lower && upper && !is_relative_bound(*lower) && !is_relative_bound(*upper)) {
    const double lo = resolve_relative_bound(*lower, HardwareSpec{});
    const double hi = resolve_relative_bound(*upper, HardwareSpec{});
    if (lo > hi) {
      throw Error(std::string(to_string(source)) + " entry has lower > upper");
    }
  }
}

std::string KnowledgeSummary::descriptions_by_priority() const {
  std::string out;
  const std::array<std::pair<const char*, const std::string*>, 3> parts{
      {{"manual", &d_manual}, {"web", &d_web}, {"llm", &d_llm}}};
  for (const auto& [label, text] : parts) {
    if (text->empty()) continue;
    if (!out.empty()) out += '\n';
    out += std::string("[") + label + "] " + *text;
  }
  return out;
}

namespace {

std::optional<std::string> bound_text(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const json& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  throw ParseError(std::string("bound '") + key + "' must be a number or string");
}

SourceEntry entry_from_json(Source source, const json& j) {
  SourceEntry e;
  e.source = source;
  e.description = j.value("description", j.value("D", std::string{}));
  e.lower = bound_text(j, j.contains("lower") ? "lower" : "L");
  e.upper = bound_text(j, j.contains("upper") ? "upper" : "U");
  e.check();
  return e;
}

}  // namespace

KnowledgeFixtures KnowledgeFixtures::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("knowledge fixtures are not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("knowledge fixtures must be a JSON object");
  KnowledgeFixtures f;
  for (const auto& [knob, sources] : doc.items()) {
    for (const auto& [name, body] : sources.items()) {
      const auto source = source_from_string(name);
      if (!source) throw ParseError("knob '" + knob + "': unknown source '" + name + "'");
      f.add(knob, entry_from_json(*source, body));
    }
  }
  return f;
}

KnowledgeFixtures KnowledgeFixtures::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open knowledge fixtures '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::vector<SourceEntry>* KnowledgeFixtures::find(std::string_view knob) const {
  const auto it = by_knob_.find(knob);
  return it == by_knob_.end() ? nullptr : &it->second;
}

void KnowledgeFixtures::add(const std::string& knob, SourceEntry entry) {
  auto& list = by_knob_[knob];
  for (const auto& e : list) {
    if (e.source == entry.source) {
      throw ParseError("knob '" + knob + "': duplicate " + std::string(to_string(e.source)) +
                       " source");
    }
  }
  list.push_back(std::move(entry));
  std::sort(list.begin(), list.end(),
            [](const SourceEntry& a, const SourceEntry& b) { return a.source < b.source; });
}

PromptRequest knowledge_prompt(const Knob& knob) {
  PromptRequest r;
  r.role_preamble =
      "You are a database tuning assistant. Answer in draft style: keep only the key facts, "
      "a few words per point. Reply with a single JSON object.";
  std::ostringstream body;
  body << "Knob: " << knob.name << "\n"
       << "Kind: " << to_string(knob.kind) << "\n";
  if (knob.numeric()) {
    body << "Native range: [" << knob.lower << ", " << knob.upper << "]";
    if (!knob.unit_note.empty()) body << " (" << knob.unit_note << ")";
    body << "\n";
  }
  body << "Describe what the knob controls and how it should be tuned, and recommend a "
          "value range. Bounds may be numbers or hardware-relative expressions such as "
          "\"50% of RAM\".\n"
       << "Format: {\"D\": \"<description>\", \"L\": \"<lower>\", \"U\": \"<upper>\"}";
  r.body = body.str();
  r.response_schema = "knob_knowledge";
  return r;
}

std::vector<SourceEntry> ingest(const Knob& knob, const KnowledgeFixtures& fixtures,
                                const LlmGateway* gateway,
                                std::vector<std::string>* warnings) {
  std::vector<SourceEntry> out;
  if (const auto* entries = fixtures.find(knob.name)) out = *entries;
  const bool has_llm = std::any_of(out.begin(), out.end(), [](const SourceEntry& e) {
    return e.source == Source::llm;
  });
  if (!has_llm && gateway != nullptr) {
    try {
      const Completion c = gateway->complete(knowledge_prompt(knob));
      out.push_back(entry_from_json(Source::llm, c.value));
    } catch (const Error& e) {
      if (warnings != nullptr) {
        warnings->push_back("knob '" + knob.name + "': no LLM knowledge (" + e.what() + ")");
      }
    }
  }
  if (out.empty()) throw EmptyKnowledge("knob '" + knob.name + "': no knowledge source available");
  return out;
}

KnowledgeSummary validate(const Knob& knob, std::span<const SourceEntry> entries,
                          const HardwareSpec& hardware) {
  if (entries.empty()) throw EmptyKnowledge("knob '" + knob.name + "': no entries to validate");
  KnowledgeSummary s;
  s.knob_name = knob.name;

  std::array<const SourceEntry*, 3> by_source{nullptr, nullptr, nullptr};
  for (const auto& e : entries) {
    auto& slot = by_source[static_cast<std::size_t>(e.source)];
    if (slot != nullptr) {
      throw Error("knob '" + knob.name + "': duplicate " + std::string(to_string(e.source)) +
                  " entry");
    }
    slot = &e;
  }
  if (by_source[0]) s.d_manual = by_source[0]->description;
  if (by_source[1]) s.d_web = by_source[1]->description;
  if (by_source[2]) s.d_llm = by_source[2]->description;

  if (!knob.numeric()) {
    s.lower = 0.0;
    s.upper = static_cast<double>(knob.category_count()) - 1.0;
    return s;
  }

  const double unit_bytes = unit_bytes_from_note(knob.unit_note);
  auto resolve = [&](const std::optional<std::string>& expr, double fallback) {
    return expr ? resolve_relative_bound(*expr, hardware, unit_bytes) : fallback;
  };

  struct Range {
    double lo;
    double hi;
  };
  std::array<std::optional<Range>, 3> ranges;
  double lo = knob.lower;
  double hi = knob.upper;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!by_source[i]) continue;
    const Range r{resolve(by_source[i]->lower, knob.lower), resolve(by_source[i]->upper, knob.upper)};
    ranges[i] = r;
    lo = std::max(lo, r.lo);
    hi = std::min(hi, r.hi);
  }
  lo = std::max(lo, knob.lower);
  hi = std::min(hi, knob.upper);

  if (lo <= hi) {
    s.lower = lo;
    s.upper = hi;
    return s;
  }

  s.conflict_flag = true;
  s.lower = knob.lower;
  s.upper = knob.upper;
  for (const auto& r : ranges) {
    if (!r) continue;
    const double clo = std::max(r->lo, knob.lower);
    const double chi = std::min(r->hi, knob.upper);
    if (clo <= chi) {
      s.lower = clo;
      s.upper = chi;
      break;
    }
  }
  return s;
}

}  // namespace decotune
