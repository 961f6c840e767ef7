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

#include "decotune/config_space.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace decotune {

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<double> parse_number(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(KnobKind kind) noexcept {
  switch (kind) {
    case KnobKind::continuous: return "continuous";
    case KnobKind::integer: return "integer";
    case KnobKind::categorical: return "categorical";
  }
  return "continuous";
}

KnobKind knob_kind_from_string(std::string_view text) {
  const std::string t = lower_ascii(text);
  if (t == "continuous" || t == "real" || t == "float") return KnobKind::continuous;
  if (t == "integer" || t == "int") return KnobKind::integer;
  if (t == "categorical" || t == "enum") return KnobKind::categorical;
  throw SpecError("unknown knob kind '" + std::string(text) + "'");
}

Knob Knob::continuous(std::string name, double lower, double upper,
                      double default_value, std::string unit_note) {
  Knob k{std::move(name), KnobKind::continuous, lower, upper, {}, default_value,
         std::move(unit_note)};
  k.check();
  return k;
}

Knob Knob::integer(std::string name, double lower, double upper,
                   double default_value, std::string unit_note) {
  Knob k{std::move(name), KnobKind::integer, lower, upper, {}, default_value,
         std::move(unit_note)};
  k.check();
  return k;
}

Knob Knob::categorical(std::string name, std::vector<std::string> categories,
                       std::string_view default_label, std::string unit_note) {
  Knob k{std::move(name), KnobKind::categorical, 0.0, 0.0, std::move(categories),
         0.0, std::move(unit_note)};
  const auto idx = k.category_index(default_label);
  if (!idx) {
    throw SpecError("knob '" + k.name + "': default '" + std::string(default_label) +
                    "' is not one of its categories");
  }
  k.default_value = static_cast<double>(*idx);
  k.lower = 0.0;
  k.upper = static_cast<double>(k.categories.size()) - 1.0;
  k.check();
  return k;
}

void Knob::check() const {
  if (name.empty()) throw SpecError("knob with empty name");
  if (kind == KnobKind::categorical) {
    if (categories.size() < 2 || categories.size() > 10) {
      throw SpecError("knob '" + name + "': categorical knobs need 2..10 categories");
    }
    std::vector<std::string> sorted = categories;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw SpecError("knob '" + name + "': duplicate category label");
    }
    if (!contains(default_value)) {
      throw SpecError("knob '" + name + "': default is not a category index");
    }
    return;
  }
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw SpecError("knob '" + name + "': bounds must be finite");
  }
  if (!(lower < upper)) {
    throw SpecError("knob '" + name + "': lower must be < upper");
  }
  if (kind == KnobKind::integer &&
      (lower != std::floor(lower) || upper != std::floor(upper))) {
    throw SpecError("knob '" + name + "': integer bounds must be integral");
  }
  if (!contains(default_value)) {
    throw SpecError("knob '" + name + "': default " + format_number(default_value) +
                    " outside [" + format_number(lower) + ", " + format_number(upper) + "]");
  }
}

bool Knob::contains(double value) const noexcept {
  if (!std::isfinite(value)) return false;
  switch (kind) {
    case KnobKind::continuous:
      return value >= lower && value <= upper;
    case KnobKind::integer:
      return value >= lower && value <= upper && value == std::floor(value);
    case KnobKind::categorical:
      return value >= 0.0 && value < static_cast<double>(categories.size()) &&
             value == std::floor(value);
  }
  return false;
}

void Knob::check_value(double value) const {
  if (!contains(value)) {
    throw DomainError(name, "value " + format_number(value) + " outside domain");
  }
}

std::optional<std::size_t> Knob::category_index(std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == label) return i;
  }
  return std::nullopt;
}

void HardwareSpec::check() const {
  if (!(ram_bytes > 0.0) || !(cpu_cores > 0.0) || !(disk_bytes > 0.0)) {
    throw SpecError("hardware fields must be positive");
  }
}

ConfigurationSpace::ConfigurationSpace(std::vector<Knob> knobs)
    : knobs_(std::move(knobs)) {
  if (knobs_.empty()) throw SpecError("configuration space needs at least one knob");
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    knobs_[i].check();
    if (!by_name_.emplace(knobs_[i].name, i).second) {
      throw SpecError("duplicate knob name '" + knobs_[i].name + "'");
    }
  }
}

std::optional<std::size_t> ConfigurationSpace::index_of(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> ConfigurationSpace::names() const {
  std::vector<std::string> out;
  out.reserve(knobs_.size());
  for (const auto& k : knobs_) out.push_back(k.name);
  return out;
}

Configuration ConfigurationSpace::default_configuration() const {
  Configuration c;
  c.values.reserve(knobs_.size());
  for (const auto& k : knobs_) c.values.push_back(k.default_value);
  return c;
}

void ConfigurationSpace::validate(const Configuration& config) const {
  if (config.values.size() != knobs_.size()) {
    throw DimensionMismatch("configuration has " + std::to_string(config.values.size()) +
                            " values, space has " + std::to_string(knobs_.size()) +
                            " knobs");
  }
  for (std::size_t i = 0; i < knobs_.size(); ++i) knobs_[i].check_value(config.values[i]);
}

UnitPoint ConfigurationSpace::encode(const Configuration& config) const {
  validate(config);
  UnitPoint p{Eigen::VectorXd(static_cast<Eigen::Index>(knobs_.size()))};
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    const Knob& k = knobs_[i];
    const double v = config.values[i];
    double u = 0.0;
    if (k.kind == KnobKind::categorical) {
      const double m = static_cast<double>(k.categories.size());
      u = (2.0 * v + 1.0) / (2.0 * m);
    } else {
      u = (v - k.lower) / (k.upper - k.lower);
    }
    p.coords[static_cast<Eigen::Index>(i)] = std::clamp(u, 0.0, 1.0);
  }
  return p;
}

Configuration ConfigurationSpace::decode(const UnitPoint& point) const {
  if (point.size() != knobs_.size()) {
    throw DimensionMismatch("point has " + std::to_string(point.size()) +
                            " coordinates, space has " + std::to_string(knobs_.size()) +
                            " knobs");
  }
  Configuration c;
  c.values.resize(knobs_.size());
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    const Knob& k = knobs_[i];
    double u = point.coords[static_cast<Eigen::Index>(i)];
    if (!(u >= -1e-9 && u <= 1.0 + 1e-9)) {
      throw DomainError(k.name, "unit coordinate " + format_number(u) + " outside [0,1]");
    }
    u = std::clamp(u, 0.0, 1.0);
    switch (k.kind) {
      case KnobKind::continuous:
        c.values[i] = std::clamp(k.lower + u * (k.upper - k.lower), k.lower, k.upper);
        break;
      case KnobKind::integer:
        c.values[i] =
            std::clamp(std::floor(k.lower + u * (k.upper - k.lower) + 0.5), k.lower, k.upper);
        break;
      case KnobKind::categorical: {
        const double m = static_cast<double>(k.categories.size());
        c.values[i] = std::min(std::floor(u * m), m - 1.0);
        break;
      }
    }
  }
  return c;
}

std::string ConfigurationSpace::format_value(std::size_t knob, double value) const {
  const Knob& k = knobs_.at(knob);
  if (k.kind == KnobKind::categorical) {
    return k.categories.at(static_cast<std::size_t>(value));
  }
  return format_number(value);
}

bool is_relative_bound(std::string_view expr) {
  return lower_ascii(expr).find('%') != std::string::npos;
}

double resolve_relative_bound(std::string_view expr, const HardwareSpec& hardware,
                              double unit_bytes) {
  if (const auto literal = parse_number(expr)) return *literal;

  static const std::regex relative(
      R"(^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*%\s*of\s+(.+?)\s*$)",
      std::regex::icase);
  const std::string text(expr);
  std::smatch m;
  if (!std::regex_match(text, m, relative)) {
    throw ParseError("cannot parse bound expression '" + text + "'");
  }
  const double fraction = std::stod(m[1].str()) / 100.0;
  const std::string resource = lower_ascii(m[2].str());
  if (resource == "ram" || resource == "memory" || resource == "total ram") {
    if (!(hardware.ram_bytes > 0.0)) throw ParseError("'" + text + "' needs ram_bytes");
    return fraction * hardware.ram_bytes / unit_bytes;
  }
  if (resource == "cpu cores" || resource == "cpu" || resource == "cores" ||
      resource == "cpu_cores") {
    if (!(hardware.cpu_cores > 0.0)) throw ParseError("'" + text + "' needs cpu_cores");
    return fraction * hardware.cpu_cores;
  }
  if (resource == "disk" || resource == "disk space" || resource == "storage") {
    if (!(hardware.disk_bytes > 0.0)) throw ParseError("'" + text + "' needs disk_bytes");
    return fraction * hardware.disk_bytes / unit_bytes;
  }
  throw ParseError("unknown resource '" + m[2].str() + "' in bound '" + text + "'");
}

double unit_bytes_from_note(std::string_view unit_note) {
  static const std::regex sized(R"(^\s*([0-9]*\.?[0-9]+)?\s*(bytes?|b|kb|mb|gb|tb)\b)",
                                std::regex::icase);
  const std::string text = lower_ascii(unit_note);
  std::smatch m;
  if (!std::regex_search(text, m, sized)) return 1.0;
  const double count = m[1].matched ? std::stod(m[1].str()) : 1.0;
  const std::string unit = m[2].str();
  double scale = 1.0;
  if (unit == "kb") scale = 1024.0;
  else if (unit == "mb") scale = 1024.0 * 1024.0;
  else if (unit == "gb") scale = 1024.0 * 1024.0 * 1024.0;
  else if (unit == "tb") scale = 1024.0 * 1024.0 * 1024.0 * 1024.0;
  return count * scale;
}

namespace {

using nlohmann::json;

double bound_from_json(const json& v, const std::string& knob,
                       const std::optional<HardwareSpec>& hardware, double unit_bytes) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto text = v.get<std::string>();
    if (is_relative_bound(text)) {
      if (!hardware) {
        throw SpecError("knob '" + knob + "': relative bound '" + text +
                        "' needs a hardware block");
      }
      return resolve_relative_bound(text, *hardware, unit_bytes);
    }
    return resolve_relative_bound(text, HardwareSpec{}, unit_bytes);
  }
  throw SpecError("knob '" + knob + "': bound must be a number or string");
}

HardwareSpec hardware_from_json(const json& j) {
  HardwareSpec h;
  h.ram_bytes = j.at("ram_bytes").get<double>();
  h.cpu_cores = j.at("cpu_cores").get<double>();
  h.disk_bytes = j.at("disk_bytes").get<double>();
  h.check();
  return h;
}

Knob knob_from_json(const json& j, const std::optional<HardwareSpec>& hardware) {
  const auto name = j.at("name").get<std::string>();
  const KnobKind kind = knob_kind_from_string(j.at("kind").get<std::string>());
  const std::string unit_note = j.value("unit_note", std::string{});
  if (kind == KnobKind::categorical) {
    auto cats = j.at("categories").get<std::vector<std::string>>();
    const json& def = j.at("default");
    std::string label;
    if (def.is_string()) {
      label = def.get<std::string>();
    } else if (def.is_number_integer() && def.get<long>() >= 0 &&
               static_cast<std::size_t>(def.get<long>()) < cats.size()) {
      label = cats[static_cast<std::size_t>(def.get<long>())];
    } else {
      throw SpecError("knob '" + name + "': categorical default must be a label");
    }
    return Knob::categorical(name, std::move(cats), label, unit_note);
  }
  const double unit_bytes = unit_bytes_from_note(unit_note);
  const double lower = bound_from_json(j.at("lower"), name, hardware, unit_bytes);
  const double upper = bound_from_json(j.at("upper"), name, hardware, unit_bytes);
  const double def = bound_from_json(j.at("default"), name, hardware, unit_bytes);
  return kind == KnobKind::integer ? Knob::integer(name, lower, upper, def, unit_note)
                                   : Knob::continuous(name, lower, upper, def, unit_note);
}

}  // namespace

KnobSpecFile parse_knob_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("knob spec is not valid JSON: ") + e.what());
  }
  std::optional<HardwareSpec> hardware;
  std::vector<const json*> entries;
  if (doc.is_object()) {
    if (doc.contains("hardware")) hardware = hardware_from_json(doc.at("hardware"));
    for (const auto& k : doc.at("knobs")) entries.push_back(&k);
  } else if (doc.is_array()) {
    for (const auto& k : doc) {
      if (k.is_object() && k.contains("hardware") && !k.contains("name")) {
        hardware = hardware_from_json(k.at("hardware"));
      } else {
        entries.push_back(&k);
      }
    }
  } else {
    throw SpecError("knob spec must be an array or an object with a 'knobs' array");
  }
  std::vector<Knob> knobs;
  knobs.reserve(entries.size());
  try {
    for (const json* k : entries) knobs.push_back(knob_from_json(*k, hardware));
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed knob entry: ") + e.what());
  }
  return KnobSpecFile{ConfigurationSpace(std::move(knobs)), hardware};
}

KnobSpecFile load_knob_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open knob spec '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_knob_spec(buf.str());
}

Subspace::Subspace(ConfigurationSpace parent, ConfigurationSpace space,
                   std::vector<std::size_t> index, Configuration base)
    : parent_(std::move(parent)),
      space_(std::move(space)),
      parent_index_(std::move(index)),
      base_(std::move(base)) {}

namespace {

struct Built {
  std::vector<Knob> knobs;
  std::vector<std::size_t> index;
  Configuration base;
};

Built build_subspace(const ConfigurationSpace& parent,
                     const std::vector<Subspace::Narrowing>& selected) {
  Built b;
  b.base = parent.default_configuration();
  std::vector<bool> seen(parent.dimension(), false);
  for (const auto& sel : selected) {
    const auto idx = parent.index_of(sel.name);
    if (!idx) throw SpecError("selected knob '" + sel.name + "' is not in the space");
    if (seen[*idx]) throw SpecError("knob '" + sel.name + "' selected twice");
    seen[*idx] = true;
    Knob k = parent.knob(*idx);
    if (k.numeric()) {
      double lo = std::max(k.lower, sel.lower.value_or(k.lower));
      double hi = std::min(k.upper, sel.upper.value_or(k.upper));
      if (k.kind == KnobKind::integer) {
        lo = std::ceil(lo);
        hi = std::floor(hi);
      }
      if (!(lo < hi)) {
        // Collapsed range: hold the knob at the single admissible value.
        double fixed = lo <= hi ? lo : std::clamp(0.5 * (lo + hi), k.lower, k.upper);
        if (k.kind == KnobKind::integer) fixed = std::clamp(std::round(fixed), k.lower, k.upper);
        b.base.values[*idx] = fixed;
        continue;
      }
      k.lower = lo;
      k.upper = hi;
      k.default_value = std::clamp(k.default_value, lo, hi);
    }
    b.knobs.push_back(std::move(k));
    b.index.push_back(*idx);
  }
  if (b.knobs.empty()) throw SpecError("subspace has no tunable knobs");
  return b;
}

}  // namespace

Subspace::Subspace(ConfigurationSpace parent, const std::vector<Narrowing>& selected)
    : Subspace([&] {
        Built b = build_subspace(parent, selected);
        ConfigurationSpace sub(std::move(b.knobs));
        return Subspace(std::move(parent), std::move(sub), std::move(b.index),
                        std::move(b.base));
      }()) {}

Subspace Subspace::whole(ConfigurationSpace parent) {
  std::vector<Narrowing> all;
  for (const auto& k : parent.knobs()) all.push_back({k.name, std::nullopt, std::nullopt});
  return Subspace(std::move(parent), all);
}

Configuration Subspace::lift(const Configuration& config) const {
  space_.validate(config);
  Configuration full = base_;
  for (std::size_t i = 0; i < parent_index_.size(); ++i) {
    full.values[parent_index_[i]] = config.values[i];
  }
  return full;
}

Configuration Subspace::project(const Configuration& parent_config) const {
  if (parent_config.values.size() != parent_.dimension()) {
    throw DimensionMismatch("parent configuration has wrong dimension");
  }
  Configuration c;
  c.values.reserve(parent_index_.size());
  for (std::size_t i = 0; i < parent_index_.size(); ++i) {
    const Knob& k = space_.knob(i);
    double v = parent_config.values[parent_index_[i]];
    if (k.numeric()) v = std::clamp(v, k.lower, k.upper);
    c.values.push_back(v);
  }
  return c;
}

}  // namespace decotune
