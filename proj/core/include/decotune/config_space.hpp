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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "decotune/error.hpp"

namespace decotune {

enum class KnobKind { continuous, integer, categorical };

std::string_view to_string(KnobKind kind) noexcept;
KnobKind knob_kind_from_string(std::string_view text);

/// A tunable parameter and its box domain.
///
/// Values are carried as doubles throughout: numeric knobs hold their
/// knob-native value, categorical knobs hold the category index. Use
/// `format_value` / `parse_value` to cross the label boundary.
struct Knob {
  std::string name;
  KnobKind kind = KnobKind::continuous;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> categories;
  double default_value = 0.0;
  std::string unit_note;

  static Knob continuous(std::string name, double lower, double upper,
                         double default_value, std::string unit_note = {});
  static Knob integer(std::string name, double lower, double upper,
                      double default_value, std::string unit_note = {});
  static Knob categorical(std::string name, std::vector<std::string> categories,
                          std::string_view default_label,
                          std::string unit_note = {});

  /// Throws SpecError when an invariant is broken.
  void check() const;

  bool numeric() const noexcept { return kind != KnobKind::categorical; }
  std::size_t category_count() const noexcept { return categories.size(); }

  /// Throws DomainError naming the knob for out-of-domain values.
  void check_value(double value) const;
  bool contains(double value) const noexcept;

  std::optional<std::size_t> category_index(std::string_view label) const;
};

struct Configuration {
  std::vector<double> values;

  bool operator==(const Configuration&) const = default;
};

/// Point of the unit hypercube the numeric algorithms operate on.
struct UnitPoint {
  Eigen::VectorXd coords;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(coords.size());
  }
};

struct HardwareSpec {
  double ram_bytes = 0.0;
  double cpu_cores = 0.0;
  double disk_bytes = 0.0;

  void check() const;
};

class ConfigurationSpace {
 public:
  explicit ConfigurationSpace(std::vector<Knob> knobs);

  std::size_t dimension() const noexcept { return knobs_.size(); }
  const std::vector<Knob>& knobs() const noexcept { return knobs_; }
  const Knob& knob(std::size_t i) const { return knobs_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  Configuration default_configuration() const;

  /// Throws DimensionMismatch or DomainError.
  void validate(const Configuration& config) const;

  UnitPoint encode(const Configuration& config) const;
  Configuration decode(const UnitPoint& point) const;

  /// Knob-native value as JSON-friendly text: numbers for numeric knobs,
  /// labels for categorical ones.
  std::string format_value(std::size_t knob, double value) const;

 private:
  std::vector<Knob> knobs_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

/// Evaluates a bound expression: a literal number ("4", "inf") or
/// "P% of RAM" / "P% of CPU cores" / "P% of disk". Memory and disk
/// percentages are converted to knob units with `unit_bytes` bytes per unit.
double resolve_relative_bound(std::string_view expr, const HardwareSpec& hardware,
                              double unit_bytes = 1.0);

/// Bytes per knob unit implied by a unit note such as "8KB blocks" or "MB".
/// Returns 1 when the note names no byte size.
double unit_bytes_from_note(std::string_view unit_note);

/// True when the expression names a hardware resource.
bool is_relative_bound(std::string_view expr);

struct KnobSpecFile {
  ConfigurationSpace space;
  std::optional<HardwareSpec> hardware;
};

KnobSpecFile load_knob_spec(const std::filesystem::path& path);
KnobSpecFile parse_knob_spec(std::string_view json_text);

/// A narrowed subset of a parent space. Knobs outside the subset, and knobs
/// whose narrowed range collapses to one value, stay fixed when a subspace
/// configuration is lifted into the parent space.
class Subspace {
 public:
  struct Narrowing {
    std::string name;
    std::optional<double> lower;
    std::optional<double> upper;
  };

  Subspace(ConfigurationSpace parent, const std::vector<Narrowing>& selected);

  /// Every parent knob, unnarrowed.
  static Subspace whole(ConfigurationSpace parent);

  const ConfigurationSpace& space() const noexcept { return space_; }
  const ConfigurationSpace& parent() const noexcept { return parent_; }
  const std::vector<std::size_t>& parent_indices() const noexcept {
    return parent_index_;
  }

  Configuration lift(const Configuration& config) const;
  /// Picks the subspace coordinates out of a parent configuration, clamping
  /// into the narrowed domains.
  Configuration project(const Configuration& parent_config) const;

 private:
  Subspace(ConfigurationSpace parent, ConfigurationSpace space,
           std::vector<std::size_t> index, Configuration base);

  ConfigurationSpace parent_;
  ConfigurationSpace space_;
  std::vector<std::size_t> parent_index_;
  Configuration base_;
};

}  // namespace decotune
