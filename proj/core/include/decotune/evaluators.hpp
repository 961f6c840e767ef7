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
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "decotune/config_space.hpp"
#include "decotune/error.hpp"
#include "decotune/objective.hpp"

namespace decotune {

/// A single evaluation failed; the caller may retry.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The evaluator cannot continue at all (missing executable, broken trace).
class EvaluatorFatal : public Error {
 public:
  using Error::Error;
};

class ReplayMiss : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Stands between the tuner and the workload. Configurations are expressed
/// in the evaluator's own space.
class Evaluator {
 public:
  explicit Evaluator(ConfigurationSpace space) : space_(std::move(space)) {}
  virtual ~Evaluator() = default;

  const ConfigurationSpace& space() const noexcept { return space_; }
  virtual std::string kind() const = 0;
  virtual PerformanceReading evaluate(const Configuration& config) = 0;

  /// Reading of the default configuration, measured once.
  const Baseline& baseline();
  const PerformanceReading& default_reading();

 private:
  ConfigurationSpace space_;
  std::optional<PerformanceReading> default_reading_;
  std::optional<Baseline> baseline_;
};

enum class SyntheticSurface { two_basin, needle, additive_noise };

std::string_view to_string(SyntheticSurface surface) noexcept;
SyntheticSurface synthetic_surface_from_string(std::string_view text);

struct SyntheticOptions {
  SyntheticSurface surface = SyntheticSurface::two_basin;
  std::size_t dims = 20;
  std::uint64_t seed = 0;
  /// Shifts the surface's optima by -drift per coordinate, |drift| <= 0.15.
  double drift = 0.0;
  /// Noise standard deviation as a fraction of the quality range.
  double noise_fraction = 0.02;
};

/// Closed-form surfaces over a mixed-kind knob space. Only a few continuous
/// coordinates matter; the rest are distractors.
class SyntheticEvaluator final : public Evaluator {
 public:
  explicit SyntheticEvaluator(SyntheticOptions options);

  std::string kind() const override { return "synthetic"; }
  PerformanceReading evaluate(const Configuration& config) override;

  /// Noise-free quality in [0, 1] at an encoded point of the full space.
  double quality(const Eigen::VectorXd& unit) const;
  static PerformanceReading reading_from_quality(double q);

  /// Knob indices the surface depends on.
  const std::vector<std::size_t>& effective_knobs() const noexcept { return effective_; }
  /// Encoded coordinates, over the effective knobs, of the global optimum.
  std::vector<double> optimum_coordinates() const;
  double optimum_quality() const;
  const SyntheticOptions& options() const noexcept { return options_; }

  static ConfigurationSpace make_space(std::size_t dims);

 private:
  SyntheticOptions options_;
  std::vector<std::size_t> effective_;
  std::atomic<std::uint64_t> counter_{0};
};

/// Looks readings up in a session log. Configurations match when every
/// value agrees within 1e-9.
class ReplayEvaluator final : public Evaluator {
 public:
  ReplayEvaluator(ConfigurationSpace space, const std::filesystem::path& trace);
  ReplayEvaluator(ConfigurationSpace space,
                  std::vector<std::pair<Configuration, PerformanceReading>> rows);

  std::string kind() const override { return "replay"; }
  PerformanceReading evaluate(const Configuration& config) override;

  std::size_t lookups() const noexcept { return lookups_; }
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::pair<Configuration, PerformanceReading>> rows_;
  std::size_t lookups_ = 0;
};

/// Runs an external program per evaluation: {"knobs": {...}} on stdin,
/// {"tps": x, "lat": y} expected on stdout.
class CommandEvaluator final : public Evaluator {
 public:
  CommandEvaluator(ConfigurationSpace space, std::vector<std::string> argv,
                   std::chrono::milliseconds timeout);

  std::string kind() const override { return "command"; }
  PerformanceReading evaluate(const Configuration& config) override;

  nlohmann::json request_json(const Configuration& config) const;
  static PerformanceReading parse_reply(std::string_view text);

 private:
  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
};

/// Configuration as {name: value}, labels for categorical knobs.
nlohmann::json configuration_json(const ConfigurationSpace& space, const Configuration& config);
Configuration configuration_from_json(const ConfigurationSpace& space, const nlohmann::json& j);

/// Builds an evaluator from "synthetic:two_basin,dims=20,seed=3,drift=0.1",
/// "replay:<session.jsonl>" or "command:<program>[,timeout=30]". Replay and
/// command need the knob space.
std::unique_ptr<Evaluator> make_evaluator(std::string_view spec,
                                          const std::optional<ConfigurationSpace>& space);

}  // namespace decotune
