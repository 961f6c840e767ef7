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
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "decotune/error.hpp"
#include "decotune/partition.hpp"

namespace decotune {

enum class KernelType { matern52, rbf };

std::string_view to_string(KernelType kernel) noexcept;
KernelType kernel_type_from_string(std::string_view text);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Regression model over the unit cube. Implementations other than the GP
/// plug in here.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual void fit(std::span<const Sample> samples) = 0;
  virtual Posterior predict(const Eigen::VectorXd& x) const = 0;
  virtual bool fitted() const noexcept = 0;
};

class FactorizationError : public Error {
 public:
  using Error::Error;
};

struct GpOptions {
  KernelType kernel = KernelType::matern52;
  /// Marginal-likelihood restarts; the first starts from fixed defaults.
  std::size_t restarts = 3;
  std::size_t steps = 150;
  double learning_rate = 0.1;
  /// Keeps the noise variance fixed at this value instead of fitting it.
  std::optional<double> fixed_noise;
  /// Skip hyperparameter fitting and use the values set beforehand.
  bool optimize = true;
  double jitter_cap = 1e-4;
  std::uint64_t seed = 0;
};

struct GpHyperparameters {
  Eigen::VectorXd length_scales;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
};

class GaussianProcess final : public Surrogate {
 public:
  explicit GaussianProcess(GpOptions options = {});

  void fit(std::span<const Sample> samples) override;
  Posterior predict(const Eigen::VectorXd& x) const override;
  bool fitted() const noexcept override { return fitted_; }

  /// Used as the starting point (or final values with optimize = false).
  void set_hyperparameters(GpHyperparameters hp) { preset_ = std::move(hp); }
  const GpHyperparameters& hyperparameters() const noexcept { return hp_; }
  double log_marginal_likelihood() const noexcept { return lml_; }
  double jitter() const noexcept { return jitter_; }
  const GpOptions& options() const noexcept { return options_; }

 private:
  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  GpOptions options_;
  std::optional<GpHyperparameters> preset_;
  GpHyperparameters hp_;
  Eigen::MatrixXd x_;
  double y_mean_ = 0.0;
  Eigen::MatrixXd chol_l_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
  double jitter_ = 0.0;
  bool fitted_ = false;
};

/// Closed-form EI for maximization. Zero when the posterior is degenerate
/// and its mean does not beat the incumbent.
double expected_improvement(const Posterior& posterior, double incumbent);

/// Intersection of half-spaces along a root-to-leaf path; empty means the
/// whole cube.
struct Region {
  std::vector<RegionConstraint> constraints;

  Region child(const RegionConstraint& c) const;
};

bool member(const Region& region, const Eigen::VectorXd& point);

class RegionExhausted : public Error {
 public:
  using Error::Error;
};

struct ProposeOptions {
  std::size_t pool_size = 512;
  std::size_t attempt_factor = 100;
  double fallback_sigma = 0.1;
  /// Keep the scored pool in the result.
  bool record_pool = false;
  /// Maps a raw draw onto a representable configuration (integer and
  /// categorical lattice) before the membership test.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> snap;
};

struct Proposal {
  UnitPoint point;
  double ei = 0.0;
  std::size_t pool_index = 0;
  bool used_fallback = false;
  std::vector<Eigen::VectorXd> pool;
  std::vector<double> pool_ei;
};

/// Draws an in-region candidate pool (uniform rejection sampling, then
/// Gaussian perturbations around the best in-region training sample) and
/// returns its EI argmax; the incumbent is the best p over `training`.
Proposal propose(const Surrogate& model, const Region& region,
                 std::span<const Sample> training, std::uint64_t seed,
                 const ProposeOptions& options = {});

}  // namespace decotune
