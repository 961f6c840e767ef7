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
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "decotune/config_space.hpp"
#include "decotune/evaluators.hpp"
#include "decotune/objective.hpp"
#include "decotune/partition.hpp"
#include "decotune/surrogate.hpp"

namespace decotune {

struct TunerParams {
  std::size_t budget = 100;
  std::size_t cold_start = 10;
  std::uint64_t seed = 0;
  double c_p = 0.1;
  /// 0 disables decomposition: plain GP-BO over the cube.
  std::size_t max_depth = 8;
  std::size_t warm_start_k = 10;
  DecomposeParams decompose;
  GpOptions gp;
  ProposeOptions propose;

  void check() const;
};

/// Independent per-iteration random streams. Disabling decomposition leaves
/// the GP and proposal streams untouched, so plain BO is a strict reduction.
enum class SeedStream : std::uint64_t {
  lhs = 0x4c4853,
  tree = 0x54524545,
  gp = 0x4750,
  propose = 0x50524f50,
};

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t iter);

struct TreeNode {
  Region region;
  std::vector<std::size_t> sample_indices;
  double value_sum = 0.0;
  std::optional<SplitResult> split;
  std::unique_ptr<TreeNode> high;
  std::unique_ptr<TreeNode> low;

  std::size_t visits() const noexcept { return sample_indices.size(); }
};

struct Descent {
  std::unique_ptr<TreeNode> root;
  /// Root first, selected leaf last.
  std::vector<const TreeNode*> path;
  std::optional<UnsplittableReason> stop_reason;
  bool depth_capped = false;
  /// The leaf held enough samples to split but the decomposition refused.
  bool premature_unsplittable = false;

  const TreeNode& leaf() const { return *path.back(); }
};

/// v / n_child + 2 c_p sqrt(2 ln(n_parent) / n_child).
double ucb(double value_sum, std::size_t child_visits, std::size_t parent_visits, double c_p);

/// n points, each dimension stratified into n equal cells with one point
/// per cell and an independent permutation per dimension.
std::vector<UnitPoint> latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t seed);

/// Rebuilds the tree from the root over `dataset` and follows the UCB-best
/// child (ties to the high child) until a node cannot be split.
Descent descend(std::span<const Sample> dataset, const TunerParams& params, std::uint64_t seed);

struct Observation {
  std::size_t iter = 0;
  /// In the tuned subspace.
  Configuration config;
  UnitPoint point;
  PerformanceReading reading;
  double p = 0.0;
  std::vector<RegionConstraint> region_path;
  double best_p = 0.0;
  /// Worst-case stand-in for a failed evaluation.
  bool flagged = false;
};

class SessionLog;

class TuningSession {
 public:
  TuningSession(Subspace space, ObjectiveWeights weights, Baseline baseline, TunerParams params);

  const Subspace& space() const noexcept { return space_; }
  const ObjectiveWeights& weights() const noexcept { return weights_; }
  const Baseline& baseline() const noexcept { return baseline_; }
  const TunerParams& params() const noexcept { return params_; }
  TunerParams& params() noexcept { return params_; }

  const std::vector<Observation>& dataset() const noexcept { return dataset_; }
  std::vector<Sample> samples() const;
  bool empty() const noexcept { return dataset_.empty(); }

  /// First observation attaining the maximum p.
  const Observation& best() const;
  double best_p() const { return best().p; }
  Configuration best_configuration() const { return space_.lift(best().config); }

  /// Scores the reading, numbers the row and writes it to the log if one is
  /// attached.
  const Observation& record(Configuration config, PerformanceReading reading,
                            std::vector<RegionConstraint> region_path, bool flagged);

  void attach_log(SessionLog* log) noexcept { log_ = log; }

  /// Rebuilds a session from its log; p and best_p come from the rows.
  static TuningSession from_log(const std::filesystem::path& log, Subspace space,
                                ObjectiveWeights weights, Baseline baseline, TunerParams params);

 private:
  Subspace space_;
  ObjectiveWeights weights_;
  Baseline baseline_;
  TunerParams params_;
  std::vector<Observation> dataset_;
  std::size_t best_ = 0;
  SessionLog* log_ = nullptr;
};

/// JSONL writer, one flushed line per observation.
class SessionLog {
 public:
  SessionLog(const std::filesystem::path& path, bool append);

  void write(const TuningSession& session, const Observation& o);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

nlohmann::json observation_json(const TuningSession& session, const Observation& o);

struct LoggedRow {
  std::size_t iter = 0;
  nlohmann::json configuration;
  PerformanceReading reading;
  double p = 0.0;
  double best_p = 0.0;
  std::vector<RegionConstraint> region_path;
  bool flagged = false;
};

/// Throws ParseError naming the line of a malformed row.
std::vector<LoggedRow> read_session_log(const std::filesystem::path& path);

/// {best_config, best_p, best_iter, iterations, best_p_curve}
nlohmann::json session_summary(const TuningSession& session);
/// "iteration,best_p" rows.
std::string best_p_csv(std::span<const double> curve);

struct IterationTrace {
  std::size_t iter = 0;
  const Descent* descent = nullptr;
  /// Region the proposal was drawn from, after any fall back.
  Region target;
  std::size_t fallback_levels = 0;
  Proposal proposal;
  bool proposal_in_region = true;
  double algorithm_seconds = 0.0;
  double evaluation_seconds = 0.0;
};

using IterationObserver = std::function<void(const IterationTrace&)>;

/// Evaluates once, retries once on EvaluationError, then stands in a
/// flagged worst-case reading. EvaluatorFatal propagates.
PerformanceReading evaluate_with_retry(Evaluator& evaluator, const Configuration& lifted,
                                       double worst_latency, bool& flagged);

/// LHS initial design of params.cold_start points. Points already present
/// (a resumed session) are not evaluated again.
void cold_start(TuningSession& session, Evaluator& evaluator);

/// Re-evaluates the top-k configurations of a prior session as the initial
/// dataset. Sessions must share the parent knob space.
void warm_start(TuningSession& session, const TuningSession& prior, std::size_t k,
                Evaluator& evaluator);

/// Runs iterations until the budget is used.
void tune(TuningSession& session, Evaluator& evaluator, const IterationObserver& observer = {});

}  // namespace decotune
