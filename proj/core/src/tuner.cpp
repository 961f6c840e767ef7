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

#include "decotune/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "decotune/rng.hpp"

namespace decotune {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

double worst_latency(const TuningSession& session) {
  double worst = session.baseline().lat_default;
  for (const auto& o : session.dataset()) {
    if (!o.flagged) worst = std::max(worst, o.reading.latency);
  }
  return worst;
}

void evaluate_and_record(TuningSession& session, Evaluator& evaluator, const Configuration& config,
                         std::vector<RegionConstraint> path) {
  bool flagged = false;
  const PerformanceReading r = evaluate_with_retry(evaluator, session.space().lift(config),
                                                   worst_latency(session), flagged);
  session.record(config, r, std::move(path), flagged);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t iter) {
  return Rng::mix(Rng::mix(seed, static_cast<std::uint64_t>(stream)), iter);
}

void TunerParams::check() const {
  if (cold_start < 2) throw Error("cold start needs at least 2 samples");
  if (budget <= cold_start) throw Error("budget must exceed the cold start size");
  if (!(c_p >= 0.0)) throw Error("c_p must be >= 0");
  if (propose.pool_size == 0) throw Error("pool size must be positive");
  if (warm_start_k == 0) throw Error("warm start k must be positive");
  if (decompose.tau < 2) throw Error("tau must be at least 2");
  if (!(decompose.gamma > 0.0)) throw Error("gamma must be positive");
  if (!(decompose.c_reg > 0.0)) throw Error("c_reg must be positive");
  if (decompose.k_components == 0 || decompose.k_components > 5) {
    throw Error("k_components must lie in [1, 5]");
  }
  if (decompose.sigma && !(*decompose.sigma > 0.0)) throw Error("sigma must be positive");
}

double ucb(double value_sum, std::size_t child_visits, std::size_t parent_visits, double c_p) {
  if (child_visits == 0) throw Error("UCB of an unvisited child");
  if (parent_visits < child_visits) throw Error("UCB parent visits below child visits");
  const double n = static_cast<double>(child_visits);
  return value_sum / n + 2.0 * c_p * std::sqrt(2.0 * std::log(static_cast<double>(parent_visits)) / n);
}

std::vector<UnitPoint> latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t seed) {
  if (n == 0) throw Error("LHS needs at least one point");
  Rng rng(seed);
  std::vector<UnitPoint> points(n);
  for (auto& p : points) p.coords.resize(static_cast<Eigen::Index>(dims));
  std::vector<std::size_t> cells(n);
  for (std::size_t d = 0; d < dims; ++d) {
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells);
    for (std::size_t i = 0; i < n; ++i) {
      points[i].coords[static_cast<Eigen::Index>(d)] =
          (static_cast<double>(cells[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }
  return points;
}

Descent descend(std::span<const Sample> dataset, const TunerParams& params, std::uint64_t seed) {
  if (dataset.empty()) throw Error("descend needs a non-empty dataset");
  Descent out;
  out.root = std::make_unique<TreeNode>();
  out.root->sample_indices.resize(dataset.size());
  std::iota(out.root->sample_indices.begin(), out.root->sample_indices.end(), 0);
  for (const auto& s : dataset) out.root->value_sum += s.performance;

  TreeNode* node = out.root.get();
  out.path.push_back(node);
  for (std::size_t depth = 0;; ++depth) {
    if (depth >= params.max_depth) {
      out.depth_capped = true;
      break;
    }
    std::vector<Sample> subset;
    subset.reserve(node->sample_indices.size());
    for (const std::size_t i : node->sample_indices) subset.push_back(dataset[i]);
    DecomposeParams dp = params.decompose;
    dp.seed = Rng::mix(seed, depth);
    SplitResult split;
    try {
      split = decompose(subset, dp);
    } catch (const Unsplittable& u) {
      out.stop_reason = u.reason();
      out.premature_unsplittable = u.reason() != UnsplittableReason::too_few_samples;
      break;
    }
    node->high = std::make_unique<TreeNode>();
    node->low = std::make_unique<TreeNode>();
    node->high->region = node->region.child(split.high_constraint);
    node->low->region = node->region.child(split.low_constraint);
    for (std::size_t k = 0; k < subset.size(); ++k) {
      TreeNode& child = split.on_high_side[k] ? *node->high : *node->low;
      child.sample_indices.push_back(node->sample_indices[k]);
      child.value_sum += subset[k].performance;
    }
    node->split = std::move(split);
    const double u_high = ucb(node->high->value_sum, node->high->visits(), node->visits(), params.c_p);
    const double u_low = ucb(node->low->value_sum, node->low->visits(), node->visits(), params.c_p);
    node = u_low > u_high ? node->low.get() : node->high.get();
    out.path.push_back(node);
  }
  return out;
}

PerformanceReading evaluate_with_retry(Evaluator& evaluator, const Configuration& lifted,
                                       double worst_latency, bool& flagged) {
  flagged = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      return evaluator.evaluate(lifted);
    } catch (const EvaluatorFatal&) {
      throw;
    } catch (const EvaluationError&) {
    }
  }
  flagged = true;
  return PerformanceReading{0.0, worst_latency};
}

TuningSession::TuningSession(Subspace space, ObjectiveWeights weights, Baseline baseline,
                             TunerParams params)
    : space_(std::move(space)), weights_(weights), baseline_(baseline), params_(std::move(params)) {
  weights_.check();
  params_.check();
}

std::vector<Sample> TuningSession::samples() const {
  std::vector<Sample> out;
  out.reserve(dataset_.size());
  for (const auto& o : dataset_) out.push_back(Sample{o.point, o.p});
  return out;
}

const Observation& TuningSession::best() const {
  if (dataset_.empty()) throw Error("session has no observations");
  return dataset_[best_];
}

const Observation& TuningSession::record(Configuration config, PerformanceReading reading,
                                         std::vector<RegionConstraint> region_path, bool flagged) {
  space_.space().validate(config);
  Observation o;
  o.iter = dataset_.size() + 1;
  o.point = space_.space().encode(config);
  o.config = std::move(config);
  o.reading = reading;
  o.p = score(reading, baseline_, weights_);
  o.region_path = std::move(region_path);
  o.flagged = flagged;
  if (dataset_.empty() || o.p > dataset_[best_].p) best_ = dataset_.size();
  dataset_.push_back(std::move(o));
  dataset_.back().best_p = dataset_[best_].p;
  if (log_) log_->write(*this, dataset_.back());
  return dataset_.back();
}

TuningSession TuningSession::from_log(const std::filesystem::path& log, Subspace space,
                                      ObjectiveWeights weights, Baseline baseline,
                                      TunerParams params) {
  TuningSession s(std::move(space), weights, baseline, std::move(params));
  for (auto& row : read_session_log(log)) {
    Observation o;
    o.iter = s.dataset_.size() + 1;
    if (row.iter != o.iter) {
      throw ParseError("session log row " + std::to_string(o.iter) + " has iter " +
                       std::to_string(row.iter));
    }
    o.config = s.space_.project(configuration_from_json(s.space_.parent(), row.configuration));
    o.point = s.space_.space().encode(o.config);
    o.reading = row.reading;
    o.p = row.p;
    o.region_path = std::move(row.region_path);
    o.flagged = row.flagged;
    if (s.dataset_.empty() || o.p > s.dataset_[s.best_].p) s.best_ = s.dataset_.size();
    s.dataset_.push_back(std::move(o));
    s.dataset_.back().best_p = s.dataset_[s.best_].p;
  }
  return s;
}

void cold_start(TuningSession& session, Evaluator& evaluator) {
  const ConfigurationSpace& space = session.space().space();
  const auto points = latin_hypercube(session.params().cold_start, space.dimension(),
                                      stream_seed(session.params().seed, SeedStream::lhs, 0));
  for (std::size_t i = session.dataset().size(); i < points.size(); ++i) {
    evaluate_and_record(session, evaluator, space.decode(points[i]), {});
  }
}

void warm_start(TuningSession& session, const TuningSession& prior, std::size_t k,
                Evaluator& evaluator) {
  if (prior.empty()) throw Error("warm start needs a non-empty prior session");
  if (k == 0 || k > prior.dataset().size()) {
    throw Error("warm start k must lie in [1, " + std::to_string(prior.dataset().size()) + "]");
  }
  if (prior.space().parent().names() != session.space().parent().names()) {
    throw DimensionMismatch("prior session was tuned over a different knob space");
  }
  std::vector<std::size_t> order(prior.dataset().size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prior.dataset()[a].p > prior.dataset()[b].p;
  });
  for (std::size_t i = 0; i < k; ++i) {
    const Configuration lifted = prior.space().lift(prior.dataset()[order[i]].config);
    evaluate_and_record(session, evaluator, session.space().project(lifted), {});
  }
}

void tune(TuningSession& session, Evaluator& evaluator, const IterationObserver& observer) {
  const TunerParams& params = session.params();
  const ConfigurationSpace& space = session.space().space();
  if (session.dataset().size() < 2) throw Error("tune needs at least 2 initial samples");

  ProposeOptions popts = params.propose;
  popts.snap = [&space](const Eigen::VectorXd& x) {
    return space.encode(space.decode(UnitPoint{x})).coords;
  };

  while (session.dataset().size() < params.budget) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t iter = session.dataset().size() + 1;
    const std::vector<Sample> samples = session.samples();

    IterationTrace trace;
    trace.iter = static_cast<std::size_t>(iter);
    Descent descent = descend(samples, params, stream_seed(params.seed, SeedStream::tree, iter));

    GpOptions gopts = params.gp;
    gopts.seed = stream_seed(params.seed, SeedStream::gp, iter);
    GaussianProcess gp(gopts);
    gp.fit(samples);

    const std::uint64_t pseed = stream_seed(params.seed, SeedStream::propose, iter);
    bool proposed = false;
    for (std::size_t up = 0; up < descent.path.size() && !proposed; ++up) {
      const TreeNode* node = descent.path[descent.path.size() - 1 - up];
      try {
        trace.proposal = propose(gp, node->region, samples, pseed, popts);
        trace.target = node->region;
        trace.fallback_levels = up;
        proposed = true;
      } catch (const RegionExhausted&) {
      }
    }
    if (!proposed) throw RegionExhausted("no candidate in any region of the path");

    trace.proposal_in_region = member(trace.target, trace.proposal.point.coords);
    const Configuration config = space.decode(trace.proposal.point);
    trace.algorithm_seconds = seconds_since(started);

    const auto eval_started = std::chrono::steady_clock::now();
    evaluate_and_record(session, evaluator, config, trace.target.constraints);
    trace.evaluation_seconds = seconds_since(eval_started);
    trace.descent = &descent;
    if (observer) observer(trace);
  }
}

}  // namespace decotune
