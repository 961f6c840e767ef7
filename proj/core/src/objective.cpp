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

#include "decotune/objective.hpp"

#include <cmath>
#include <string>

#include "decotune/llm_gateway.hpp"
#include "decotune/moe_selection.hpp"

namespace decotune {

void PerformanceReading::check() const {
  if (!(tps >= 0.0) || !std::isfinite(tps)) throw Error("reading: tps must be >= 0");
  if (!(latency > 0.0) || !std::isfinite(latency)) throw Error("reading: latency must be > 0");
}

ObjectiveWeights ObjectiveWeights::normalized(double w_tps, double w_lat) {
  if (!(w_tps >= 0.0) || !(w_lat >= 0.0)) throw Error("objective weights must be >= 0");
  const double sum = w_tps + w_lat;
  if (sum < 0.95 || sum > 1.05) {
    throw Error("objective weights sum to " + std::to_string(sum) + ", outside [0.95, 1.05]");
  }
  return ObjectiveWeights{w_tps / sum, w_lat / sum};
}

void ObjectiveWeights::check() const {
  if (!(w_tps >= 0.0 && w_tps <= 1.0 && w_lat >= 0.0 && w_lat <= 1.0) ||
      std::abs(w_tps + w_lat - 1.0) > 1e-9) {
    throw Error("objective weights must lie in [0,1] and sum to 1");
  }
}

double score(const PerformanceReading& reading, const Baseline& baseline,
             const ObjectiveWeights& weights) {
  double p = 0.0;
  if (weights.w_tps > 0.0) {
    if (!(baseline.tps_default > 0.0)) {
      throw DegenerateBaseline("baseline throughput is zero under a positive weight");
    }
    p += weights.w_tps * (reading.tps - baseline.tps_default) / baseline.tps_default;
  }
  if (weights.w_lat > 0.0) {
    if (!(baseline.lat_default > 0.0)) {
      throw DegenerateBaseline("baseline latency is zero under a positive weight");
    }
    p += weights.w_lat * (baseline.lat_default - reading.latency) / baseline.lat_default;
  }
  return p;
}

ObjectiveWeights assign_weights(const TuningContext& ctx, const LlmGateway& gateway) {
  const Completion c = gateway.complete(objective_prompt(ctx));
  return ObjectiveWeights::normalized(c.value.at("w_tps").get<double>(),
                                      c.value.at("w_lat").get<double>());
}

}  // namespace decotune
