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

#include "decotune/error.hpp"

namespace decotune {

class LlmGateway;
struct TuningContext;

/// Throughput in transactions/second and 95th-percentile latency in seconds.
struct PerformanceReading {
  double tps = 0.0;
  double latency = 1.0;

  void check() const;
  bool operator==(const PerformanceReading&) const = default;
};

struct ObjectiveWeights {
  double w_tps = 0.5;
  double w_lat = 0.5;

  /// Rescales a raw pair to sum to one. Throws when the sum leaves
  /// [0.95, 1.05] or a weight is negative.
  static ObjectiveWeights normalized(double w_tps, double w_lat);
  void check() const;
};

struct Baseline {
  double tps_default = 0.0;
  double lat_default = 1.0;
};

class DegenerateBaseline : public Error {
 public:
  using Error::Error;
};

/// Relative improvement over the default configuration:
/// w_tps * (tps - tps0) / tps0 + w_lat * (lat0 - lat) / lat0.
double score(const PerformanceReading& reading, const Baseline& baseline,
             const ObjectiveWeights& weights);

/// Asks the Manager once for the throughput/latency weights of a task.
ObjectiveWeights assign_weights(const TuningContext& ctx, const LlmGateway& gateway);

}  // namespace decotune
