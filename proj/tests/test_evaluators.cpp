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

#include <chrono>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "decotune/evaluators.hpp"
#include "decotune/rng.hpp"
#include "decotune/tuner.hpp"
#include "oracles.hpp"

using namespace decotune;
using namespace std::chrono_literals;

namespace {

// Written out independently of the evaluator: max of a decoy and a global
// basin over coordinates (0, 5, 9), plus a diagonal ramp.
double two_basin_reference(double x, double y, double z) {
  auto basin = [&](double cx, double cy, double cz, double h, double sw, double ws, double wt) {
    const double d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
    return h * (sw * std::exp(-d / ws) + (1 - sw) * std::exp(-d / wt));
  };
  return std::max(basin(0.20, 0.80, 0.25, 0.35, 1.0, 0.15, 0.15),
                  basin(0.85, 0.85, 0.85, 0.50, 0.0, 0.30, 0.06)) +
         0.5 * (x + y + z) / 3.0;
}

Eigen::VectorXd embed(const SyntheticEvaluator& ev, double x, double y, double z) {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(20, 0.3);
  const auto& e = ev.effective_knobs();
  u[static_cast<Eigen::Index>(e[0])] = x;
  u[static_cast<Eigen::Index>(e[1])] = y;
  u[static_cast<Eigen::Index>(e[2])] = z;
  return u;
}

struct GridMax {
  double value = -1e300;
  double x = 0, y = 0, z = 0;
};

// 101^3 grid at spacing 0.01 over the effective coordinates.
GridMax grid_search(const SyntheticEvaluator& ev) {
  GridMax g;
  Eigen::VectorXd u = embed(ev, 0, 0, 0);
  const auto& e = ev.effective_knobs();
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      for (int k = 0; k <= 100; ++k) {
        u[static_cast<Eigen::Index>(e[0])] = i / 100.0;
        u[static_cast<Eigen::Index>(e[1])] = j / 100.0;
        u[static_cast<Eigen::Index>(e[2])] = k / 100.0;
        const double q = ev.quality(u);
        if (q > g.value) g = {q, i / 100.0, j / 100.0, k / 100.0};
      }
    }
  }
  return g;
}

std::filesystem::path script(const std::filesystem::path& dir, const std::string& name,
                             const std::string& body) {
  const auto p = dir / name;
  oracle::write_file(p, "#!/bin/sh\n" + body);
  std::filesystem::permissions(p, std::filesystem::perms::owner_all);
  return p;
}

}  // namespace

TEST(Synthetic, TwoBasinMatchesTheReferenceFormula) {
  SyntheticEvaluator ev({});
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(), y = rng.uniform(), z = rng.uniform();
    EXPECT_NEAR(ev.quality(embed(ev, x, y, z)), two_basin_reference(x, y, z), 1e-12);
  }
}

TEST(Synthetic, DocumentedOptimaAreTheGridOptima) {
  for (const auto surface : {SyntheticSurface::two_basin, SyntheticSurface::needle}) {
    for (const double drift : {0.0, 0.1}) {
      SyntheticOptions o;
      o.surface = surface;
      o.drift = drift;
      SyntheticEvaluator ev(o);
      const GridMax g = grid_search(ev);
      const auto opt = ev.optimum_coordinates();
      EXPECT_NEAR(g.value, ev.optimum_quality(), 1e-12) << to_string(surface) << " " << drift;
      EXPECT_NEAR(g.x, opt[0], 1e-9);
      EXPECT_NEAR(g.y, opt[1], 1e-9);
      EXPECT_NEAR(g.z, opt[2], 1e-9);
    }
  }
}

TEST(Synthetic, OptimumReading) {
  SyntheticEvaluator ev({});
  const double q = two_basin_reference(0.85, 0.85, 0.85);
  EXPECT_NEAR(ev.optimum_quality(), q, 1e-12);
  const auto r = SyntheticEvaluator::reading_from_quality(q);
  EXPECT_NEAR(r.tps, 1000.0 * (1 + q), 1e-9);
  EXPECT_NEAR(r.latency, 0.05 / (1 + 0.5 * q), 1e-15);
}

TEST(Synthetic, BaselineIsTheClosedFormDefaultAndScoresZero) {
  SyntheticEvaluator ev({});
  // Defaults of knobs 0, 5 and 9 all encode to 0.5.
  const auto expected = SyntheticEvaluator::reading_from_quality(two_basin_reference(0.5, 0.5, 0.5));
  const Baseline b = ev.baseline();
  EXPECT_NEAR(b.tps_default, expected.tps, 1e-9);
  EXPECT_NEAR(b.lat_default, expected.latency, 1e-15);
  EXPECT_EQ(score(ev.evaluate(ev.space().default_configuration()), b, {0.5, 0.5}), 0.0);
}

TEST(Synthetic, ReadingsArePositiveEverywhere) {
  for (const auto surface :
       {SyntheticSurface::two_basin, SyntheticSurface::needle, SyntheticSurface::additive_noise}) {
    SyntheticOptions o;
    o.surface = surface;
    SyntheticEvaluator ev(o);
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
      Eigen::VectorXd u(20);
      for (int d = 0; d < 20; ++d) u[d] = rng.uniform();
      const auto r = ev.evaluate(ev.space().decode(UnitPoint{u}));
      EXPECT_GT(r.tps, 0.0);
      EXPECT_GT(r.latency, 0.0);
    }
  }
}

TEST(Synthetic, NoiseIsSeededAndVariesPerCall) {
  SyntheticOptions o;
  o.surface = SyntheticSurface::additive_noise;
  o.seed = 3;
  SyntheticEvaluator a(o), b(o);
  const auto c = a.space().default_configuration();
  const auto a1 = a.evaluate(c), a2 = a.evaluate(c);
  EXPECT_NE(a1, a2);
  EXPECT_EQ(a1, b.evaluate(c));
  EXPECT_EQ(a2, b.evaluate(c));
  o.noise_fraction = 0.0;
  SyntheticEvaluator quiet(o);
  EXPECT_EQ(quiet.evaluate(c), quiet.evaluate(c));
}

TEST(Synthetic, SurfaceOptionsAreValidated) {
  SyntheticOptions o;
  o.drift = 0.3;
  EXPECT_THROW(SyntheticEvaluator{o}, Error);
  o = SyntheticOptions{};
  o.dims = 4;
  EXPECT_THROW(SyntheticEvaluator{o}, Error);
  EXPECT_THROW(synthetic_surface_from_string("bowl"), Error);
}

TEST(Replay, LoggedRowsComeBackBitIdentical) {
  const auto dir = oracle::temp_dir("replay");
  SyntheticEvaluator ev({});
  TunerParams p;
  p.budget = 14;
  TuningSession s(Subspace::whole(ev.space()), {0.5, 0.5}, ev.baseline(), p);
  {
    SessionLog log(dir / "s.jsonl", false);
    s.attach_log(&log);
    cold_start(s, ev);
    tune(s, ev);
  }
  ReplayEvaluator replay(ev.space(), dir / "s.jsonl");
  EXPECT_EQ(replay.rows(), 14u);
  for (const auto& o : s.dataset()) EXPECT_EQ(replay.evaluate(o.config), o.reading);
  auto other = s.dataset()[0].config;
  other.values[0] += 1e-6;
  EXPECT_THROW(replay.evaluate(other), ReplayMiss);
}

TEST(Replay, BaselineIsCachedAfterTheFirstLookup) {
  SyntheticEvaluator ev({});
  const auto d = ev.space().default_configuration();
  ReplayEvaluator replay(ev.space(), {{d, PerformanceReading{500.0, 0.02}}});
  EXPECT_EQ(replay.baseline().tps_default, 500.0);
  EXPECT_EQ(replay.lookups(), 1u);
  EXPECT_EQ(replay.baseline().lat_default, 0.02);
  EXPECT_EQ(replay.lookups(), 1u);
}

TEST(Replay, MissingTraceIsFatal) {
  SyntheticEvaluator ev({});
  EXPECT_THROW(ReplayEvaluator(ev.space(), "/nonexistent/trace.jsonl"), EvaluatorFatal);
}

TEST(Command, EchoStubPassesTheReadingThrough) {
  const auto dir = oracle::temp_dir("cmd");
  const auto p = script(dir, "echo.sh", "cat >/dev/null\necho '{\"tps\": 100, \"lat\": 1.0}'\n");
  SyntheticEvaluator ev({});
  CommandEvaluator cmd(ev.space(), {p.string()}, 5000ms);
  EXPECT_EQ(cmd.evaluate(ev.space().default_configuration()), (PerformanceReading{100.0, 1.0}));
}

TEST(Command, RequestRoundTripsLosslessly) {
  const auto dir = oracle::temp_dir("cmdrt");
  const auto p = script(dir, "tee.sh",
                        "cat > \"$(dirname \"$0\")/request.json\"\necho '{\"tps\": 1, \"lat\": 1}'\n");
  SyntheticEvaluator ev({});
  CommandEvaluator cmd(ev.space(), {p.string()}, 5000ms);
  Rng rng(12);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd u(20);
    for (int d = 0; d < 20; ++d) u[d] = rng.uniform();
    const Configuration c = ev.space().decode(UnitPoint{u});
    cmd.evaluate(c);
    const auto sent = nlohmann::json::parse(oracle::read_file(dir / "request.json"));
    EXPECT_EQ(configuration_from_json(ev.space(), sent.at("knobs")), c);
    EXPECT_EQ(sent, cmd.request_json(c));
  }
}

TEST(Command, FailuresAreEvaluationErrors) {
  const auto dir = oracle::temp_dir("cmdfail");
  SyntheticEvaluator ev({});
  const auto c = ev.space().default_configuration();
  CommandEvaluator slow(ev.space(), {script(dir, "slow.sh", "sleep 5\n").string()}, 200ms);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(slow.evaluate(c), EvaluationError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 3s);
  CommandEvaluator bad(ev.space(), {script(dir, "bad.sh", "cat >/dev/null\nexit 3\n").string()}, 5000ms);
  EXPECT_THROW(bad.evaluate(c), EvaluationError);
  CommandEvaluator junk(ev.space(), {script(dir, "junk.sh", "cat >/dev/null\necho hello\n").string()},
                        5000ms);
  EXPECT_THROW(junk.evaluate(c), EvaluationError);
  CommandEvaluator missing(ev.space(), {(dir / "absent").string()}, 5000ms);
  EXPECT_THROW(missing.evaluate(c), Error);
}

TEST(Command, ParseReply) {
  EXPECT_EQ(CommandEvaluator::parse_reply("log line\n{\"tps\": 7.5, \"lat\": 0.25}\n"),
            (PerformanceReading{7.5, 0.25}));
  EXPECT_THROW(CommandEvaluator::parse_reply("{\"tps\": 7.5}"), EvaluationError);
  EXPECT_THROW(CommandEvaluator::parse_reply("{\"tps\": -1, \"lat\": 1}"), EvaluationError);
}

TEST(Factory, SpecStrings) {
  const auto s = make_evaluator("synthetic:needle,dims=12,seed=3,drift=0.1", std::nullopt);
  EXPECT_EQ(s->kind(), "synthetic");
  EXPECT_EQ(s->space().dimension(), 12u);
  EXPECT_EQ(dynamic_cast<SyntheticEvaluator&>(*s).options().drift, 0.1);
  EXPECT_THROW(make_evaluator("synthetic:needle,depth=3", std::nullopt), Error);
  EXPECT_THROW(make_evaluator("replay:x.jsonl", std::nullopt), Error);
  EXPECT_THROW(make_evaluator("oracle:x", std::nullopt), Error);
  const auto c = make_evaluator("command:/bin/true,timeout=2", SyntheticEvaluator::make_space(10));
  EXPECT_EQ(c->kind(), "command");
}
