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

#include <cmath>

#include <gtest/gtest.h>

#include "decotune/config_space.hpp"
#include "decotune/rng.hpp"

using namespace decotune;

namespace {

ConfigurationSpace mixed_space() {
  return ConfigurationSpace({
      Knob::continuous("c", 0.0, 10.0, 5.0),
      Knob::integer("i", 0.0, 100.0, 10.0),
      Knob::categorical("k", {"a", "b", "c"}, "a"),
  });
}

}  // namespace

TEST(Knob, InvariantsRejectBadDomains) {
  EXPECT_THROW(Knob::continuous("x", 1.0, 1.0, 1.0), SpecError);
  EXPECT_THROW(Knob::continuous("x", 0.0, 1.0, 2.0), SpecError);
  EXPECT_THROW(Knob::categorical("x", {"only"}, "only"), SpecError);
  EXPECT_THROW(Knob::categorical("x", {"a", "b"}, "z"), SpecError);
  std::vector<std::string> many;
  for (int i = 0; i < 11; ++i) many.push_back("v" + std::to_string(i));
  EXPECT_THROW(Knob::categorical("x", many, "v0"), SpecError);
  EXPECT_THROW(ConfigurationSpace({Knob::continuous("x", 0, 1, 0), Knob::continuous("x", 0, 1, 0)}),
               SpecError);
}

TEST(Encode, UpperBoundMapsToOne) {
  const ConfigurationSpace s({Knob::continuous("c", 0.0, 10.0, 0.0)});
  EXPECT_DOUBLE_EQ(s.encode(Configuration{{10.0}}).coords[0], 1.0);
}

TEST(Encode, CategoricalUsesBinMidpoints) {
  const ConfigurationSpace s({Knob::categorical("k", {"a", "b", "c"}, "a")});
  EXPECT_DOUBLE_EQ(s.encode(Configuration{{0.0}}).coords[0], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(s.encode(Configuration{{2.0}}).coords[0], 5.0 / 6.0);
}

TEST(Encode, DefaultConfigurationRescalesLinearly) {
  const ConfigurationSpace s({Knob::continuous("a", 0, 4, 2), Knob::continuous("b", 1, 3, 1)});
  const UnitPoint u = s.encode(s.default_configuration());
  EXPECT_DOUBLE_EQ(u.coords[0], 0.5);
  EXPECT_DOUBLE_EQ(u.coords[1], 0.0);
}

TEST(Encode, RejectsOutOfDomainAndWrongArity) {
  const auto s = mixed_space();
  EXPECT_THROW(s.encode(Configuration{{11.0, 1.0, 0.0}}), DomainError);
  EXPECT_THROW(s.encode(Configuration{{1.0, 1.5, 0.0}}), DomainError);
  EXPECT_THROW(s.encode(Configuration{{1.0, 1.0, 3.0}}), DomainError);
  EXPECT_THROW(s.encode(Configuration{{1.0}}), DimensionMismatch);
}

TEST(Decode, CategoryBinMembership) {
  const ConfigurationSpace s({Knob::categorical("k", {"a", "b", "c"}, "a")});
  EXPECT_EQ(s.decode(UnitPoint{Eigen::VectorXd::Constant(1, 1.0 / 6.0)}).values[0], 0.0);
  EXPECT_EQ(s.decode(UnitPoint{Eigen::VectorXd::Constant(1, 1.0)}).values[0], 2.0);
}

TEST(Decode, IntegerRoundsHalfUp) {
  const ConfigurationSpace s({Knob::integer("i", 0, 100, 0)});
  EXPECT_EQ(s.decode(UnitPoint{Eigen::VectorXd::Constant(1, 0.505)}).values[0], 51.0);
}

TEST(Decode, RoundTripOnRandomConfigurations) {
  const auto s = mixed_space();
  Rng rng(9);
  for (int t = 0; t < 1000; ++t) {
    Configuration c{{rng.uniform(0, 10), std::floor(rng.uniform(0, 101)),
                     static_cast<double>(rng.index(3))}};
    c.values[1] = std::min(c.values[1], 100.0);
    const Configuration back = s.decode(s.encode(c));
    EXPECT_NEAR(back.values[0], c.values[0], 1e-12);
    EXPECT_EQ(back.values[1], c.values[1]);
    EXPECT_EQ(back.values[2], c.values[2]);
  }
}

TEST(RelativeBound, PercentOfRam) {
  HardwareSpec hw{16.0 * (1ull << 30), 8, 1e12};
  EXPECT_DOUBLE_EQ(resolve_relative_bound("50% of RAM", hw), 8.0 * (1ull << 30));
  EXPECT_DOUBLE_EQ(resolve_relative_bound("75% of RAM", hw), 12.0 * (1ull << 30));
  EXPECT_DOUBLE_EQ(resolve_relative_bound("4", hw), 4.0);
  EXPECT_TRUE(std::isinf(resolve_relative_bound("inf", hw)));
  EXPECT_NEAR(resolve_relative_bound("50% of RAM", hw, 8192.0), 1048576.0, 1e-6);
  EXPECT_DOUBLE_EQ(resolve_relative_bound("50% of CPU cores", hw), 4.0);
  EXPECT_THROW(resolve_relative_bound("half the RAM", hw), Error);
}

TEST(RelativeBound, UnitNotes) {
  EXPECT_DOUBLE_EQ(unit_bytes_from_note("8KB blocks"), 8192.0);
  EXPECT_DOUBLE_EQ(unit_bytes_from_note("MB"), 1048576.0);
  EXPECT_DOUBLE_EQ(unit_bytes_from_note("milliseconds"), 1.0);
  EXPECT_TRUE(is_relative_bound("25% of RAM"));
  EXPECT_FALSE(is_relative_bound("25"));
}

TEST(KnobSpec, ParsesHardwareAndRelativeBounds) {
  const auto spec = parse_knob_spec(R"({
    "hardware": {"ram_bytes": 17179869184, "cpu_cores": 8, "disk_bytes": 1e12},
    "knobs": [
      {"name": "shared_buffers", "kind": "integer", "lower": 16, "upper": "50% of RAM",
       "default": 16384, "unit_note": "8KB blocks"},
      {"name": "enable_x", "kind": "categorical", "categories": ["on", "off"], "default": "off"}
    ]})");
  ASSERT_TRUE(spec.hardware.has_value());
  EXPECT_EQ(spec.space.dimension(), 2u);
  EXPECT_DOUBLE_EQ(spec.space.knob(0).upper, 1048576.0);
  EXPECT_EQ(spec.space.knob(1).default_value, 1.0);
  EXPECT_EQ(spec.space.format_value(1, 1.0), "off");
  EXPECT_THROW(parse_knob_spec("{"), ParseError);
}

TEST(Subspace, LiftKeepsUnselectedKnobsAtDefault) {
  const auto parent = mixed_space();
  const Subspace sub(parent, {{"i", 20.0, 30.0}});
  ASSERT_EQ(sub.space().dimension(), 1u);
  EXPECT_EQ(sub.space().knob(0).lower, 20.0);
  EXPECT_EQ(sub.space().knob(0).upper, 30.0);
  const Configuration lifted = sub.lift(Configuration{{25.0}});
  EXPECT_EQ(lifted.values, (std::vector<double>{5.0, 25.0, 0.0}));
  EXPECT_EQ(sub.project(Configuration{{1.0, 99.0, 2.0}}).values[0], 30.0);
}

TEST(Subspace, WholeIsIdentity) {
  const auto parent = mixed_space();
  const Subspace sub = Subspace::whole(parent);
  const Configuration c{{3.0, 4.0, 1.0}};
  EXPECT_EQ(sub.lift(c), c);
  EXPECT_EQ(sub.project(c), c);
}
