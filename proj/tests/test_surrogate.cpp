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

#include "decotune/rng.hpp"
#include "decotune/surrogate.hpp"
#include "oracles.hpp"

using namespace decotune;

namespace {

double smooth(const Eigen::VectorXd& x) { return std::sin(3.0 * x[0]) + 0.5 * std::cos(2.0 * x[1]); }

std::vector<Sample> smooth_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> s;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(2);
    x << rng.uniform(), rng.uniform();
    s.push_back(Sample{UnitPoint{x}, smooth(x)});
  }
  return s;
}

}  // namespace

TEST(Gp, InterpolatesAsNoiseVanishes) {
  GpOptions o;
  o.fixed_noise = 1e-10;
  GaussianProcess gp(o);
  const auto s = smooth_samples(12, 1);
  gp.fit(s);
  for (const auto& x : s) {
    const Posterior post = gp.predict(x.point.coords);
    EXPECT_NEAR(post.mean, x.performance, 1e-6);
    EXPECT_LE(post.variance, gp.hyperparameters().noise_variance + gp.jitter() + 1e-6);
  }
}

TEST(Gp, VarianceAtTrainingPointsBoundedByNoise) {
  GaussianProcess gp;
  const auto s = smooth_samples(15, 2);
  gp.fit(s);
  for (const auto& x : s) {
    EXPECT_LE(gp.predict(x.point.coords).variance, gp.hyperparameters().noise_variance + 1e-6);
  }
}

TEST(Gp, BeatsConstantMeanOnHeldOutPoints) {
  GaussianProcess gp;
  const auto train = smooth_samples(20, 3);
  gp.fit(train);
  double mean = 0;
  for (const auto& s : train) mean += s.performance;
  mean /= static_cast<double>(train.size());
  double se_gp = 0, se_const = 0;
  for (const auto& s : smooth_samples(200, 4)) {
    se_gp += std::pow(gp.predict(s.point.coords).mean - s.performance, 2);
    se_const += std::pow(mean - s.performance, 2);
  }
  EXPECT_LT(se_gp, se_const);
}

TEST(Gp, PosteriorMatchesExplicitInverse) {
  for (const auto kernel : {KernelType::matern52, KernelType::rbf}) {
    GpOptions o;
    o.kernel = kernel;
    o.optimize = false;
    GaussianProcess gp(o);
    GpHyperparameters hp;
    hp.length_scales = Eigen::Vector2d(0.3, 0.6);
    hp.signal_variance = 0.8;
    hp.noise_variance = 1e-3;
    gp.set_hyperparameters(hp);
    const auto s = smooth_samples(10, 5);
    gp.fit(s);

    std::vector<Eigen::VectorXd> x;
    std::vector<double> y;
    for (const auto& v : s) {
      x.push_back(v.point.coords);
      y.push_back(v.performance);
    }
    auto k = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      if (kernel == KernelType::matern52) return oracle::matern52(a, b, hp.length_scales, 0.8);
      return 0.8 * std::exp(-0.5 * (a - b).cwiseQuotient(hp.length_scales).squaredNorm());
    };
    for (const auto& q : smooth_samples(5, 6)) {
      const auto ref = oracle::gp_posterior(x, y, q.point.coords, k, 1e-3 + gp.jitter());
      const Posterior post = gp.predict(q.point.coords);
      EXPECT_NEAR(post.mean, ref.mean, 1e-9);
      EXPECT_NEAR(post.variance, std::max(ref.variance, 0.0), 1e-9);
    }
  }
}

TEST(Gp, FittingImprovesTheMarginalLikelihood) {
  const auto s = smooth_samples(25, 7);
  GpOptions fixed;
  fixed.optimize = false;
  GaussianProcess start(fixed);
  GpHyperparameters hp;
  hp.length_scales = Eigen::Vector2d::Constant(0.5);
  hp.signal_variance = 1.0;
  hp.noise_variance = 1e-2;
  start.set_hyperparameters(hp);
  start.fit(s);
  GaussianProcess fitted;
  fitted.set_hyperparameters(hp);
  fitted.fit(s);
  EXPECT_GE(fitted.log_marginal_likelihood(), start.log_marginal_likelihood());
}

TEST(Ei, ClosedFormAgainstIndependentImplementation) {
  for (double m : {-1.0, 0.0, 0.3, 2.0}) {
    for (double sd : {1e-3, 0.1, 1.0}) {
      EXPECT_NEAR(expected_improvement({m, sd * sd}, 0.25), oracle::expected_improvement(m, sd, 0.25),
                  1e-12);
    }
  }
  EXPECT_EQ(expected_improvement({0.1, 0.0}, 0.5), 0.0);
  EXPECT_EQ(expected_improvement({0.9, 0.0}, 0.5), 0.9 - 0.5);
  EXPECT_GT(expected_improvement({0.1, 0.01}, 0.5), 0.0);
}

TEST(Member, EdgeRules) {
  EXPECT_TRUE(member(Region{}, Eigen::Vector2d(0.3, 0.9)));
  Region r;
  r.constraints.push_back(RegionConstraint{Eigen::Vector2d(1, 1), -1.0, 1});
  EXPECT_TRUE(member(r, Eigen::Vector2d(0.5, 0.5)));
  EXPECT_FALSE(member(r, Eigen::Vector2d(0.1, 0.1)));
  const Region child = r.child(RegionConstraint{Eigen::Vector2d(1, 0), -0.8, -1});
  EXPECT_EQ(child.constraints.size(), 2u);
  EXPECT_FALSE(member(child, Eigen::Vector2d(0.9, 0.9)));
  EXPECT_TRUE(member(child, Eigen::Vector2d(0.5, 0.9)));
}

TEST(Propose, WholeCubeReturnsThePoolArgmax) {
  GaussianProcess gp;
  const auto s = smooth_samples(10, 8);
  gp.fit(s);
  ProposeOptions o;
  o.record_pool = true;
  o.pool_size = 256;
  const Proposal p = propose(gp, Region{}, s, 42, o);
  ASSERT_EQ(p.pool.size(), 256u);
  double incumbent = -1e300;
  for (const auto& x : s) incumbent = std::max(incumbent, x.performance);
  std::size_t best = 0;
  double best_ei = -1;
  for (std::size_t i = 0; i < p.pool.size(); ++i) {
    const Posterior post = gp.predict(p.pool[i]);
    const double ei = oracle::expected_improvement(post.mean, std::sqrt(post.variance), incumbent);
    EXPECT_NEAR(ei, p.pool_ei[i], 1e-12);
    if (ei > best_ei + 1e-15) {
      best_ei = ei;
      best = i;
    }
  }
  EXPECT_EQ(p.pool_index, best);
  EXPECT_EQ(p.point.coords, p.pool[best]);
  EXPECT_FALSE(p.used_fallback);
}

TEST(Propose, ProposalsStayInRegion) {
  GaussianProcess gp;
  const auto s = smooth_samples(12, 9);
  gp.fit(s);
  Region r;
  r.constraints.push_back(RegionConstraint{Eigen::Vector2d(1, 0), -0.7, 1});
  r.constraints.push_back(RegionConstraint{Eigen::Vector2d(0, 1), -0.2, -1});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ProposeOptions o;
    o.pool_size = 64;
    const Proposal p = propose(gp, r, s, seed, o);
    EXPECT_TRUE(member(r, p.point.coords)) << seed;
  }
}

TEST(Propose, SameSeedSameProposal) {
  GaussianProcess gp;
  const auto s = smooth_samples(10, 10);
  gp.fit(s);
  EXPECT_EQ(propose(gp, Region{}, s, 5).point.coords, propose(gp, Region{}, s, 5).point.coords);
}

TEST(Propose, EmptyRegionIsExhausted) {
  GaussianProcess gp;
  const auto s = smooth_samples(10, 11);
  gp.fit(s);
  Region r;
  r.constraints.push_back(RegionConstraint{Eigen::Vector2d(1, 1), -3.0, 1});
  ProposeOptions o;
  o.pool_size = 16;
  o.attempt_factor = 4;
  EXPECT_THROW(propose(gp, r, s, 1, o), RegionExhausted);
}

TEST(Propose, SnapKeepsCandidatesOnTheLattice) {
  GaussianProcess gp;
  const auto s = smooth_samples(10, 12);
  gp.fit(s);
  ProposeOptions o;
  o.record_pool = true;
  o.pool_size = 32;
  o.snap = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y[1] = std::round(y[1] * 4.0) / 4.0;
    return y;
  };
  const Proposal p = propose(gp, Region{}, s, 3, o);
  for (const auto& c : p.pool) EXPECT_DOUBLE_EQ(c[1] * 4.0, std::round(c[1] * 4.0));
}
