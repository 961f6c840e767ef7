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

#include "decotune/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "decotune/rng.hpp"

namespace decotune {

namespace {

constexpr double kMinLogLength = -4.6;  // 0.01
constexpr double kMaxLogLength = 3.9;   // ~50
constexpr double kMinLogNoise = -13.8;  // 1e-6
constexpr double kMaxLogNoise = 0.0;
const double kSqrt5 = std::sqrt(5.0);

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  bool ok = false;
};

Factorization factorize(const Eigen::MatrixXd& k, double cap) {
  Factorization f;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd m = k;
    if (jitter > 0.0) m.diagonal().array() += jitter;
    f.llt.compute(m);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      f.ok = true;
      return f;
    }
    if (jitter >= cap) return f;
    jitter = jitter == 0.0 ? 1e-10 : std::min(jitter * 10.0, cap);
  }
}

// Kernel matrix without noise plus the radial factor g(r) for the length
// scale gradient: dK_ij / dlog l = g_ij * (dx_ij / l)^2.
void kernel_matrices(KernelType type, const Eigen::MatrixXd& x, const Eigen::VectorXd& ls,
                     double signal, Eigen::MatrixXd& k, Eigen::MatrixXd* g) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd scaled = x * ls.cwiseInverse().asDiagonal();
  const Eigen::VectorXd sq = scaled.rowwise().squaredNorm();
  Eigen::MatrixXd r2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * scaled * scaled.transpose();
  k.resize(n, n);
  if (g) g->resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d2 = i == j ? 0.0 : std::max(r2(i, j), 0.0);
      if (type == KernelType::matern52) {
        const double r = std::sqrt(d2);
        const double e = std::exp(-kSqrt5 * r);
        k(i, j) = signal * (1.0 + kSqrt5 * r + 5.0 / 3.0 * d2) * e;
        if (g) (*g)(i, j) = signal * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * e;
      } else {
        k(i, j) = signal * std::exp(-0.5 * d2);
        if (g) (*g)(i, j) = k(i, j);
      }
    }
  }
}

struct Evaluation {
  double lml = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
};

// theta = [log l_1..d, log signal, log noise].
Evaluation evaluate_lml(KernelType type, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& theta, double cap, bool want_grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd ls = theta.head(d).array().exp();
  const double signal = std::exp(theta[d]);
  const double noise = std::exp(theta[d + 1]);
  Eigen::MatrixXd k;
  Eigen::MatrixXd g;
  kernel_matrices(type, x, ls, signal, k, want_grad ? &g : nullptr);
  Eigen::MatrixXd kn = k;
  kn.diagonal().array() += noise;
  const Factorization f = factorize(kn, cap);
  Evaluation out;
  if (!f.ok) return out;
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const Eigen::MatrixXd l = f.llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  out.lml = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  if (!want_grad) return out;

  const Eigen::MatrixXd kinv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
  out.grad.resize(d + 2);
  const Eigen::MatrixXd gw = w.cwiseProduct(g);
  const Eigen::VectorXd row = gw.rowwise().sum();
  const Eigen::MatrixXd gx = gw * x;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double s = 2.0 * x.col(c).cwiseAbs2().dot(row) - 2.0 * x.col(c).dot(gx.col(c));
    out.grad[c] = 0.5 * s / (ls[c] * ls[c]);
  }
  out.grad[d] = 0.5 * w.cwiseProduct(k).sum();
  out.grad[d + 1] = 0.5 * noise * w.trace();
  return out;
}

void clamp_theta(Eigen::VectorXd& theta, Eigen::Index d, double log_var, bool fixed_noise) {
  for (Eigen::Index c = 0; c < d; ++c) theta[c] = std::clamp(theta[c], kMinLogLength, kMaxLogLength);
  theta[d] = std::clamp(theta[d], log_var - 9.0, log_var + 7.0);
  if (!fixed_noise) {
    theta[d + 1] = std::clamp(theta[d + 1], std::max(kMinLogNoise, log_var - 16.0),
                              std::min(kMaxLogNoise, log_var + 2.0));
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

std::string_view to_string(KernelType kernel) noexcept {
  return kernel == KernelType::rbf ? "rbf" : "matern52";
}

KernelType kernel_type_from_string(std::string_view text) {
  if (text == "matern52") return KernelType::matern52;
  if (text == "rbf") return KernelType::rbf;
  throw Error("unknown kernel '" + std::string(text) + "'");
}

GaussianProcess::GaussianProcess(GpOptions options) : options_(std::move(options)) {
  if (options_.fixed_noise && !(*options_.fixed_noise > 0.0)) {
    throw Error("fixed noise variance must be positive");
  }
}

double GaussianProcess::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const double d2 = (a - b).cwiseQuotient(hp_.length_scales).squaredNorm();
  if (options_.kernel == KernelType::matern52) {
    const double r = std::sqrt(d2);
    return hp_.signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * d2) * std::exp(-kSqrt5 * r);
  }
  return hp_.signal_variance * std::exp(-0.5 * d2);
}

void GaussianProcess::fit(std::span<const Sample> samples) {
  if (samples.size() < 2) throw Error("GP fit needs at least 2 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(samples.front().point.size());
  x_.resize(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (s.point.coords.size() != d) throw DimensionMismatch("GP samples disagree on dimension");
    x_.row(i) = s.point.coords.transpose();
    y[i] = s.performance;
  }
  y_mean_ = y.mean();
  y.array() -= y_mean_;
  const double var = std::max(y.squaredNorm() / static_cast<double>(n), 1e-6);
  const double log_var = std::log(var);
  const bool fixed_noise = options_.fixed_noise.has_value();

  Eigen::VectorXd start(d + 2);
  if (preset_) {
    if (preset_->length_scales.size() != d) throw DimensionMismatch("preset length scales");
    start.head(d) = preset_->length_scales.array().log();
    start[d] = std::log(preset_->signal_variance);
    start[d + 1] = std::log(preset_->noise_variance);
  } else {
    start.head(d).setConstant(std::log(0.5));
    start[d] = log_var;
    start[d + 1] = log_var + std::log(1e-3);
  }
  if (fixed_noise) start[d + 1] = std::log(*options_.fixed_noise);

  Eigen::VectorXd best = start;
  if (options_.optimize) {
    clamp_theta(best, d, log_var, fixed_noise);
    double best_lml = -std::numeric_limits<double>::infinity();
    Rng rng(options_.seed);
    const std::size_t restarts = std::max<std::size_t>(options_.restarts, 1);
    for (std::size_t r = 0; r < restarts; ++r) {
      Eigen::VectorXd theta = start;
      if (r > 0) {
        for (Eigen::Index c = 0; c < d; ++c) theta[c] = std::log(rng.uniform(0.1, 2.0));
        theta[d] = log_var + rng.uniform(-1.0, 1.0);
        if (!fixed_noise) theta[d + 1] = log_var + std::log(1e-3) + rng.uniform(-2.0, 2.0);
      }
      clamp_theta(theta, d, log_var, fixed_noise);
      Eigen::VectorXd m = Eigen::VectorXd::Zero(d + 2);
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d + 2);
      constexpr double kB1 = 0.9;
      constexpr double kB2 = 0.999;
      for (std::size_t step = 0; step <= options_.steps; ++step) {
        const bool last = step == options_.steps;
        Evaluation e = evaluate_lml(options_.kernel, x_, y, theta, options_.jitter_cap, !last);
        if (!std::isfinite(e.lml)) break;
        if (e.lml > best_lml) {
          best_lml = e.lml;
          best = theta;
        }
        if (last) break;
        if (fixed_noise) e.grad[d + 1] = 0.0;
        m = kB1 * m + (1.0 - kB1) * e.grad;
        v = kB2 * v + (1.0 - kB2) * e.grad.cwiseAbs2();
        const double t = static_cast<double>(step + 1);
        const Eigen::VectorXd mh = m / (1.0 - std::pow(kB1, t));
        const Eigen::VectorXd vh = v / (1.0 - std::pow(kB2, t));
        theta += options_.learning_rate * mh.cwiseQuotient((vh.array().sqrt() + 1e-8).matrix());
        clamp_theta(theta, d, log_var, fixed_noise);
      }
    }
  }

  hp_.length_scales = best.head(d).array().exp();
  hp_.signal_variance = std::exp(best[d]);
  hp_.noise_variance = std::exp(best[d + 1]);

  Eigen::MatrixXd k;
  kernel_matrices(options_.kernel, x_, hp_.length_scales, hp_.signal_variance, k, nullptr);
  k.diagonal().array() += hp_.noise_variance;
  Factorization f = factorize(k, options_.jitter_cap);
  if (!f.ok) {
    fitted_ = false;
    throw FactorizationError("GP kernel matrix not positive definite at jitter " +
                             std::to_string(options_.jitter_cap));
  }
  jitter_ = f.jitter;
  chol_l_ = f.llt.matrixL();
  alpha_ = f.llt.solve(y);
  const double log_det = 2.0 * chol_l_.diagonal().array().log().sum();
  lml_ = -0.5 * y.dot(alpha_) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  fitted_ = true;
}

Posterior GaussianProcess::predict(const Eigen::VectorXd& x) const {
  if (!fitted_) throw Error("GP queried before fit");
  if (x.size() != x_.cols()) throw DimensionMismatch("GP query dimension");
  const Eigen::Index n = x_.rows();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(x_.row(i).transpose(), x);
  Posterior p;
  p.mean = y_mean_ + ks.dot(alpha_);
  const Eigen::VectorXd v = chol_l_.triangularView<Eigen::Lower>().solve(ks);
  p.variance = std::max(hp_.signal_variance - v.squaredNorm(), 0.0);
  return p;
}

double expected_improvement(const Posterior& posterior, double incumbent) {
  const double sigma = std::sqrt(std::max(posterior.variance, 0.0));
  const double gap = posterior.mean - incumbent;
  if (sigma < 1e-12) return std::max(gap, 0.0);
  const double z = gap / sigma;
  return std::max(gap * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

Region Region::child(const RegionConstraint& c) const {
  Region r = *this;
  r.constraints.push_back(c);
  return r;
}

bool member(const Region& region, const Eigen::VectorXd& point) {
  for (const auto& c : region.constraints) {
    if (!c.satisfied_by(point)) return false;
  }
  return true;
}

Proposal propose(const Surrogate& model, const Region& region, std::span<const Sample> training,
                 std::uint64_t seed, const ProposeOptions& options) {
  if (options.pool_size == 0) throw Error("pool size must be positive");
  if (training.empty()) throw Error("propose needs training samples");
  if (!model.fitted()) throw Error("propose needs a fitted model");
  const auto d = static_cast<Eigen::Index>(training.front().point.size());
  const std::size_t cap = options.attempt_factor * options.pool_size;
  Rng rng(seed);

  std::vector<Eigen::VectorXd> pool;
  pool.reserve(options.pool_size);
  Eigen::VectorXd candidate(d);
  for (std::size_t attempt = 0; attempt < cap && pool.size() < options.pool_size; ++attempt) {
    for (Eigen::Index c = 0; c < d; ++c) candidate[c] = rng.uniform();
    if (options.snap) candidate = options.snap(candidate);
    if (member(region, candidate)) pool.push_back(candidate);
  }

  bool fallback = false;
  if (pool.empty()) {
    const Sample* anchor = nullptr;
    for (const Sample& s : training) {
      if (member(region, s.point.coords) && (!anchor || s.performance > anchor->performance)) {
        anchor = &s;
      }
    }
    if (anchor) {
      fallback = true;
      for (std::size_t attempt = 0; attempt < cap && pool.size() < options.pool_size; ++attempt) {
        for (Eigen::Index c = 0; c < d; ++c) {
          candidate[c] =
              std::clamp(anchor->point.coords[c] + options.fallback_sigma * rng.normal(), 0.0, 1.0);
        }
        if (options.snap) candidate = options.snap(candidate);
        if (member(region, candidate)) pool.push_back(candidate);
      }
    }
  }
  if (pool.empty()) throw RegionExhausted("no in-region candidate found");

  double incumbent = -std::numeric_limits<double>::infinity();
  for (const Sample& s : training) incumbent = std::max(incumbent, s.performance);

  Proposal out;
  out.used_fallback = fallback;
  out.ei = -1.0;
  std::vector<double> scores(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scores[i] = expected_improvement(model.predict(pool[i]), incumbent);
    if (scores[i] > out.ei) {
      out.ei = scores[i];
      out.pool_index = i;
    }
  }
  out.point.coords = pool[out.pool_index];
  if (options.record_pool) {
    out.pool = std::move(pool);
    out.pool_ei = std::move(scores);
  }
  return out;
}

}  // namespace decotune
