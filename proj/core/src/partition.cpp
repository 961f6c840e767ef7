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

#include "decotune/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "decotune/rng.hpp"

namespace decotune {

namespace {

constexpr double kZeroRowNorm = 1e-9;
constexpr double kZeroShift = 1e-6;

bool all_rows_identical(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if ((m.row(i) - m.row(0)).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  return true;
}

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

}  // namespace

std::size_t ClusterLabeling::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

bool RegionConstraint::satisfied_by(const Eigen::VectorXd& x) const {
  const double v = value(x);
  return required_sign > 0 ? v >= 0.0 : v < 0.0;
}

std::string_view to_string(ClusteringStage stage) noexcept {
  switch (stage) {
    case ClusteringStage::spectral: return "spectral";
    case ClusteringStage::kernel_pca: return "kernel_pca";
    case ClusteringStage::kmeans: return "kmeans";
  }
  return "spectral";
}

std::string_view to_string(ClusteringVariant variant) noexcept {
  switch (variant) {
    case ClusteringVariant::two_stage: return "two_stage";
    case ClusteringVariant::kmeans: return "kmeans";
    case ClusteringVariant::spectral: return "spectral";
    case ClusteringVariant::kernel_pca: return "kernel_pca";
  }
  return "two_stage";
}

ClusteringVariant clustering_variant_from_string(std::string_view text) {
  if (text == "two_stage" || text == "two-stage") return ClusteringVariant::two_stage;
  if (text == "kmeans" || text == "k-means") return ClusteringVariant::kmeans;
  if (text == "spectral") return ClusteringVariant::spectral;
  if (text == "kernel_pca" || text == "kpca") return ClusteringVariant::kernel_pca;
  throw Error("unknown clustering variant '" + std::string(text) + "'");
}

std::string_view to_string(UnsplittableReason reason) noexcept {
  switch (reason) {
    case UnsplittableReason::too_few_samples: return "too_few_samples";
    case UnsplittableReason::degenerate_features: return "degenerate_features";
    case UnsplittableReason::empty_cluster: return "empty_cluster";
    case UnsplittableReason::solver_failure: return "solver_failure";
    case UnsplittableReason::low_accuracy: return "low_accuracy";
    case UnsplittableReason::one_sided: return "one_sided";
    case UnsplittableReason::inverted_means: return "inverted_means";
  }
  return "degenerate_features";
}

FeatureMatrix build_features(std::span<const Sample> samples) {
  if (samples.size() < 2) throw Error("build_features needs at least 2 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(samples.front().point.size());
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = samples[static_cast<std::size_t>(i)].performance;
  const double mean = p.mean();
  const double var = (p.array() - mean).square().mean();
  const bool keep_p = var > 0.0;
  FeatureMatrix f(n, d + (keep_p ? 1 : 0));
  const double sd = keep_p ? std::sqrt(var) : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = samples[static_cast<std::size_t>(i)].point.coords;
    if (pt.size() != d) throw DimensionMismatch("samples disagree on dimension");
    f.row(i).head(d) = pt.transpose();
    if (keep_p) f(i, d) = (p[i] - mean) / sd;
  }
  return f;
}

Eigen::MatrixXd knob_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(samples.front().point.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = samples[static_cast<std::size_t>(i)].point.coords.transpose();
  }
  return x;
}

Eigen::MatrixXd cosine_affinity(const FeatureMatrix& features, double gamma) {
  const Eigen::Index n = features.rows();
  Eigen::MatrixXd unit = features;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (unit.row(i).norm() < kZeroRowNorm) unit.row(i).array() += kZeroShift;
    const double norm = unit.row(i).norm();
    if (norm < kZeroRowNorm) {
      throw Unsplittable(UnsplittableReason::degenerate_features,
                         "zero-magnitude feature row " + std::to_string(i));
    }
    unit.row(i) /= norm;
  }
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double cos = std::clamp(unit.row(i).dot(unit.row(j)), -1.0, 1.0);
      const double v = std::exp(-gamma * (1.0 - cos) * (1.0 - cos));
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& affinity) {
  const Eigen::Index n = affinity.rows();
  const Eigen::VectorXd degree = affinity.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(degree[i] > 0.0)) {
      throw Unsplittable(UnsplittableReason::degenerate_features, "isolated affinity row");
    }
    inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  }
  Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  // Symmetrize away rounding so the self-adjoint solver sees an exact mirror.
  return 0.5 * (l + l.transpose());
}

Eigen::MatrixXd spectral_embedding(const FeatureMatrix& features, double gamma) {
  const Eigen::MatrixXd lap = normalized_laplacian(cosine_affinity(features, gamma));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw SolverError("Laplacian eigensolver failed");
  return solver.eigenvectors().leftCols(std::min<Eigen::Index>(2, lap.rows()));
}

RawLabels spectral_split(const FeatureMatrix& features, double gamma, std::uint64_t seed) {
  if (features.rows() < 2) {
    throw Unsplittable(UnsplittableReason::too_few_samples, "spectral split needs 2 samples");
  }
  if (all_rows_identical(features)) {
    throw Unsplittable(UnsplittableReason::degenerate_features, "all feature rows identical");
  }
  return two_means(spectral_embedding(features, gamma), seed);
}

double median_pairwise_distance(const FeatureMatrix& features) {
  const Eigen::Index n = features.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((features.row(i) - features.row(j)).norm());
  }
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  if (d.size() % 2 == 1) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Eigen::MatrixXd rbf_kernel(const FeatureMatrix& features, double sigma) {
  if (!(sigma > 0.0)) {
    throw Unsplittable(UnsplittableReason::degenerate_features, "RBF bandwidth must be positive");
  }
  Eigen::MatrixXd k = pairwise_sq_distances(features);
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (k.array() * scale).exp().matrix();
}

KernelPcaResult kernel_pca(const FeatureMatrix& features, double sigma,
                           std::size_t k_components) {
  if (k_components == 0 || k_components > 5) {
    throw Error("kernel PCA keeps between 1 and 5 components");
  }
  const Eigen::Index n = features.rows();
  const Eigen::MatrixXd k = rbf_kernel(features, sigma);
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const double all_mean = k.mean();
  Eigen::MatrixXd centered = k;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      centered(i, j) = k(i, j) - row_mean[i] - row_mean[j] + all_mean;
    }
  }
  centered = 0.5 * (centered + centered.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered);
  if (solver.info() != Eigen::Success) throw SolverError("kernel PCA eigensolver failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const double top = std::max(values[n - 1], 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (values[i] > 1e-10 * std::max(top, 1e-300) && values[i] > 1e-12) ++rank;
  }
  KernelPcaResult r;
  r.dimension = std::min(k_components, rank);
  if (r.dimension == 0) {
    throw Unsplittable(UnsplittableReason::degenerate_features, "centered kernel has rank 0");
  }
  r.projection.resize(n, static_cast<Eigen::Index>(r.dimension));
  for (std::size_t c = 0; c < r.dimension; ++c) {
    const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(c);
    r.projection.col(static_cast<Eigen::Index>(c)) =
        solver.eigenvectors().col(col) * std::sqrt(values[col]);
  }
  return r;
}

KpcaSplit kpca_kmedoids_split(const FeatureMatrix& features, double sigma,
                              std::size_t k_components) {
  if (features.rows() < 2) {
    throw Unsplittable(UnsplittableReason::too_few_samples, "kernel PCA split needs 2 samples");
  }
  if (all_rows_identical(features)) {
    throw Unsplittable(UnsplittableReason::degenerate_features, "all feature rows identical");
  }
  const KernelPcaResult pca = kernel_pca(features, sigma, k_components);
  return KpcaSplit{two_medoids(pca.projection), pca.dimension};
}

RawLabels two_means(const Eigen::MatrixXd& points, std::uint64_t seed, int reseeds) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw Unsplittable(UnsplittableReason::too_few_samples, "2-means needs 2 points");
  Rng rng(seed);

  auto lloyd = [&](Eigen::Index a, Eigen::Index b, RawLabels& labels) {
    Eigen::RowVectorXd c0 = points.row(a);
    Eigen::RowVectorXd c1 = points.row(b);
    labels.assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = (points.row(i) - c1).squaredNorm() < (points.row(i) - c0).squaredNorm() ? 1 : 0;
        if (labels[static_cast<std::size_t>(i)] != l) {
          labels[static_cast<std::size_t>(i)] = l;
          changed = true;
        }
      }
      Eigen::RowVectorXd s0 = Eigen::RowVectorXd::Zero(points.cols());
      Eigen::RowVectorXd s1 = s0;
      std::size_t n0 = 0;
      std::size_t n1 = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] == 0) {
          s0 += points.row(i);
          ++n0;
        } else {
          s1 += points.row(i);
          ++n1;
        }
      }
      if (n0 == 0 || n1 == 0) return false;
      c0 = s0 / static_cast<double>(n0);
      c1 = s1 / static_cast<double>(n1);
      if (!changed) break;
    }
    return true;
  };

  // Farthest-point seeding from a random start.
  const auto start = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
  Eigen::Index far = start;
  double best = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (points.row(i) - points.row(start)).squaredNorm();
    if (d > best) {
      best = d;
      far = i;
    }
  }
  RawLabels labels;
  if (best > 0.0 && lloyd(start, far, labels)) return labels;
  for (int attempt = 0; attempt < reseeds; ++attempt) {
    const auto a = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    auto b = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n - 1)));
    if (b >= a) ++b;
    if ((points.row(a) - points.row(b)).squaredNorm() > 0.0 && lloyd(a, b, labels)) return labels;
  }
  throw Unsplittable(UnsplittableReason::empty_cluster, "2-means left a cluster empty");
}

RawLabels two_medoids(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw Unsplittable(UnsplittableReason::too_few_samples, "2-medoids needs 2 points");
  Eigen::MatrixXd dist = pairwise_sq_distances(points).cwiseSqrt();

  Eigen::Index m0 = 0;
  dist.rowwise().sum().minCoeff(&m0);
  Eigen::Index m1 = -1;
  double best_gain = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == m0) continue;
    double gain = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) gain += std::max(0.0, dist(j, m0) - dist(j, i));
    if (gain > best_gain) {
      best_gain = gain;
      m1 = i;
    }
  }
  if (m1 < 0) throw Unsplittable(UnsplittableReason::empty_cluster, "no second medoid improves cost");

  RawLabels labels(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 300; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = dist(i, m1) < dist(i, m0) ? 1 : 0;
    }
    bool moved = false;
    for (int c = 0; c < 2; ++c) {
      Eigen::Index& medoid = c == 0 ? m0 : m1;
      double best_cost = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] == c) best_cost += dist(medoid, j);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != c || i == medoid) continue;
        double cost = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (labels[static_cast<std::size_t>(j)] == c) cost += dist(i, j);
        }
        if (cost < best_cost - 1e-12) {
          best_cost = cost;
          medoid = i;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = dist(i, m1) < dist(i, m0) ? 1 : 0;
  }
  if (std::count(labels.begin(), labels.end(), 1) == 0 ||
      std::count(labels.begin(), labels.end(), 0) == 0) {
    throw Unsplittable(UnsplittableReason::empty_cluster, "2-medoids left a cluster empty");
  }
  return labels;
}

ClusterLabeling label_by_performance(std::span<const Sample> samples, const RawLabels& raw) {
  if (raw.size() != samples.size()) throw DimensionMismatch("one label per sample required");
  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  std::array<double, 2> best{-std::numeric_limits<double>::infinity(),
                             -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int l = raw[i];
    if (l != 0 && l != 1) throw Error("cluster labels must be 0 or 1");
    sum[static_cast<std::size_t>(l)] += samples[i].performance;
    ++count[static_cast<std::size_t>(l)];
    best[static_cast<std::size_t>(l)] = std::max(best[static_cast<std::size_t>(l)], samples[i].performance);
  }
  if (count[0] == 0 || count[1] == 0) {
    throw Unsplittable(UnsplittableReason::empty_cluster, "labeling has an empty cluster");
  }
  const double mean0 = sum[0] / static_cast<double>(count[0]);
  const double mean1 = sum[1] / static_cast<double>(count[1]);
  ClusterLabeling out{raw, 0};
  if (mean1 > mean0) out.high_label = 1;
  else if (mean1 == mean0 && best[1] > best[0]) out.high_label = 1;
  return out;
}

LinearSvm train_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double c_reg,
                           double tolerance, std::size_t max_iterations) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw DimensionMismatch("one label per row required");
  if (!(c_reg > 0.0)) throw Error("SVM regularization must be positive");
  bool has_pos = false;
  bool has_neg = false;
  for (const int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw Error("SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw Error("SVM training needs both classes");

  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::VectorXd yd(n);
  for (Eigen::Index i = 0; i < n; ++i) yd[i] = static_cast<double>(y[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd q = (yd * yd.transpose()).cwiseProduct(gram);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - 1
  constexpr double kTau = 1e-12;
  const double c = c_reg;

  auto in_up = [&](Eigen::Index t) {
    return (yd[t] > 0 && alpha[t] < c) || (yd[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (yd[t] < 0 && alpha[t] < c) || (yd[t] > 0 && alpha[t] > 0);
  };

  std::size_t iter = 0;
  for (; iter < max_iterations; ++iter) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -yd[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || g_max - g_min < tolerance) break;

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (yd[i] != yd[j]) {
      const double quad = std::max(q(i, i) + q(j, j) + 2.0 * q(i, j), kTau);
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double quad = std::max(q(i, i) + q(j, j) - 2.0 * q(i, j), kTau);
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    grad += q.col(i) * dai + q.col(j) * daj;
  }
  if (iter >= max_iterations) {
    throw SolverError("SMO did not converge in " + std::to_string(max_iterations) + " iterations");
  }

  // Offset from the free support vectors, else the midpoint of the feasible
  // interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = yd[t] * grad[t];
    if (alpha[t] >= c) {
      if (yd[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (yd[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

  LinearSvm model;
  model.w = x.transpose() * alpha.cwiseProduct(yd);
  model.b = -rho;
  model.iterations = iter;
  return model;
}

SplitResult fit_boundary(const Eigen::MatrixXd& knob_coords, const ClusterLabeling& labeling,
                         double c_reg) {
  const Eigen::Index n = knob_coords.rows();
  if (static_cast<std::size_t>(n) != labeling.labels.size()) {
    throw DimensionMismatch("one label per sample required");
  }
  std::vector<int> y(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = labeling.labels[i] == labeling.high_label ? 1 : -1;
  if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0) {
    throw Error("fit_boundary needs two non-empty clusters");
  }
  const LinearSvm svm = train_linear_svm(knob_coords, y, c_reg);
  if (!(svm.w.norm() > 1e-12)) throw SolverError("SVM produced a zero normal");

  SplitResult r;
  r.high_constraint = RegionConstraint{svm.w, svm.b, 1};
  r.low_constraint = r.high_constraint.negated();
  r.labeling = labeling;
  r.on_high_side.resize(static_cast<std::size_t>(n));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool high = r.high_constraint.satisfied_by(knob_coords.row(i).transpose());
    r.on_high_side[static_cast<std::size_t>(i)] = high;
    if (high == (y[static_cast<std::size_t>(i)] == 1)) ++correct;
  }
  r.training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return r;
}

ClusteringStage choose_stage(std::size_t sample_count, std::size_t tau,
                             ClusteringVariant variant) noexcept {
  switch (variant) {
    case ClusteringVariant::two_stage:
      return sample_count <= tau ? ClusteringStage::spectral : ClusteringStage::kernel_pca;
    case ClusteringVariant::kmeans: return ClusteringStage::kmeans;
    case ClusteringVariant::spectral: return ClusteringStage::spectral;
    case ClusteringVariant::kernel_pca: return ClusteringStage::kernel_pca;
  }
  return ClusteringStage::spectral;
}

SplitResult decompose(std::span<const Sample> samples, const DecomposeParams& params) {
  if (samples.size() < std::max<std::size_t>(params.min_split_size, 2)) {
    throw Unsplittable(UnsplittableReason::too_few_samples,
                       std::to_string(samples.size()) + " samples is below the split minimum");
  }
  const FeatureMatrix features = build_features(samples);
  const ClusteringStage stage = choose_stage(samples.size(), params.tau, params.variant);

  RawLabels raw;
  switch (stage) {
    case ClusteringStage::spectral:
      raw = spectral_split(features, params.gamma, params.seed);
      break;
    case ClusteringStage::kernel_pca: {
      const double sigma = params.sigma.value_or(median_pairwise_distance(features));
      raw = kpca_kmedoids_split(features, sigma, params.k_components).labels;
      break;
    }
    case ClusteringStage::kmeans:
      if (all_rows_identical(features)) {
        throw Unsplittable(UnsplittableReason::degenerate_features, "all feature rows identical");
      }
      raw = two_means(features, params.seed);
      break;
  }

  const ClusterLabeling labeling = label_by_performance(samples, raw);
  SplitResult split;
  try {
    split = fit_boundary(knob_matrix(samples), labeling, params.c_reg);
  } catch (const SolverError& e) {
    throw Unsplittable(UnsplittableReason::solver_failure, e.what());
  }
  split.stage = stage;
  if (split.training_accuracy < params.accuracy_floor) {
    throw Unsplittable(UnsplittableReason::low_accuracy,
                       "boundary accuracy " + std::to_string(split.training_accuracy) +
                           " below floor");
  }
  double sum_high = 0.0;
  double sum_low = 0.0;
  std::size_t n_high = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (split.on_high_side[i]) {
      sum_high += samples[i].performance;
      ++n_high;
    } else {
      sum_low += samples[i].performance;
    }
  }
  const std::size_t n_low = samples.size() - n_high;
  if (n_high == 0 || n_low == 0) {
    throw Unsplittable(UnsplittableReason::one_sided, "boundary leaves one side empty");
  }
  if (sum_high / static_cast<double>(n_high) < sum_low / static_cast<double>(n_low)) {
    throw Unsplittable(UnsplittableReason::inverted_means,
                       "high side of the boundary has the lower mean");
  }
  return split;
}

}  // namespace decotune
