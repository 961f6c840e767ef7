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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "decotune/config_space.hpp"
#include "decotune/error.hpp"

namespace decotune {

/// An encoded configuration and its relative performance p(r).
struct Sample {
  UnitPoint point;
  double performance = 0.0;
};

/// Rows are samples; columns are knob coordinates followed by the
/// standardized performance (dropped when performance has zero variance).
using FeatureMatrix = Eigen::MatrixXd;

/// Raw 0/1 cluster ids before the high-performance cluster is identified.
using RawLabels = std::vector<int>;

struct ClusterLabeling {
  std::vector<int> labels;
  int high_label = 0;

  std::size_t count(int label) const;
};

/// Half-space w.x + b with a side: sign +1 keeps w.x + b >= 0, sign -1
/// keeps w.x + b < 0. Hyperplane points therefore belong to the +1 side.
struct RegionConstraint {
  Eigen::VectorXd normal;
  double offset = 0.0;
  int required_sign = 1;

  double value(const Eigen::VectorXd& x) const { return normal.dot(x) + offset; }
  bool satisfied_by(const Eigen::VectorXd& x) const;
  RegionConstraint negated() const { return {normal, offset, -required_sign}; }
};

enum class ClusteringStage { spectral, kernel_pca, kmeans };
enum class ClusteringVariant { two_stage, kmeans, spectral, kernel_pca };

std::string_view to_string(ClusteringStage stage) noexcept;
std::string_view to_string(ClusteringVariant variant) noexcept;
ClusteringVariant clustering_variant_from_string(std::string_view text);

struct SplitResult {
  /// Always required_sign +1; the low constraint is its negation.
  RegionConstraint high_constraint;
  RegionConstraint low_constraint;
  ClusterLabeling labeling;
  double training_accuracy = 0.0;
  ClusteringStage stage = ClusteringStage::spectral;
  /// Per input sample: does it satisfy the high constraint.
  std::vector<bool> on_high_side;
};

enum class UnsplittableReason {
  too_few_samples,
  degenerate_features,
  empty_cluster,
  solver_failure,
  low_accuracy,
  one_sided,
  inverted_means,
};

std::string_view to_string(UnsplittableReason reason) noexcept;

class Unsplittable : public Error {
 public:
  Unsplittable(UnsplittableReason reason, const std::string& what)
      : Error(what), reason_(reason) {}
  UnsplittableReason reason() const noexcept { return reason_; }

 private:
  UnsplittableReason reason_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

struct DecomposeParams {
  std::size_t tau = 50;
  double gamma = 1.0;
  /// RBF bandwidth; the median pairwise feature distance when unset.
  std::optional<double> sigma;
  std::size_t k_components = 5;
  double c_reg = 10.0;
  std::size_t min_split_size = 8;
  double accuracy_floor = 0.8;
  ClusteringVariant variant = ClusteringVariant::two_stage;
  std::uint64_t seed = 0;
};

FeatureMatrix build_features(std::span<const Sample> samples);

/// Knob coordinates only, one row per sample.
Eigen::MatrixXd knob_matrix(std::span<const Sample> samples);

/// W_ij = exp(-gamma * (1 - cos(x_i, x_j))^2).
Eigen::MatrixXd cosine_affinity(const FeatureMatrix& features, double gamma);

/// I - D^{-1/2} W D^{-1/2}.
Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& affinity);

/// Rows of the eigenvectors belonging to the two smallest eigenvalues of the
/// normalized Laplacian.
Eigen::MatrixXd spectral_embedding(const FeatureMatrix& features, double gamma);

RawLabels spectral_split(const FeatureMatrix& features, double gamma, std::uint64_t seed = 0);

double median_pairwise_distance(const FeatureMatrix& features);

/// K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)).
Eigen::MatrixXd rbf_kernel(const FeatureMatrix& features, double sigma);

struct KernelPcaResult {
  /// n x dimension, columns scaled by sqrt(eigenvalue).
  Eigen::MatrixXd projection;
  std::size_t dimension = 0;
};

KernelPcaResult kernel_pca(const FeatureMatrix& features, double sigma,
                           std::size_t k_components);

struct KpcaSplit {
  RawLabels labels;
  std::size_t projection_dimension = 0;
};

KpcaSplit kpca_kmedoids_split(const FeatureMatrix& features, double sigma,
                              std::size_t k_components);

/// Lloyd's 2-means with farthest-point seeding; re-seeds at random up to
/// `reseeds` times when a cluster empties.
RawLabels two_means(const Eigen::MatrixXd& points, std::uint64_t seed, int reseeds = 5);

/// 2-medoids: greedy BUILD initialisation, then alternate assignment and
/// medoid update until the medoids stop moving.
RawLabels two_medoids(const Eigen::MatrixXd& points);

ClusterLabeling label_by_performance(std::span<const Sample> samples, const RawLabels& raw);

struct LinearSvm {
  Eigen::VectorXd w;
  double b = 0.0;
  std::size_t iterations = 0;
};

/// Soft-margin linear SVM through the dual, solved by SMO with
/// maximal-violating-pair selection. Labels are +1 / -1.
LinearSvm train_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double c_reg,
                           double tolerance = 1e-5, std::size_t max_iterations = 200000);

/// Boundary between the labelled clusters over knob coordinates.
SplitResult fit_boundary(const Eigen::MatrixXd& knob_coords, const ClusterLabeling& labeling,
                         double c_reg);

ClusteringStage choose_stage(std::size_t sample_count, std::size_t tau,
                             ClusteringVariant variant) noexcept;

/// Splits a region's samples into a high- and a low-performance side.
/// Throws Unsplittable when no usable boundary exists.
SplitResult decompose(std::span<const Sample> samples, const DecomposeParams& params);

}  // namespace decotune
