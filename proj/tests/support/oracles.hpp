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

// Reference computations the library is checked against. Each is written
// independently of the code under test, favouring obviousness over speed.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace oracle {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a, double tol = 1e-14,
                                       int max_sweeps = 200);

/// Inverse by Gauss-Jordan elimination with partial pivoting.
Eigen::MatrixXd gauss_jordan_inverse(const Eigen::MatrixXd& a);

/// Adjusted Rand index of two labelings of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// 2-medoid clustering minimizing total distance, over every medoid pair.
std::vector<int> exhaustive_two_medoids(const Eigen::MatrixXd& points);

struct DualSolution {
  Eigen::VectorXd w;
  double b = 0.0;
};

/// Soft-margin linear SVM with the bias folded into the weights (an extra
/// constant feature), solved by projected gradient ascent on the box-
/// constrained dual.
DualSolution svm_projected_gradient(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                    double c, int iterations = 20000);

/// Two points x1 (y = +1) and x2 (y = -1), hard margin: w = 2 (x1 - x2) / |x1 - x2|^2,
/// b = -(w . (x1 + x2)) / 2.
DualSolution svm_two_points(const Eigen::VectorXd& x_high, const Eigen::VectorXd& x_low);

/// Closed-form expected improvement for maximization, via erfc.
double expected_improvement(double mean, double sd, double incumbent);

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& length_scales, double signal_variance);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Posterior of a zero-mean GP on centred targets, through an explicit
/// inverse of the Gram matrix.
GpPrediction gp_posterior(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y,
                          const Eigen::VectorXd& query,
                          const std::function<double(const Eigen::VectorXd&,
                                                     const Eigen::VectorXd&)>& kernel,
                          double noise_variance);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace oracle
