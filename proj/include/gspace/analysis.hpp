// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Variance bookkeeping for gradient partitions. Variance is the scalar
// E||g - mu||^2 with 1/n normalization throughout, which makes the
// within/between split exact.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gspace/grad_core.hpp"
#include "gspace/online.hpp"
#include "json.hpp"

namespace gspace {

/// Compensated sum (Neumaier).
class KahanSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Column mean of the rows, accumulated with compensation.
Vector compensated_mean(const Matrix& rows);

/// Mean squared L2 deviation from the mean row (two-pass, compensated).
double gradient_variance(const Matrix& rows);

/// E<X - EX, Y - EY> over paired rows.
double gradient_covariance(const Matrix& x, const Matrix& y);

struct MixtureVarianceResult {
  double lhs = 0.0;  // Var(sum_i alpha_i X_i)
  double rhs = 0.0;  // sum_i alpha_i^2 Var(X_i) + sum_{i != j} alpha_i alpha_j Cov(X_i, X_j)
  double relative_error = 0.0;
};

/// `subsets` are k sample matrices with identical shape; row t of every
/// matrix is one joint draw. Weights must be convex.
MixtureVarianceResult mixture_variance_check(std::span<const Matrix> subsets, std::span<const double> alphas);

struct VarianceReport {
  double total_variance = 0.0;
  std::vector<double> per_cluster_variance;
  std::vector<double> weights;
  std::vector<std::size_t> cluster_sizes;
  double within_term = 0.0;
  double between_term = 0.0;
  double variance_ratio = 0.0;
  double identity_residual = 0.0;  // |within + between - total| / total
  double mean_squared_norm = 0.0;
  std::vector<std::size_t> empty_clusters;
  std::vector<std::size_t> exceeding_clusters;  // clusters with Var(D_i) > Var(D)
};

/// Law-of-total-variance split for rows labelled 0..k-1.
VarianceReport total_variance_decomposition(const Matrix& rows, std::span<const std::size_t> labels, std::size_t k);

/// Joins partition ids against the gradient ids; every partitioned id must
/// have a gradient row.
VarianceReport total_variance_decomposition(const Partition& partition, const GradientMatrix& gradients);

nlohmann::ordered_json to_json(const VarianceReport& report);

/// Weighted within-cluster variance over total variance: the asymptotic
/// ratio of expected stationarity bounds. DegenerateError on zero variance.
double stationarity_ratio(const VarianceReport& report);

struct FlopsModel {
  double f_base = 0.0;
  double f_lora = 0.0;
  double f_sp = 0.0;
  double k = 0.0;  // experts ensembled per query by the gradient-routed baseline
};

enum class RoutingMethod { elrea, gradientspace };

struct FlopsEstimate {
  double router = 0.0;
  double total = 0.0;
};

/// Per-query inference cost. A backward pass is counted as twice a forward.
FlopsEstimate flops_estimate(const FlopsModel& model, RoutingMethod method);

}  // namespace gspace
