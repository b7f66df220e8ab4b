// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Cluster-count estimation and centroid initialization from the spectrum of
// a validation gradient matrix: thin SVD, explained-variance subspace
// selection, K-means in the projected subspace, silhouette-based K choice,
// and lifting of the subspace centroids back to full dimension.

#include <cstdint>
#include <span>
#include <vector>

#include "gspace/centroids.hpp"
#include "gspace/grad_core.hpp"
#include "json.hpp"

namespace gspace {

struct ThinSvd {
  Matrix u;        // n x r
  Vector sigma;    // r, nonincreasing
  Matrix v;        // d x r, orthonormal columns
};

/// G = U diag(sigma) V^T with r = min(n, d). In every right singular vector
/// the largest-magnitude entry is positive (ties: lowest index).
ThinSvd thin_svd(const Matrix& g);

/// Fraction of sum(sigma^2) captured by the first k values, 1 <= k <= r.
double explained_variance(const Vector& sigma, std::size_t k);

/// Smallest k with explained_variance(sigma, k) >= tau, tau in (0, 1].
std::size_t subspace_dim_for_threshold(const Vector& sigma, double tau);

/// G * V_k (first k columns of v).
Matrix project(const Matrix& g, const Matrix& v, std::size_t k);

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;                 // K x dim
  std::vector<double> wcss_history;  // one entry per Lloyd iteration
  double wcss = 0.0;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the lowest
/// centroid index; an empty cluster takes the point farthest from its current
/// centroid. With restarts > 1 the lowest-WCSS run wins (ties: earliest).
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                    std::size_t restarts = 1);

/// Symmetric n x n Euclidean distance matrix.
Matrix pairwise_distances(const Matrix& points);

/// Mean silhouette over all points (Euclidean). Singleton clusters score 0.
/// Throws DegenerateError when fewer than two clusters are present.
double silhouette(const Matrix& points, std::span<const std::size_t> labels);
double silhouette_from_distances(const Matrix& distances, std::span<const std::size_t> labels);

struct SpectralCandidate {
  double tau = 0.0;
  std::size_t subspace_dim = 0;
  std::size_t k = 0;
  double silhouette = 0.0;
};

struct SpectralReport {
  std::vector<double> singular_values;
  std::vector<double> explained_variance_curve;  // entry i is EV(i + 1)
  std::vector<SpectralCandidate> candidates;     // ordered by (tau, K)
  double chosen_tau = 0.0;
  std::size_t chosen_subspace_dim = 0;
  std::size_t chosen_k = 0;
  double chosen_silhouette = 0.0;
  std::size_t rows_used = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const SpectralReport& report);

struct SelectKOptions {
  std::vector<double> tau_list{0.80, 0.85, 0.90, 0.95};
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  std::size_t restarts = 4;
  std::size_t max_validation_rows = 2048;
};

struct SpectralInit {
  SpectralReport report;
  CentroidSet centroids;
};

/// Sweeps every (tau, K) pair, keeps the highest silhouette (ties: smaller K,
/// then smaller tau) and lifts that run's centroids to full dimension.
SpectralInit select_k(const Matrix& g, const SelectKOptions& options);

/// c = V_k c_proj for each row of `centroids_proj`, normalized.
CentroidSet lift_centroids(const Matrix& centroids_proj, const Matrix& v, std::size_t k);

}  // namespace gspace
