// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>

#include "gspace/grad_core.hpp"

namespace gspace {

/// K unit-norm prototype gradients in R^d.
class CentroidSet {
 public:
  /// Rows are renormalized when `renormalize` is set; otherwise each row must
  /// already have norm 1 +- 1e-9. Throws on K == 0, zero rows or duplicates.
  explicit CentroidSet(Matrix centroids, std::size_t epoch = 0, bool renormalize = false);

  const Matrix& matrix() const { return centroids_; }
  std::size_t k() const { return static_cast<std::size_t>(centroids_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids_.cols()); }
  std::size_t epoch() const { return epoch_; }
  Vector centroid(std::size_t i) const { return centroids_.row(static_cast<Eigen::Index>(i)).transpose(); }

 private:
  Matrix centroids_;
  std::size_t epoch_;
};

/// Checkpoints are ordinary gradient streams with id = cluster index and the
/// normalized flag set.
void write_centroids(const CentroidSet& centroids, const std::filesystem::path& path);
CentroidSet read_centroids(const std::filesystem::path& path);

}  // namespace gspace
