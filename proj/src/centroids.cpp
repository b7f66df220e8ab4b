// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/centroids.hpp"

#include <cmath>
#include <map>

#include "gspace/error.hpp"
#include "gspace/stream.hpp"

namespace gspace {

CentroidSet::CentroidSet(Matrix centroids, std::size_t epoch, bool renormalize)
    : centroids_(std::move(centroids)), epoch_(epoch) {
  if (centroids_.rows() == 0) throw ValidationError("centroid set must contain K >= 1 centroids");
  if (centroids_.cols() == 0) throw ValidationError("centroid dimension must be >= 1");
  for (Eigen::Index i = 0; i < centroids_.rows(); ++i) {
    const double n = centroids_.row(i).norm();
    if (!std::isfinite(n) || n == 0.0)
      throw ZeroVectorError("centroid " + std::to_string(i) + " has zero or non-finite norm");
    if (renormalize) {
      centroids_.row(i) /= n;
    } else if (std::abs(n - 1.0) > 1e-9) {
      throw ValidationError("centroid " + std::to_string(i) + " is not unit norm (" + std::to_string(n) + ")");
    }
  }
  for (Eigen::Index i = 0; i < centroids_.rows(); ++i)
    for (Eigen::Index j = i + 1; j < centroids_.rows(); ++j)
      if ((centroids_.row(i).array() == centroids_.row(j).array()).all())
        throw ValidationError("centroids " + std::to_string(i) + " and " + std::to_string(j) + " are identical");
}

void write_centroids(const CentroidSet& centroids, const std::filesystem::path& path) {
  std::vector<GradientRecord> records;
  records.reserve(centroids.k());
  for (std::size_t i = 0; i < centroids.k(); ++i) records.push_back({i, centroids.centroid(i), {}, {}});
  write_stream(records, path, WriteOptions{.normalized = true});
}

CentroidSet read_centroids(const std::filesystem::path& path) {
  auto source = open_stream(path);
  auto records = read_all(*source);
  if (records.empty()) throw FormatError(path.string() + ": centroid checkpoint is empty");
  std::map<std::uint64_t, Vector> by_id;
  for (auto& r : records) by_id.emplace(r.id, std::move(r.vector));
  Matrix m(static_cast<Eigen::Index>(by_id.size()), static_cast<Eigen::Index>(by_id.begin()->second.size()));
  std::uint64_t expected = 0;
  for (const auto& [id, v] : by_id) {
    if (id != expected)
      throw FormatError(path.string() + ": centroid ids must be 0..K-1, missing " + std::to_string(expected));
    m.row(static_cast<Eigen::Index>(id)) = v.transpose();
    ++expected;
  }
  // Stored as f32, so norms are only 1 to ~1e-7.
  return CentroidSet(std::move(m), 0, /*renormalize=*/true);
}

}  // namespace gspace
