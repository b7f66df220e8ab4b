// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gspace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// One example's gradient. Ids are supplied by the caller so partitions can
/// be joined back to the originating dataset.
struct GradientRecord {
  std::uint64_t id = 0;
  Vector vector;
  std::optional<std::string> source_tag;  // ground-truth label, evaluation only
  std::optional<std::string> text;        // payload for cluster summaries

  bool operator==(const GradientRecord& other) const;
};

/// n gradient rows stacked row-major with a parallel id list. Never empty.
class GradientMatrix {
 public:
  GradientMatrix(Matrix rows, std::vector<std::uint64_t> ids);

  static GradientMatrix from_records(std::span<const GradientRecord> records);

  const Matrix& rows() const { return rows_; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }

 private:
  Matrix rows_;
  std::vector<std::uint64_t> ids_;
};

/// Cosine of the angle between a and b, clamped to [-1, 1].
/// Throws ZeroVectorError for a zero-norm argument and ValidationError on a
/// dimension mismatch.
double cosine_similarity(const VectorRef& a, const VectorRef& b);

/// Unit vector in the direction of v. Throws ZeroVectorError when ||v|| == 0.
Vector normalize(const VectorRef& v);

/// Row-wise normalization; `ids` (optional, parallel to rows) names the
/// offending row in the error message.
Matrix normalize_rows(const Matrix& rows, std::span<const std::uint64_t> ids = {});

bool all_finite(const VectorRef& v);

}  // namespace gspace
