// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/grad_core.hpp"

#include <algorithm>
#include <cmath>

#include "gspace/error.hpp"

namespace gspace {

bool GradientRecord::operator==(const GradientRecord& other) const {
  return id == other.id && source_tag == other.source_tag && text == other.text &&
         vector.size() == other.vector.size() && (vector.array() == other.vector.array()).all();
}

GradientMatrix::GradientMatrix(Matrix rows, std::vector<std::uint64_t> ids)
    : rows_(std::move(rows)), ids_(std::move(ids)) {
  if (rows_.rows() == 0) throw ValidationError("gradient matrix must have at least one row");
  if (rows_.cols() == 0) throw ValidationError("gradient matrix must have dimension >= 1");
  if (ids_.size() != static_cast<std::size_t>(rows_.rows()))
    throw ValidationError("gradient matrix: " + std::to_string(ids_.size()) + " ids for " +
                          std::to_string(rows_.rows()) + " rows");
}

GradientMatrix GradientMatrix::from_records(std::span<const GradientRecord> records) {
  if (records.empty()) throw ValidationError("gradient matrix must have at least one row");
  const auto dim = records.front().vector.size();
  Matrix rows(static_cast<Eigen::Index>(records.size()), dim);
  std::vector<std::uint64_t> ids;
  ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != dim)
      throw ValidationError("record " + std::to_string(records[i].id) + " has dimension " +
                            std::to_string(records[i].vector.size()) + ", expected " + std::to_string(dim));
    rows.row(static_cast<Eigen::Index>(i)) = records[i].vector.transpose();
    ids.push_back(records[i].id);
  }
  return GradientMatrix(std::move(rows), std::move(ids));
}

double cosine_similarity(const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size())
    throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroVectorError("cosine_similarity: zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Vector normalize(const VectorRef& v) {
  const double n = v.norm();
  if (n == 0.0) throw ZeroVectorError("normalize: zero-norm vector");
  return v / n;
}

Matrix normalize_rows(const Matrix& rows, std::span<const std::uint64_t> ids) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double n = rows.row(i).norm();
    if (n == 0.0) {
      const auto idx = static_cast<std::size_t>(i);
      throw ZeroVectorError("zero-norm gradient for id " +
                            std::to_string(idx < ids.size() ? ids[idx] : static_cast<std::uint64_t>(idx)));
    }
    out.row(i) = rows.row(i) / n;
  }
  return out;
}

bool all_finite(const VectorRef& v) { return v.allFinite(); }

}  // namespace gspace
