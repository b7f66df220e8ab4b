// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/grad_core.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gspace/error.hpp"
#include "test_util.hpp"

namespace gspace {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(Cosine, IdenticalVectorsGiveOne) { EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0, 0}), vec({1, 0, 0})), 1.0); }

TEST(Cosine, OrthogonalVectorsGiveZero) { EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0}), vec({0, 1})), 0.0); }

TEST(Cosine, HandValue) {
  // (2 + 4 + 2) / (3 * 3)
  EXPECT_NEAR(cosine_similarity(vec({1, 2, 2}), vec({2, 2, 1})), 8.0 / 9.0, 1e-15);
}

TEST(Cosine, ZeroVectorIsAnError) {
  EXPECT_THROW(cosine_similarity(vec({0, 0}), vec({1, 0})), ZeroVectorError);
  EXPECT_THROW(cosine_similarity(vec({1, 0}), vec({0, 0})), ZeroVectorError);
}

TEST(Cosine, DimensionMismatchIsAnError) {
  EXPECT_THROW(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), ValidationError);
}

TEST(Cosine, ClampedAgainstRoundOff) {
  const Vector a = vec({0.1, 0.2, 0.3});
  const double c = cosine_similarity(a, a * 3.0);
  EXPECT_LE(c, 1.0);
  EXPECT_NEAR(c, 1.0, 1e-15);
  EXPECT_GE(cosine_similarity(a, -a), -1.0);
}

TEST(CosineProperty, SymmetricAndScaleInvariant) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    const auto d = 1 + static_cast<Eigen::Index>(rng() % 32);
    const Vector a = testing::random_vector(rng, d);
    const Vector b = testing::random_vector(rng, d);
    EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
    EXPECT_NEAR(cosine_similarity(scale(rng) * a, b), cosine_similarity(a, b), 1e-12);
  }
}

TEST(Normalize, Examples) {
  const Vector n = normalize(vec({3, 4}));
  EXPECT_NEAR(n[0], 0.6, 1e-15);
  EXPECT_NEAR(n[1], 0.8, 1e-15);
  const Vector axis = normalize(vec({0, 0, 5}));
  EXPECT_EQ(axis, vec({0, 0, 1}));
}

TEST(Normalize, ZeroVectorIsAnError) { EXPECT_THROW(normalize(vec({0, 0, 0})), ZeroVectorError); }

TEST(NormalizeProperty, UnitNormIdempotentAndAligned) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto d = 1 + static_cast<Eigen::Index>(rng() % 64);
    const Vector v = testing::random_vector(rng, d, 10.0);
    const Vector u = normalize(v);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_LE((normalize(u) - u).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(cosine_similarity(u, v), 1.0, 1e-12);
  }
}

TEST(NormalizeRows, NamesTheZeroRow) {
  Matrix m(2, 2);
  m << 1, 1, 0, 0;
  const std::vector<std::uint64_t> ids{10, 42};
  try {
    normalize_rows(m, ids);
    FAIL() << "expected ZeroVectorError";
  } catch (const ZeroVectorError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
}

TEST(GradientMatrix, RejectsEmptyAndMismatchedIds) {
  EXPECT_THROW(GradientMatrix(Matrix(0, 3), {}), ValidationError);
  EXPECT_THROW(GradientMatrix(Matrix::Ones(2, 3), {1}), ValidationError);
  const GradientMatrix g(Matrix::Ones(2, 3), {5, 6});
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.dim(), 3u);
}

TEST(GradientMatrix, FromRecordsStacksInOrder) {
  std::vector<GradientRecord> recs{{3, vec({1, 2}), std::nullopt, std::nullopt},
                                   {1, vec({3, 4}), std::string("a"), std::nullopt}};
  const auto g = GradientMatrix::from_records(recs);
  EXPECT_EQ(g.ids(), (std::vector<std::uint64_t>{3, 1}));
  EXPECT_EQ(g.rows()(1, 0), 3.0);
  recs.push_back({9, vec({1, 2, 3}), std::nullopt, std::nullopt});
  EXPECT_THROW(GradientMatrix::from_records(recs), ValidationError);
}

TEST(AllFinite, DetectsNanAndInf) {
  EXPECT_TRUE(all_finite(vec({1, 2})));
  EXPECT_FALSE(all_finite(vec({1, std::nan("")})));
  EXPECT_FALSE(all_finite(vec({INFINITY, 0})));
}

}  // namespace
}  // namespace gspace
