// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

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

// m unit directions (orthonormal, so pairwise cosine 0) plus per-coordinate
// Gaussian noise, rows normalized. Mode of row i is truth[i].
struct Mixture {
  Matrix rows;
  std::vector<std::size_t> truth;
  Matrix modes;
};

Mixture make_mixture(std::size_t m, std::size_t per_mode, Eigen::Index d, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd q = testing::random_matrix(rng, d, static_cast<Eigen::Index>(m));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
  Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, static_cast<Eigen::Index>(m));
  Mixture mix;
  mix.modes = basis.transpose();
  mix.rows.resize(static_cast<Eigen::Index>(m * per_mode), d);
  for (std::size_t i = 0; i < m * per_mode; ++i) {
    const auto t = i % m;
    Vector g = mix.modes.row(static_cast<Eigen::Index>(t)).transpose() + testing::random_vector(rng, d, sigma);
    mix.rows.row(static_cast<Eigen::Index>(i)) = g.normalized().transpose();
    mix.truth.push_back(t);
  }
  return mix;
}

// Direct O(n^2) silhouette, written independently of the library.
double silhouette_oracle(const Matrix& x, const std::vector<std::size_t>& labels) {
  const auto n = labels.size();
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
      ++cnt[labels[j]];
    }
    if (cnt[labels[i]] == 0) continue;  // singleton: 0
    const double a = sum[labels[i]] / static_cast<double>(cnt[labels[i]]);
    double b = INFINITY;
    for (std::size_t c = 0; c < k; ++c)
      if (c != labels[i] && cnt[c] > 0) b = std::min(b, sum[c] / static_cast<double>(cnt[c]));
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

TEST(ThinSvd, DiagonalMatrix) {
  Matrix g(2, 2);
  g << 2, 0, 0, 1;
  const auto s = thin_svd(g);
  EXPECT_NEAR(s.sigma[0], 2.0, 1e-14);
  EXPECT_NEAR(s.sigma[1], 1.0, 1e-14);
  // Sign convention: the dominant entry of each right singular vector is positive.
  EXPECT_NEAR(s.v(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(s.v(1, 1), 1.0, 1e-14);
}

TEST(ThinSvd, RankOneOuterProduct) {
  const Vector u = vec({1, 2, 2}) / 3.0;
  const Vector v = vec({0, 3, 4, 0}) / 5.0;
  const auto s = thin_svd(u * v.transpose());
  ASSERT_EQ(s.sigma.size(), 3);
  EXPECT_NEAR(s.sigma[0], 1.0, 1e-14);
  EXPECT_NEAR(s.sigma[1], 0.0, 1e-14);
  EXPECT_NEAR(s.sigma[2], 0.0, 1e-14);
  EXPECT_NEAR(std::abs(s.v.col(0).dot(v)), 1.0, 1e-14);
  EXPECT_GT(s.v(2, 0), 0.0);
}

TEST(ThinSvd, ReconstructsRandomMatrix) {
  std::mt19937_64 rng(1);
  const Matrix g = testing::random_matrix(rng, 8, 5);
  const auto s = thin_svd(g);
  const Matrix back = s.u * s.sigma.asDiagonal() * s.v.transpose();
  EXPECT_LE((back - g).cwiseAbs().maxCoeff(), 1e-8 * g.cwiseAbs().maxCoeff());
}

TEST(ThinSvd, RejectsNonFinite) {
  Matrix g = Matrix::Ones(3, 3);
  g(1, 2) = std::nan("");
  EXPECT_THROW(thin_svd(g), ValidationError);
}

TEST(ThinSvdProperty, ReconstructionOrthonormalityAndSigns) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 25; ++t) {
    const auto n = 1 + static_cast<Eigen::Index>(rng() % 64);
    const auto d = 1 + static_cast<Eigen::Index>(rng() % 256);
    const Matrix g = testing::random_matrix(rng, n, d, 3.0);
    const auto s = thin_svd(g);
    const auto r = std::min(n, d);
    ASSERT_EQ(s.sigma.size(), r);
    ASSERT_EQ(s.v.cols(), r);
    const Matrix back = s.u * s.sigma.asDiagonal() * s.v.transpose();
    EXPECT_LE((back - g).cwiseAbs().maxCoeff(), 1e-8 * g.cwiseAbs().maxCoeff());
    EXPECT_LE((s.v.transpose() * s.v - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-9);
    for (Eigen::Index i = 1; i < r; ++i) EXPECT_LE(s.sigma[i], s.sigma[i - 1]);
    for (Eigen::Index c = 0; c < r; ++c) {
      Eigen::Index arg = 0;
      s.v.col(c).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(s.v(arg, c), 0.0);
    }
  }
}

TEST(ThinSvd, DeterministicAcrossCalls) {
  std::mt19937_64 rng(3);
  const Matrix g = testing::random_matrix(rng, 20, 12);
  const auto a = thin_svd(g), b = thin_svd(g);
  EXPECT_EQ(a.v, b.v);
  EXPECT_EQ(a.sigma, b.sigma);
}

TEST(ExplainedVariance, HandValues) {
  const Vector s = vec({2, 1, 1});
  EXPECT_NEAR(explained_variance(s, 1), 4.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(explained_variance(s, 3), 1.0);
  EXPECT_DOUBLE_EQ(explained_variance(vec({5, 0, 0}), 1), 1.0);
}

TEST(ExplainedVariance, Errors) {
  const Vector s = vec({2, 1, 1});
  EXPECT_THROW(explained_variance(s, 0), ValidationError);
  EXPECT_THROW(explained_variance(s, 4), ValidationError);
  EXPECT_THROW(explained_variance(vec({0, 0}), 1), DegenerateError);
}

TEST(ExplainedVarianceProperty, MonotoneAndEndsAtOne) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    const auto r = 1 + static_cast<Eigen::Index>(rng() % 30);
    Vector s(r);
    for (Eigen::Index i = 0; i < r; ++i) s[i] = u(rng);
    std::sort(s.data(), s.data() + r, std::greater<>());
    double prev = 0.0;
    for (std::size_t k = 1; k <= static_cast<std::size_t>(r); ++k) {
      const double ev = explained_variance(s, k);
      EXPECT_GE(ev, prev);
      EXPECT_LE(ev, 1.0);
      prev = ev;
    }
    EXPECT_DOUBLE_EQ(explained_variance(s, static_cast<std::size_t>(r)), 1.0);
  }
}

TEST(SubspaceDim, HandValues) {
  const Vector s = vec({2, 1, 1});
  EXPECT_EQ(subspace_dim_for_threshold(s, 0.6), 1u);
  EXPECT_EQ(subspace_dim_for_threshold(s, 0.9), 3u);
  EXPECT_EQ(subspace_dim_for_threshold(vec({1}), 1.0), 1u);
  EXPECT_EQ(subspace_dim_for_threshold(s, 1.0), 3u);
  EXPECT_THROW(subspace_dim_for_threshold(s, 0.0), ValidationError);
  EXPECT_THROW(subspace_dim_for_threshold(s, 1.5), ValidationError);
}

TEST(Project, FullRankIsIsometry) {
  std::mt19937_64 rng(5);
  const Matrix g = testing::random_matrix(rng, 10, 6);
  const auto s = thin_svd(g);
  const Matrix p = project(g, s.v, 6);
  for (Eigen::Index i = 0; i < g.rows(); ++i) EXPECT_NEAR(p.row(i).norm(), g.row(i).norm(), 1e-9);
}

TEST(Project, RowNormsNeverGrow) {
  std::mt19937_64 rng(6);
  const Matrix g = testing::random_matrix(rng, 30, 12);
  const auto s = thin_svd(g);
  for (std::size_t k = 1; k <= 12; ++k) {
    const Matrix p = project(g, s.v, k);
    ASSERT_EQ(p.cols(), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < g.rows(); ++i) EXPECT_LE(p.row(i).norm(), g.row(i).norm() + 1e-9);
  }
  EXPECT_THROW(project(g, s.v, 13), ValidationError);
  EXPECT_THROW(project(Matrix::Ones(3, 5), s.v, 1), ValidationError);
}

TEST(Project, DominantAxisPattern) {
  Matrix g(4, 2);
  g << 3, 0, -3, 0, 0, 1, 0, -1;
  const auto s = thin_svd(g);
  const Matrix p = project(g, s.v, 1);
  EXPECT_NEAR(p(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(p(1, 0), -3.0, 1e-12);
  EXPECT_NEAR(p(2, 0), 0.0, 1e-12);
  EXPECT_NEAR(p(3, 0), 0.0, 1e-12);
  // k = 1 gives each row's scalar component along the top direction.
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(p(i, 0), g.row(i).dot(s.v.col(0)), 1e-14);
}

Matrix two_blobs(std::mt19937_64& rng, std::vector<std::size_t>& truth) {
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), rad(0.0, 0.5);
  Matrix pts(40, 2);
  truth.clear();
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double cx = i < 20 ? 0.0 : 10.0;
    const double a = ang(rng), r = rad(rng);
    pts(i, 0) = cx + r * std::cos(a);
    pts(i, 1) = cx + r * std::sin(a);
    truth.push_back(i < 20 ? 0 : 1);
  }
  return pts;
}

TEST(KMeans, SeparatesTwoBlobs) {
  std::mt19937_64 rng(7);
  std::vector<std::size_t> truth;
  const Matrix pts = two_blobs(rng, truth);
  const auto res = kmeans(pts, 2, 42, 100);
  // Labels match blob membership up to renaming.
  const bool same = res.labels[0] == 0;
  for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_EQ(res.labels[i], same ? truth[i] : 1 - truth[i]);
}

TEST(KMeans, IdenticalPointsSingleCluster) {
  Matrix pts = Matrix::Constant(5, 3, 0.25);
  const auto res = kmeans(pts, 1, 0, 10);
  EXPECT_EQ(res.centroids.row(0), pts.row(0));
  EXPECT_DOUBLE_EQ(res.wcss, 0.0);
}

TEST(KMeans, OneClusterPerPoint) {
  std::mt19937_64 rng(8);
  const Matrix pts = testing::random_matrix(rng, 6, 3);
  const auto res = kmeans(pts, 6, 1, 50);
  EXPECT_DOUBLE_EQ(res.wcss, 0.0);
  std::vector<std::size_t> sorted = res.labels;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(KMeans, Errors) {
  const Matrix pts = Matrix::Ones(3, 2);
  EXPECT_THROW(kmeans(pts, 0, 0, 10), ValidationError);
  EXPECT_THROW(kmeans(pts, 4, 0, 10), ValidationError);
  EXPECT_THROW(kmeans(pts, 2, 0, 0), ValidationError);
}

TEST(KMeansProperty, WcssNonincreasingDeterministicNoEmptyClusters) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto n = 5 + static_cast<Eigen::Index>(rng() % 60);
    const auto k = 1 + rng() % std::min<std::size_t>(8, static_cast<std::size_t>(n));
    const Matrix pts = testing::random_matrix(rng, n, 1 + static_cast<Eigen::Index>(rng() % 5));
    const auto seed = rng();
    const auto a = kmeans(pts, k, seed, 100);
    const auto b = kmeans(pts, k, seed, 100);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
    for (std::size_t i = 1; i < a.wcss_history.size(); ++i)
      EXPECT_LE(a.wcss_history[i], a.wcss_history[i - 1] * (1 + 1e-12) + 1e-12);
    std::vector<std::size_t> counts(k, 0);
    for (auto l : a.labels) ++counts[l];
    for (auto c : counts) EXPECT_GT(c, 0u);
  }
}

TEST(KMeans, RestartsNeverWorseThanFirstRun) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 10; ++t) {
    const Matrix pts = testing::random_matrix(rng, 50, 3);
    const auto seed = rng();
    const auto many = kmeans(pts, 5, seed, 100, 4);
    // Restart 0 of the multi-run uses the same derived seed as a single run.
    const auto one = kmeans(pts, 5, seed, 100, 1);
    EXPECT_LE(many.wcss, one.wcss + 1e-12);
  }
}

TEST(Silhouette, SeparatedBlobsScoreHigh) {
  std::mt19937_64 rng(11);
  std::vector<std::size_t> truth;
  const Matrix pts = two_blobs(rng, truth);
  const double s = silhouette(pts, truth);
  EXPECT_GT(s, 0.9);
  EXPECT_NEAR(s, silhouette_oracle(pts, truth), 1e-12);
}

TEST(Silhouette, ShuffledLabelsScoreNearZero) {
  std::mt19937_64 rng(12);
  std::vector<std::size_t> truth;
  const Matrix pts = two_blobs(rng, truth);
  std::shuffle(truth.begin(), truth.end(), rng);
  const double s = silhouette(pts, truth);
  EXPECT_LT(std::abs(s), 0.2);
  EXPECT_NEAR(s, silhouette_oracle(pts, truth), 1e-12);
}

TEST(Silhouette, SingletonsScoreZeroAndSingleClusterIsAnError) {
  Matrix pts(2, 1);
  pts << 0, 1;
  EXPECT_DOUBLE_EQ(silhouette(pts, std::vector<std::size_t>{0, 1}), 0.0);
  EXPECT_THROW(silhouette(pts, std::vector<std::size_t>{0, 0}), DegenerateError);
}

TEST(SilhouetteProperty, MatchesOracleAndStaysInRange) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 40; ++t) {
    const auto n = 3 + static_cast<std::size_t>(rng() % 40);
    const Matrix pts = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 3);
    const std::size_t k = 2 + rng() % 3;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < k ? i : rng() % k;
    const double s = silhouette(pts, labels);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(s, silhouette_oracle(pts, labels), 1e-12);
  }
}

TEST(SelectK, RecoversFourOrthogonalModes) {
  const auto mix = make_mixture(4, 50, 64, 0.05, 14);
  SelectKOptions opt;
  opt.k_max = 8;
  opt.seed = 3;
  const auto init = select_k(mix.rows, opt);
  EXPECT_EQ(init.report.chosen_k, 4u);
  EXPECT_EQ(init.centroids.k(), 4u);
  EXPECT_EQ(init.report.candidates.size(), 4u * 7u);
}

TEST(SelectK, ChosenCandidateIsTheGridArgmax) {
  const auto mix = make_mixture(3, 30, 32, 0.05, 15);
  const auto init = select_k(mix.rows, SelectKOptions{});
  const auto& r = init.report;
  double best = -2;
  for (const auto& c : r.candidates) {
    EXPECT_GE(c.silhouette, -1.0);
    EXPECT_LE(c.silhouette, 1.0);
    best = std::max(best, c.silhouette);
  }
  EXPECT_EQ(r.chosen_silhouette, best);
  // Ties resolve to the smallest K, then the smallest tau.
  const auto first = std::find_if(r.candidates.begin(), r.candidates.end(),
                                  [&](const SpectralCandidate& c) { return c.silhouette == best; });
  for (const auto& c : r.candidates)
    if (c.silhouette == best) EXPECT_GE(c.k, r.chosen_k);
  EXPECT_NE(first, r.candidates.end());
  // Explained-variance curve invariants.
  for (std::size_t i = 1; i < r.explained_variance_curve.size(); ++i)
    EXPECT_GE(r.explained_variance_curve[i], r.explained_variance_curve[i - 1]);
  EXPECT_DOUBLE_EQ(r.explained_variance_curve.back(), 1.0);
  for (std::size_t i = 1; i < r.singular_values.size(); ++i) EXPECT_LE(r.singular_values[i], r.singular_values[i - 1]);
}

TEST(SelectK, RecoversModeCountTwoThroughSix) {
  for (std::size_t m = 2; m <= 6; ++m) {
    const auto mix = make_mixture(m, 40, 48, 0.05, 100 + m);
    SelectKOptions opt;
    opt.seed = m;
    EXPECT_EQ(select_k(mix.rows, opt).report.chosen_k, m) << "m=" << m;
  }
}

TEST(SelectK, SingleBlobScoresLow) {
  std::mt19937_64 rng(16);
  const Matrix g = testing::random_matrix(rng, 120, 10);
  SelectKOptions opt;
  opt.k_max = 6;
  const auto r = select_k(g, opt).report;
  for (const auto& c : r.candidates) EXPECT_LT(c.silhouette, 0.3);
  EXPECT_GE(r.chosen_k, 2u);
}

TEST(SelectK, FullThresholdKeepsEveryDimension) {
  std::mt19937_64 rng(17);
  const Matrix g = testing::random_matrix(rng, 30, 8);
  SelectKOptions opt;
  opt.tau_list = {1.0};
  opt.k_max = 4;
  const auto r = select_k(g, opt).report;
  EXPECT_EQ(r.chosen_subspace_dim, 8u);
}

TEST(SelectK, DeterministicReportBytes) {
  const auto mix = make_mixture(4, 25, 24, 0.05, 18);
  SelectKOptions opt;
  opt.seed = 77;
  const auto a = to_json(select_k(mix.rows, opt).report).dump();
  const auto b = to_json(select_k(mix.rows, opt).report).dump();
  EXPECT_EQ(a, b);
}

TEST(SelectK, ErrorsOnBadInputs) {
  const Matrix tiny = Matrix::Ones(2, 3);
  EXPECT_THROW(select_k(tiny, SelectKOptions{}), DegenerateError);
  SelectKOptions bad;
  bad.tau_list = {};
  EXPECT_THROW(select_k(Matrix::Ones(10, 3), bad), ValidationError);
  bad.tau_list = {0.0};
  EXPECT_THROW(select_k(Matrix::Ones(10, 3), bad), ValidationError);
}

TEST(Lift, IdentityBasisOnlyNormalizes) {
  Matrix c(2, 3);
  c << 3, 0, 4, 0, 2, 0;
  const auto lifted = lift_centroids(c, Matrix::Identity(3, 3), 3);
  EXPECT_NEAR(lifted.matrix()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(lifted.matrix()(0, 2), 0.8, 1e-15);
  EXPECT_NEAR(lifted.matrix()(1, 1), 1.0, 1e-15);
}

TEST(Lift, BasisVectorMapsToSingularVector) {
  std::mt19937_64 rng(19);
  const auto s = thin_svd(testing::random_matrix(rng, 10, 5));
  Matrix e1 = Matrix::Zero(2, 3);
  e1(0, 0) = 1;
  e1(1, 1) = 1;
  const auto lifted = lift_centroids(e1, s.v, 3);
  EXPECT_LE((lifted.centroid(0) - s.v.col(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(lift_centroids(Matrix::Zero(1, 3), s.v, 3), ZeroVectorError);
  EXPECT_THROW(lift_centroids(e1, s.v, 2), ValidationError);
}

TEST(Lift, CentroidsAlignWithClusterMeans) {
  const auto mix = make_mixture(4, 50, 64, 0.05, 20);
  SelectKOptions opt;
  opt.k_max = 6;
  const auto init = select_k(mix.rows, opt);
  ASSERT_EQ(init.centroids.k(), 4u);
  // Recover each lifted centroid's cluster by nearest cosine and compare to the
  // full-dimensional mean of its members.
  std::vector<Vector> sums(4, Vector::Zero(64));
  for (Eigen::Index i = 0; i < mix.rows.rows(); ++i) {
    std::size_t best = 0;
    double bs = -2;
    for (std::size_t c = 0; c < 4; ++c) {
      const double s = cosine_similarity(mix.rows.row(i).transpose(), init.centroids.centroid(c));
      if (s > bs) {
        bs = s;
        best = c;
      }
    }
    sums[best] += mix.rows.row(i).transpose();
  }
  for (std::size_t c = 0; c < 4; ++c) EXPECT_GT(cosine_similarity(init.centroids.centroid(c), sums[c]), 0.95);
}

}  // namespace
}  // namespace gspace
