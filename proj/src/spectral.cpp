// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "gspace/error.hpp"
#include "gspace/rng.hpp"

namespace gspace {

ThinSvd thin_svd(const Matrix& g) {
  if (g.rows() == 0 || g.cols() == 0) throw ValidationError("thin_svd: empty matrix");
  if (!g.allFinite()) throw ValidationError("thin_svd: matrix contains non-finite entries");

  const Eigen::MatrixXd dense = g;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};

  for (Eigen::Index c = 0; c < out.v.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < out.v.rows(); ++r) {
      const double a = std::abs(out.v(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (out.v(best, c) < 0.0) {
      out.v.col(c) *= -1.0;
      out.u.col(c) *= -1.0;
    }
  }
  return out;
}

double explained_variance(const Vector& sigma, std::size_t k) {
  const auto r = static_cast<std::size_t>(sigma.size());
  if (k < 1 || k > r)
    throw ValidationError("explained_variance: k=" + std::to_string(k) + " outside [1, " + std::to_string(r) + "]");
  const double total = sigma.squaredNorm();
  if (total == 0.0) throw DegenerateError("explained_variance: all singular values are zero");
  if (k == r) return 1.0;
  return std::min(1.0, sigma.head(static_cast<Eigen::Index>(k)).squaredNorm() / total);
}

std::size_t subspace_dim_for_threshold(const Vector& sigma, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("variance threshold must lie in (0, 1]");
  const auto r = static_cast<std::size_t>(sigma.size());
  if (r == 0) throw ValidationError("subspace_dim_for_threshold: no singular values");
  const double total = sigma.squaredNorm();
  if (total == 0.0) throw DegenerateError("subspace_dim_for_threshold: all singular values are zero");
  double acc = 0.0;
  for (std::size_t k = 1; k < r; ++k) {
    acc += sigma[static_cast<Eigen::Index>(k - 1)] * sigma[static_cast<Eigen::Index>(k - 1)];
    if (acc / total >= tau) return k;
  }
  return r;
}

Matrix project(const Matrix& g, const Matrix& v, std::size_t k) {
  if (g.cols() != v.rows())
    throw ValidationError("project: gradient dim " + std::to_string(g.cols()) + " != basis dim " +
                          std::to_string(v.rows()));
  if (k == 0 || k > static_cast<std::size_t>(v.cols()))
    throw ValidationError("project: k=" + std::to_string(k) + " exceeds basis size " + std::to_string(v.cols()));
  return g * v.leftCols(static_cast<Eigen::Index>(k));
}

// ------------------------------------------------------------------ k-means

namespace {

std::size_t nearest(const Matrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x, double& dist2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  dist2 = best_d;
  return best;
}

Matrix kmeanspp_init(const Matrix& points, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Matrix centers(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.row(0) = points.row(static_cast<Eigen::Index>(pick(rng)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c - 1)))
                           .squaredNorm();
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
  }
  return centers;
}

KMeansResult lloyd(const Matrix& points, Matrix centers, std::size_t max_iters) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(centers.rows());
  KMeansResult res;
  res.labels.assign(n, 0);
  std::vector<double> d2(n, 0.0);
  std::vector<std::size_t> previous;

  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) res.labels[i] = nearest(centers, points.row(static_cast<Eigen::Index>(i)), d2[i]);

    std::vector<std::size_t> sizes(k, 0);
    for (auto l : res.labels) ++sizes[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      // Steal the point farthest from its own centroid, from a cluster that
      // can spare one.
      std::size_t victim = n;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[res.labels[i]] > 1 && d2[i] > far) {
          far = d2[i];
          victim = i;
        }
      }
      if (victim == n) break;
      --sizes[res.labels[victim]];
      res.labels[victim] = c;
      ++sizes[c];
      d2[victim] = 0.0;
      centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(victim));
    }

    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), points.cols());
    for (std::size_t i = 0; i < n; ++i)
      sums.row(static_cast<Eigen::Index>(res.labels[i])) += points.row(static_cast<Eigen::Index>(i));
    for (std::size_t c = 0; c < k; ++c)
      if (sizes[c] > 0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(sizes[c]);

    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wcss += (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(res.labels[i]))).squaredNorm();
    res.wcss_history.push_back(wcss);
    res.iterations = it + 1;
    if (res.labels == previous) break;
    previous = res.labels;
  }
  res.centroids = std::move(centers);
  res.wcss = res.wcss_history.empty() ? 0.0 : res.wcss_history.back();
  return res;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                    std::size_t restarts) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw ValidationError("kmeans: K must be >= 1");
  if (k > n) throw ValidationError("kmeans: K=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  if (max_iters == 0) throw ValidationError("kmeans: max_iters must be >= 1");
  if (restarts == 0) restarts = 1;

  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans.restart." + std::to_string(r)));
    auto res = lloyd(points, kmeanspp_init(points, k, rng), max_iters);
    if (!have || res.wcss < best.wcss) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

// --------------------------------------------------------------- silhouette

Matrix pairwise_distances(const Matrix& points) {
  const auto n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
  return d;
}

double silhouette_from_distances(const Matrix& dist, std::span<const std::size_t> labels) {
  const auto n = labels.size();
  if (static_cast<std::size_t>(dist.rows()) != n)
    throw ValidationError("silhouette: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(dist.rows()) + " points");
  if (n == 0) throw DegenerateError("silhouette: no points");
  // Compact the labels so absent indices do not count as clusters.
  std::map<std::size_t, std::size_t> remap;
  for (auto l : labels) remap.emplace(l, 0);
  if (remap.size() < 2) throw DegenerateError("silhouette is undefined for a single cluster");
  std::size_t next = 0;
  for (auto& [_, v] : remap) v = next++;
  std::vector<std::size_t> lab(n);
  std::vector<std::size_t> sizes(remap.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    lab[i] = remap[labels[i]];
    ++sizes[lab[i]];
  }

  double total = 0.0;
  std::vector<double> sums(remap.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[lab[i]] == 1) continue;  // singleton convention: 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[lab[j]] += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double a = sums[lab[i]] / static_cast<double>(sizes[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != lab[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette(const Matrix& points, std::span<const std::size_t> labels) {
  return silhouette_from_distances(pairwise_distances(points), labels);
}

// --------------------------------------------------------------- select_k

nlohmann::ordered_json to_json(const SpectralReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["rows_used"] = r.rows_used;
  j["dim"] = r.dim;
  j["singular_values"] = r.singular_values;
  auto& ev = j["explained_variance_curve"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.explained_variance_curve.size(); ++i)
    ev.push_back({{"k", i + 1}, {"ratio", r.explained_variance_curve[i]}});
  auto& cand = j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : r.candidates)
    cand.push_back({{"tau", c.tau}, {"subspace_dim", c.subspace_dim}, {"K", c.k}, {"silhouette", c.silhouette}});
  j["chosen_tau"] = r.chosen_tau;
  j["chosen_subspace_dim"] = r.chosen_subspace_dim;
  j["chosen_K"] = r.chosen_k;
  j["chosen_silhouette"] = r.chosen_silhouette;
  return j;
}

CentroidSet lift_centroids(const Matrix& centroids_proj, const Matrix& v, std::size_t k) {
  if (static_cast<std::size_t>(centroids_proj.cols()) != k)
    throw ValidationError("lift_centroids: projected dim " + std::to_string(centroids_proj.cols()) +
                          " != k=" + std::to_string(k));
  if (k == 0 || k > static_cast<std::size_t>(v.cols()))
    throw ValidationError("lift_centroids: k exceeds basis size");
  Matrix lifted = centroids_proj * v.leftCols(static_cast<Eigen::Index>(k)).transpose();
  for (Eigen::Index i = 0; i < lifted.rows(); ++i) {
    const double nrm = lifted.row(i).norm();
    if (nrm == 0.0) throw ZeroVectorError("lifted centroid " + std::to_string(i) + " has zero norm (degenerate cluster)");
    lifted.row(i) /= nrm;
  }
  return CentroidSet(std::move(lifted));
}

SpectralInit select_k(const Matrix& g, const SelectKOptions& opt) {
  if (opt.tau_list.empty()) throw ValidationError("select_k: tau_list is empty");
  for (double t : opt.tau_list)
    if (!(t > 0.0 && t <= 1.0)) throw ValidationError("select_k: tau " + std::to_string(t) + " outside (0, 1]");
  if (opt.k_min < 2) throw ValidationError("select_k: K range must start at >= 2");
  if (opt.k_max < opt.k_min) throw ValidationError("select_k: empty K range");
  if (!g.allFinite()) throw ValidationError("select_k: gradient matrix contains non-finite entries");

  const auto n_all = static_cast<std::size_t>(g.rows());
  std::vector<Eigen::Index> rows(n_all);
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (opt.max_validation_rows > 0 && n_all > opt.max_validation_rows) {
    auto rng = make_rng(opt.seed, "spectral.validation_subset");
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(opt.max_validation_rows);
    std::sort(rows.begin(), rows.end());
  }
  Matrix sub(static_cast<Eigen::Index>(rows.size()), g.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = g.row(rows[i]);
  const auto n = static_cast<std::size_t>(sub.rows());

  const std::size_t k_hi = std::min(opt.k_max, n > 0 ? n - 1 : 0);
  if (k_hi < opt.k_min)
    throw DegenerateError("select_k: " + std::to_string(n) + " rows are too few for any K in [" +
                          std::to_string(opt.k_min) + ", " + std::to_string(opt.k_max) + "]");

  const auto svd = thin_svd(sub);
  SpectralReport report;
  report.seed = opt.seed;
  report.rows_used = n;
  report.dim = static_cast<std::size_t>(g.cols());
  report.singular_values.assign(svd.sigma.data(), svd.sigma.data() + svd.sigma.size());
  for (std::size_t k = 1; k <= static_cast<std::size_t>(svd.sigma.size()); ++k)
    report.explained_variance_curve.push_back(explained_variance(svd.sigma, k));

  std::vector<double> taus = opt.tau_list;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  const auto kmeans_seed = derive_seed(opt.seed, "spectral.kmeans");
  std::map<std::size_t, std::pair<Matrix, Matrix>> by_dim;  // subspace dim -> (projection, distances)
  bool have = false;
  SpectralCandidate best;
  Matrix best_centroids;
  for (double tau : taus) {
    const auto sdim = subspace_dim_for_threshold(svd.sigma, tau);
    auto it = by_dim.find(sdim);
    if (it == by_dim.end()) {
      Matrix proj = project(sub, svd.v, sdim);
      Matrix dist = pairwise_distances(proj);
      it = by_dim.emplace(sdim, std::make_pair(std::move(proj), std::move(dist))).first;
    }
    const auto& [proj, dist] = it->second;
    for (std::size_t k = opt.k_min; k <= k_hi; ++k) {
      auto km = kmeans(proj, k, kmeans_seed, opt.max_iters, opt.restarts);
      const double s = silhouette_from_distances(dist, km.labels);
      SpectralCandidate c{tau, sdim, k, s};
      report.candidates.push_back(c);
      const bool better = !have || s > best.silhouette ||
                          (s == best.silhouette && (k < best.k || (k == best.k && tau < best.tau)));
      if (better) {
        best = c;
        best_centroids = km.centroids;
        have = true;
      }
    }
  }
  report.chosen_tau = best.tau;
  report.chosen_subspace_dim = best.subspace_dim;
  report.chosen_k = best.k;
  report.chosen_silhouette = best.silhouette;
  auto centroids = lift_centroids(best_centroids, svd.v, best.subspace_dim);
  return SpectralInit{std::move(report), std::move(centroids)};
}

}  // namespace gspace
