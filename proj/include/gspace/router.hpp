// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Expert selection: a linear-softmax head trained on frozen features with
// cluster ids as supervision, plus keyword, embedding-similarity and
// gradient-similarity baselines and a shared evaluation harness.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gspace/centroids.hpp"
#include "gspace/grad_core.hpp"
#include "gspace/tfidf.hpp"
#include "json.hpp"

namespace gspace {

struct RouterMetadata {
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string feature_source = "input";
};

/// p(k | x) = softmax(W x + b). Immutable once built.
class RouterModel {
 public:
  RouterModel(Matrix w, Vector b, RouterMetadata metadata = {});

  std::size_t k() const { return static_cast<std::size_t>(w_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(w_.cols()); }
  const Matrix& weights() const { return w_; }
  const Vector& bias() const { return b_; }
  const RouterMetadata& metadata() const { return meta_; }

  Vector logits(const VectorRef& feature) const;

 private:
  Matrix w_;
  Vector b_;
  RouterMetadata meta_;
};

/// Max-shifted softmax.
Vector softmax(const VectorRef& logits);

struct Route {
  std::size_t expert = 0;
  Vector probabilities;
};

/// Argmax of the softmax, lowest index on ties.
Route route(const RouterModel& model, const VectorRef& feature);

struct CrossEntropyGradient {
  double loss = 0.0;  // mean over rows
  Matrix dw;
  Vector db;
};

/// Mean cross-entropy -1/n sum_i log p(y_i | x_i) and its analytic gradient.
CrossEntropyGradient cross_entropy_gradient(const Matrix& w, const Vector& b, const Matrix& features,
                                            std::span<const std::size_t> labels);
double cross_entropy(const Matrix& w, const Vector& b, const Matrix& features, std::span<const std::size_t> labels);

struct RouterTrainOptions {
  std::size_t epochs = 200;
  double lr = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::string feature_source = "input";
};

/// Mini-batch SGD from zero weights, reshuffling each epoch. Every class in
/// [0, k) must occur in `labels`.
RouterModel train_router(const Matrix& features, std::span<const std::size_t> labels, std::size_t k,
                         const RouterTrainOptions& options = {});

nlohmann::ordered_json to_json(const RouterModel& model);
RouterModel router_from_json(const nlohmann::json& j);
void save_router(const RouterModel& model, const std::filesystem::path& path);
RouterModel load_router(const std::filesystem::path& path);

/// Cosine against the stored centroids, via the same rule as assign_rows.
std::size_t baseline_gs(const CentroidSet& centroids, const VectorRef& gradient);

/// K x f matrix of per-cluster mean feature vectors.
Matrix cluster_mean_features(const Matrix& features, std::span<const std::size_t> labels, std::size_t k);
std::size_t baseline_es(const Matrix& cluster_means, const VectorRef& feature);

using KeywordSets = std::vector<std::set<std::string>>;
KeywordSets keyword_sets_from_summaries(std::span<const ClusterSummary> summaries);
/// Largest overlap between `tokens` (as a set) and each keyword set.
std::size_t baseline_ks(const KeywordSets& keywords, std::span<const std::string> tokens);

/// A router under evaluation: maps a test-set index to an expert. Anything
/// the router must compute per query belongs inside the callable.
struct NamedRouter {
  std::string name;
  std::function<std::size_t(std::size_t)> query;
};

struct RouterEval {
  std::string name;
  double accuracy = 0.0;
  double latency_ms = 0.0;  // median over timed queries
  std::size_t timed_queries = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
};

struct EvalOptions {
  std::size_t min_timed_queries = 100;
  std::size_t warmup_queries = 10;
  bool measure_latency = true;
};

std::vector<RouterEval> evaluate_routers(std::span<const NamedRouter> routers, std::span<const std::size_t> labels,
                                         std::size_t k, const EvalOptions& options = {});

nlohmann::ordered_json to_json(std::span<const RouterEval> evals);

}  // namespace gspace
