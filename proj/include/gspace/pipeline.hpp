// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end stages shared by the command-line tool and the tests.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gspace/analysis.hpp"
#include "gspace/config.hpp"
#include "gspace/online.hpp"
#include "gspace/router.hpp"
#include "gspace/sim.hpp"
#include "gspace/spectral.hpp"
#include "gspace/stream.hpp"
#include "gspace/tfidf.hpp"
#include "json.hpp"

namespace gspace {

/// Uniform reservoir sample of at most `max_rows` unit-normalized rows, kept
/// in stream order. DegenerateError("empty gradient stream") on no records.
GradientMatrix sample_validation_rows(GradientSource& source, std::size_t max_rows, std::uint64_t seed);

SpectralInit estimate_k(GradientSource& source, const RunConfig& config);

struct ClusterRun {
  ConvergenceResult convergence;
  Partition partition;
};

/// Online refinement from `initial` followed by the final assignment pass.
ClusterRun cluster_stream(GradientSource& source, const CentroidSet& initial, const RunConfig& config);

nlohmann::ordered_json convergence_log(const ConvergenceResult& result);

struct AnalysisResult {
  VarianceReport variance;
  std::optional<double> stationarity;  // unset when total variance is zero
  std::optional<std::vector<ClusterSummary>> summaries;
};

/// Variance decomposition of the raw stream gradients under `partition`;
/// TF-IDF summaries are added when the stream carries text.
AnalysisResult analyze_partition(const Partition& partition, GradientSource& source, std::size_t top_m);
nlohmann::ordered_json to_json(const AnalysisResult& result);

struct RouterStudy {
  std::vector<RouterEval> evals;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double router_final_loss = 0.0;
};

/// Splits the dataset, trains the semantic predictor on input features with
/// cluster labels and evaluates it against the KS, ES and GS baselines on the
/// held-out part. GS computes a fresh gradient per query.
RouterStudy router_study(const Dataset& data, const Vector& theta, const CentroidSet& centroids,
                         std::span<const std::size_t> labels, std::size_t k, const RunConfig& config,
                         const EvalOptions& eval_options = {});

struct SimulationResult {
  RunConfig config;
  Dataset data;
  WarmupResult warmup;
  std::vector<GradientRecord> gradients;
  SpectralInit spectral;
  ClusterRun clusters;
  std::vector<std::size_t> labels;  // parallel to data.examples
  double purity = 0.0;
  ExpertComparison comparison;
  ExpertComparison random_control;  // same K, clusters drawn at random
  CorrelationStudy correlation;
  RouterStudy routers;
};

/// generate -> warm-up -> extract -> estimate K -> cluster -> experts vs
/// shared (on the gradient clusters and on a random balanced split with the
/// same K) ->
/// correlation -> router evaluation. Errors are rethrown with the
/// failing stage's name prefixed.
SimulationResult run_simulation(const RunConfig& config, const EvalOptions& eval_options = {});

/// Everything except wall-clock timings, so reruns are byte-identical.
nlohmann::ordered_json simulation_report(const SimulationResult& result);

/// report.json, router_eval.json, silhouette_vs_k.csv, similarity_scatter.csv,
/// gradients.gsg and features.gsg under `dir`.
void write_simulation_outputs(const SimulationResult& result, const std::filesystem::path& dir);

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);

}  // namespace gspace
