// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Synthetic heterogeneous-task laboratory. Each task owns a direction in the
// model's output-residual space; targets are set so that at the generation
// parameters every example's residual is grad_scale * (task direction +
// noise), which makes per-example gradients cluster by task by construction.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gspace/analysis.hpp"
#include "gspace/grad_core.hpp"
#include "json.hpp"

namespace gspace {

enum class ModelKind { linear_regression, logistic, two_layer_mlp };

/// task_direction: residuals follow the task's direction.
/// input_linear:   residuals are a fixed isometric image of the input, so
///                 gradient geometry mirrors input geometry.
enum class TargetMode { task_direction, input_linear };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
const char* to_string(TargetMode mode);
TargetMode target_mode_from_string(const std::string& s);

struct SimConfig {
  std::size_t num_tasks = 4;
  std::size_t input_dim = 16;
  std::size_t output_dim = 32;
  std::size_t hidden_dim = 16;
  std::size_t examples_per_task = 50;
  double mode_separation = 0.1;  // pairwise cosine between task directions
  double noise_sigma = 0.05;     // per-coordinate residual noise
  ModelKind model = ModelKind::linear_regression;
  double lr = 0.05;
  std::size_t steps = 2000;
  double warmup_fraction = 0.05;
  std::size_t warmup_steps = 10;
  TargetMode target_mode = TargetMode::task_direction;
  double input_signal = 1.0;    // weight of the per-task input code
  double input_noise = 1.0;     // isotropic input noise (total norm scale)
  double input_nuisance = 0.0;  // std-dev along one shared nuisance direction
  double input_scale = 0.1;     // multiplies the whole input vector
  double grad_scale = 1.0;      // residual magnitude at generation
  double text_signal = 0.5;     // probability a word comes from the task vocabulary
  std::size_t words_per_example = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Small differentiable models with exact per-example gradients.
/// Parameter layout (row-major blocks):
///   linear / logistic : W (out x in), b (out)
///   two-layer MLP     : W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out)
/// Linear and MLP use 0.5 ||f(x) - y||^2; logistic uses per-output binary
/// cross-entropy with soft targets in [0, 1].
class ToyModel {
 public:
  ToyModel(ModelKind kind, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim);

  ModelKind kind() const { return kind_; }
  std::size_t input_dim() const { return in_; }
  std::size_t output_dim() const { return out_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t param_count() const;

  /// Zeros for linear/logistic; scaled Gaussian weights for the MLP.
  Vector init_params(std::uint64_t seed) const;
  /// Linear output (logits for the logistic model).
  Vector forward(const Vector& theta, const Vector& x) const;
  double loss(const Vector& theta, const Vector& x, const Vector& y) const;
  Vector gradient(const Vector& theta, const Vector& x, const Vector& y) const;

 private:
  void check(const Vector& theta, const Vector& x) const;

  ModelKind kind_;
  std::size_t in_, out_, hidden_;
};

struct Example {
  std::uint64_t id = 0;
  std::size_t task = 0;
  Vector input;
  Vector target;
  std::string text;
};

std::string task_tag(std::size_t task);

struct Dataset {
  SimConfig config;
  ToyModel model;
  Vector theta0;
  std::vector<Example> examples;  // shuffled; id == position
  Matrix task_directions;         // m x param_count, unit rows (gradient direction of each task prototype at theta0)
  Matrix output_directions;       // m x output_dim
  Matrix input_codes;             // m x input_dim
  std::vector<std::vector<std::string>> vocabularies;
};

/// Deterministic for a fixed config. Task directions have pairwise cosine
/// exactly mode_separation, which is infeasible below -1/(m-1) or when
/// more directions are needed than output dimensions.
Dataset gen_mixture(const SimConfig& config);

GradientRecord per_example_gradient(const ToyModel& model, const Vector& theta, const Example& example);
std::vector<GradientRecord> extract_gradients(const Dataset& data, const Vector& theta);
/// The frozen-encoder feature of an example: its input, unit-normalized.
Vector router_feature(const Example& example);
/// router_feature of every example as records (id, tag, text preserved).
std::vector<GradientRecord> export_features(const Dataset& data);

double dataset_loss(const ToyModel& model, const Vector& theta, std::span<const Example> data);
Vector full_gradient(const ToyModel& model, const Vector& theta, std::span<const Example> data);

struct WarmupResult {
  Vector params;
  std::vector<std::uint64_t> subset_ids;
  std::vector<double> losses;  // warm-up subset loss before each step and after the last
};

/// Full-batch gradient descent on a seeded random subset of
/// max(1, round(fraction * n)) examples; one step per pass over the subset.
WarmupResult warmup_train(const ToyModel& model, const Vector& theta, std::span<const Example> data,
                          double fraction, std::size_t steps, double lr, std::uint64_t seed);

struct TrainTrajectory {
  std::vector<double> loss;          // full-data loss at theta_t, t = 0..T-1
  std::vector<double> grad_norm_sq;  // ||grad L(theta_t)||^2 over the full data
  Vector final_params;
  double eps_hat = 0.0;              // mean of grad_norm_sq
};

/// T single-sample SGD steps, samples drawn uniformly with replacement.
TrainTrajectory sgd_train(const ToyModel& model, const Vector& theta0, std::span<const Example> data, double lr,
                          std::size_t steps, std::uint64_t seed);

struct ExpertComparison {
  double eps_shared = 0.0;
  double eps_cluster_weighted = 0.0;
  double empirical_ratio = 0.0;
  double bound_ratio = 0.0;
  bool improved = false;  // empirical_ratio <= 1
  std::vector<double> expert_eps;
  std::vector<double> weights;
  VarianceReport variance;
};

/// One shared model on all data vs one expert per cluster, all started from
/// `theta_start` with the same lr and step count. `labels` is parallel to
/// data.examples.
ExpertComparison expert_vs_shared(const Dataset& data, const Vector& theta_start, std::span<const std::size_t> labels,
                                  std::size_t k);

nlohmann::ordered_json to_json(const ExpertComparison& cmp);

/// Seeded assignment of n items to k groups of near-equal size.
std::vector<std::size_t> random_balanced_labels(std::size_t n, std::size_t k, std::uint64_t seed);

double pearson(std::span<const double> a, std::span<const double> b);

struct CorrelationStudy {
  double pearson_r = 0.0;
  std::vector<double> input_similarity;
  std::vector<double> gradient_similarity;
};

/// Cosine of inputs vs cosine of per-example gradients over n_pairs random
/// distinct pairs.
CorrelationStudy embedding_vs_gradient_correlation(const Dataset& data, const Vector& theta, std::size_t n_pairs,
                                                   std::uint64_t seed);

/// Majority-tag fraction per cluster, pooled over all items.
double cluster_purity(std::span<const std::size_t> labels, std::span<const std::size_t> truth);

}  // namespace gspace
