// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gspace/online.hpp"
#include "gspace/sim.hpp"
#include "gspace/spectral.hpp"
#include "json.hpp"

namespace gspace {

/// Every knob of a run. Loaded from one JSON document; CLI flags override
/// file values and GSPACE_SEED overrides both.
struct RunConfig {
  std::uint64_t seed = 0;
  std::vector<double> tau_list{0.80, 0.85, 0.90, 0.95};
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  double alpha = 5.0;
  double beta = 0.9;
  std::size_t batch_size = 32;
  double drift_tol = 1e-3;
  std::size_t max_epochs = 50;
  double warmup_fraction = 0.05;
  std::size_t kmeans_restarts = 4;
  std::size_t kmeans_max_iters = 100;
  std::size_t max_validation_rows = 2048;
  std::size_t router_epochs = 200;
  double router_lr = 0.1;
  std::size_t router_batch = 32;
  std::size_t top_m = 10;
  double test_fraction = 0.2;
  std::size_t correlation_pairs = 500;
  std::string input;
  std::string output;
  SimConfig sim;

  void validate() const;
  SelectKOptions select_k_options() const;
  OnlineParams online_params() const;
};

/// Unknown keys (top level or under "sim") raise ValidationError naming the key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Applies GSPACE_SEED when set; a non-numeric value is a ValidationError.
void apply_seed_env(RunConfig& config);

}  // namespace gspace
