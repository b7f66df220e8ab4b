// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "gspace/error.hpp"

namespace gspace {

void RunConfig::validate() const {
  if (tau_list.empty()) throw ValidationError("tau_list must not be empty");
  for (double t : tau_list)
    if (!(t > 0.0 && t <= 1.0)) throw ValidationError("tau_list entries must lie in (0, 1]");
  if (k_min < 2 || k_max < k_min) throw ValidationError("K range must satisfy 2 <= k_min <= k_max");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in (0, 1)");
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0)) throw ValidationError("warmup_fraction must lie in (0, 1]");
  if (!(drift_tol > 0.0)) throw ValidationError("drift_tol must be > 0");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (kmeans_restarts < 1 || kmeans_max_iters < 1) throw ValidationError("k-means restarts and iterations must be >= 1");
  if (max_validation_rows < 2) throw ValidationError("max_validation_rows must be >= 2");
  if (router_epochs < 1 || router_batch < 1 || !(router_lr > 0.0))
    throw ValidationError("router epochs, batch and lr must be positive");
  if (top_m < 1) throw ValidationError("top_m must be >= 1");
  if (correlation_pairs < 2) throw ValidationError("correlation_pairs must be >= 2");
  if (!(alpha >= 1.0) || std::floor(alpha) != alpha) throw ValidationError("alpha must be a positive integer");
  online_params().validate();
  sim.validate();
}

SelectKOptions RunConfig::select_k_options() const {
  SelectKOptions o;
  o.tau_list = tau_list;
  o.k_min = k_min;
  o.k_max = k_max;
  o.seed = seed;
  o.max_iters = kmeans_max_iters;
  o.restarts = kmeans_restarts;
  o.max_validation_rows = max_validation_rows;
  return o;
}

OnlineParams RunConfig::online_params() const {
  OnlineParams p;
  p.alpha = static_cast<std::size_t>(alpha);
  p.beta = beta;
  p.batch_size = batch_size;
  return p;
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ValidationError("unknown config key '" + prefix + key + "'");
}

SimConfig sim_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config key 'sim' must be an object");
  reject_unknown(j,
                 {"num_tasks", "input_dim", "output_dim", "hidden_dim", "examples_per_task", "mode_separation",
                  "noise_sigma", "model", "lr", "steps", "warmup_fraction", "warmup_steps", "target_mode",
                  "input_signal", "input_noise", "input_nuisance", "input_scale", "grad_scale", "text_signal",
                  "words_per_example"},
                 "sim.");
  SimConfig s;
  read(j, "num_tasks", s.num_tasks);
  read(j, "input_dim", s.input_dim);
  read(j, "output_dim", s.output_dim);
  read(j, "hidden_dim", s.hidden_dim);
  read(j, "examples_per_task", s.examples_per_task);
  read(j, "mode_separation", s.mode_separation);
  read(j, "noise_sigma", s.noise_sigma);
  std::string model = to_string(s.model), mode = to_string(s.target_mode);
  read(j, "model", model);
  read(j, "target_mode", mode);
  s.model = model_kind_from_string(model);
  s.target_mode = target_mode_from_string(mode);
  read(j, "lr", s.lr);
  read(j, "steps", s.steps);
  read(j, "warmup_fraction", s.warmup_fraction);
  read(j, "warmup_steps", s.warmup_steps);
  read(j, "input_signal", s.input_signal);
  read(j, "input_noise", s.input_noise);
  read(j, "input_nuisance", s.input_nuisance);
  read(j, "input_scale", s.input_scale);
  read(j, "grad_scale", s.grad_scale);
  read(j, "text_signal", s.text_signal);
  read(j, "words_per_example", s.words_per_example);
  return s;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"seed", "tau_list", "k_min", "k_max", "alpha", "beta", "batch_size", "drift_tol", "max_epochs",
                  "warmup_fraction", "kmeans_restarts", "kmeans_max_iters", "max_validation_rows", "router_epochs",
                  "router_lr", "router_batch", "top_m", "test_fraction", "correlation_pairs", "input", "output",
                  "sim"},
                 "");
  RunConfig c;
  read(j, "seed", c.seed);
  read(j, "tau_list", c.tau_list);
  read(j, "k_min", c.k_min);
  read(j, "k_max", c.k_max);
  read(j, "alpha", c.alpha);
  read(j, "beta", c.beta);
  read(j, "batch_size", c.batch_size);
  read(j, "drift_tol", c.drift_tol);
  read(j, "max_epochs", c.max_epochs);
  read(j, "warmup_fraction", c.warmup_fraction);
  read(j, "kmeans_restarts", c.kmeans_restarts);
  read(j, "kmeans_max_iters", c.kmeans_max_iters);
  read(j, "max_validation_rows", c.max_validation_rows);
  read(j, "router_epochs", c.router_epochs);
  read(j, "router_lr", c.router_lr);
  read(j, "router_batch", c.router_batch);
  read(j, "top_m", c.top_m);
  read(j, "test_fraction", c.test_fraction);
  read(j, "correlation_pairs", c.correlation_pairs);
  read(j, "input", c.input);
  read(j, "output", c.output);
  if (j.contains("sim")) {
    c.sim = sim_from_json(j.at("sim"));
    if (!j.at("sim").contains("warmup_fraction")) c.sim.warmup_fraction = c.warmup_fraction;
  } else {
    c.sim.warmup_fraction = c.warmup_fraction;
  }
  c.sim.seed = c.seed;
  return c;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json s;
  s["num_tasks"] = c.sim.num_tasks;
  s["input_dim"] = c.sim.input_dim;
  s["output_dim"] = c.sim.output_dim;
  s["hidden_dim"] = c.sim.hidden_dim;
  s["examples_per_task"] = c.sim.examples_per_task;
  s["mode_separation"] = c.sim.mode_separation;
  s["noise_sigma"] = c.sim.noise_sigma;
  s["model"] = to_string(c.sim.model);
  s["lr"] = c.sim.lr;
  s["steps"] = c.sim.steps;
  s["warmup_fraction"] = c.sim.warmup_fraction;
  s["warmup_steps"] = c.sim.warmup_steps;
  s["target_mode"] = to_string(c.sim.target_mode);
  s["input_signal"] = c.sim.input_signal;
  s["input_noise"] = c.sim.input_noise;
  s["input_nuisance"] = c.sim.input_nuisance;
  s["input_scale"] = c.sim.input_scale;
  s["grad_scale"] = c.sim.grad_scale;
  s["text_signal"] = c.sim.text_signal;
  s["words_per_example"] = c.sim.words_per_example;

  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["tau_list"] = c.tau_list;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["batch_size"] = c.batch_size;
  j["drift_tol"] = c.drift_tol;
  j["max_epochs"] = c.max_epochs;
  j["warmup_fraction"] = c.warmup_fraction;
  j["kmeans_restarts"] = c.kmeans_restarts;
  j["kmeans_max_iters"] = c.kmeans_max_iters;
  j["max_validation_rows"] = c.max_validation_rows;
  j["router_epochs"] = c.router_epochs;
  j["router_lr"] = c.router_lr;
  j["router_batch"] = c.router_batch;
  j["top_m"] = c.top_m;
  j["test_fraction"] = c.test_fraction;
  j["correlation_pairs"] = c.correlation_pairs;
  j["input"] = c.input;
  j["output"] = c.output;
  j["sim"] = std::move(s);
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_seed_env(RunConfig& config) {
  const char* env = std::getenv("GSPACE_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0' || *env == '-')
    throw ValidationError(std::string("GSPACE_SEED is not an unsigned integer: '") + env + "'");
  config.seed = v;
  config.sim.seed = v;
}

}  // namespace gspace
