// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/cli.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "gspace/analysis.hpp"
#include "gspace/config.hpp"
#include "gspace/error.hpp"
#include "gspace/pipeline.hpp"
#include "gspace/router.hpp"
#include "gspace/stream.hpp"

namespace gspace::cli {
namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> tau_list;
  std::optional<std::size_t> k_min, k_max, batch_size, max_epochs, top_m;
  std::optional<double> alpha, beta, drift_tol;
  // simulate
  std::optional<std::size_t> num_tasks, examples_per_task, steps, input_dim, output_dim;
  std::optional<double> mode_separation, noise_sigma, lr;
  std::optional<std::string> model;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON run config");
  cmd->add_option("--seed", o.seed, "Master seed (GSPACE_SEED overrides)");
}

void add_spectral(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--tau", o.tau_list, "Explained-variance thresholds")->delimiter(',');
  cmd->add_option("--k-min", o.k_min, "Smallest K tried");
  cmd->add_option("--k-max", o.k_max, "Largest K tried");
}

void add_online(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--alpha", o.alpha, "Cache capacity multiplier (capacity = alpha * B)");
  cmd->add_option("--beta", o.beta, "EMA momentum in [0, 1)");
  cmd->add_option("--batch-size", o.batch_size, "Stream batch size B");
  cmd->add_option("--drift-tol", o.drift_tol, "Stop when epoch drift falls below this");
  cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.tau_list) c.tau_list = *o.tau_list;
  if (o.k_min) c.k_min = *o.k_min;
  if (o.k_max) c.k_max = *o.k_max;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.max_epochs) c.max_epochs = *o.max_epochs;
  if (o.top_m) c.top_m = *o.top_m;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.beta) c.beta = *o.beta;
  if (o.drift_tol) c.drift_tol = *o.drift_tol;
  if (o.num_tasks) c.sim.num_tasks = *o.num_tasks;
  if (o.examples_per_task) c.sim.examples_per_task = *o.examples_per_task;
  if (o.steps) c.sim.steps = *o.steps;
  if (o.input_dim) c.sim.input_dim = *o.input_dim;
  if (o.output_dim) c.sim.output_dim = *o.output_dim;
  if (o.mode_separation) c.sim.mode_separation = *o.mode_separation;
  if (o.noise_sigma) c.sim.noise_sigma = *o.noise_sigma;
  if (o.lr) c.sim.lr = *o.lr;
  if (o.model) c.sim.model = model_kind_from_string(*o.model);
  c.sim.seed = c.seed;
  apply_seed_env(c);
  c.validate();
  return c;
}

std::unordered_map<std::uint64_t, std::size_t> index_by_id(const std::vector<GradientRecord>& records) {
  std::unordered_map<std::uint64_t, std::size_t> m;
  for (std::size_t i = 0; i < records.size(); ++i) m.emplace(records[i].id, i);
  return m;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

int cmd_flops(const std::vector<double>& args, bool as_json, std::ostream& out) {
  if (args.size() != 4) throw ValidationError("flops takes exactly four values: f_base f_lora f_sp k");
  const FlopsModel m{args[0], args[1], args[2], args[3]};
  const auto e = flops_estimate(m, RoutingMethod::elrea);
  const auto g = flops_estimate(m, RoutingMethod::gradientspace);
  const bool defined = g.total > 0.0;
  const double ratio = defined ? e.total / g.total : 0.0;
  if (as_json) {
    nlohmann::ordered_json j;
    j["ELREA"] = {{"router", e.router}, {"total", e.total}};
    j["GradientSpace"] = {{"router", g.router}, {"total", g.total}};
    if (defined)
      j["ratio"] = ratio;
    else
      j["ratio"] = nullptr;
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << std::left << std::setw(15) << "method" << std::setw(16) << "router_flops" << "total_flops" << '\n';
  out << std::setw(15) << "ELREA" << std::setw(16) << fmt_number(e.router) << fmt_number(e.total) << '\n';
  out << std::setw(15) << "GradientSpace" << std::setw(16) << fmt_number(g.router) << fmt_number(g.total) << '\n';
  if (defined)
    out << "ratio (ELREA / GradientSpace total): " << fmt_number(ratio) << '\n';
  else
    out << "ratio (ELREA / GradientSpace total): undefined (GradientSpace total is 0)\n";
  return kExitOk;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GradientSpace: clustering, analysis and routing over per-example gradient streams", "gspace"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  Overrides o;
  std::string stream, centroids_in, centroids_out, report_out, partition_in, partition_out, out_path, model_path,
      feature_json, features_path;
  std::vector<double> flops_args;
  bool flops_json = false;
  std::optional<std::size_t> router_epochs, router_batch;
  std::optional<double> router_lr;

  auto* est = app.add_subcommand("estimate-k", "Estimate K and initial centroids from a gradient stream");
  est->add_option("stream", stream, "Gradient stream (.gsg or .jsonl)")->required();
  est->add_option("--report", report_out, "Write the spectral report JSON here");
  est->add_option("--centroids", centroids_out, "Write the initial centroid checkpoint here");
  add_common(est, o);
  add_spectral(est, o);

  auto* clu = app.add_subcommand("cluster", "Refine centroids online and assign every gradient");
  clu->add_option("stream", stream, "Gradient stream")->required();
  clu->add_option("--centroids", centroids_in, "Initial centroid checkpoint")->required();
  clu->add_option("--partition", partition_out, "Partition output (JSON lines)")->required();
  clu->add_option("--final-centroids", centroids_out, "Refined centroid checkpoint output");
  add_common(clu, o);
  add_online(clu, o);

  auto* asg = app.add_subcommand("assign", "Assign every gradient to its nearest centroid");
  asg->add_option("stream", stream, "Gradient stream")->required();
  asg->add_option("--centroids", centroids_in, "Centroid checkpoint")->required();
  asg->add_option("--partition", partition_out, "Partition output (JSON lines)")->required();
  add_common(asg, o);

  auto* ana = app.add_subcommand("analyze", "Variance decomposition and stationarity ratio of a partition");
  ana->add_option("stream", stream, "Gradient stream (raw gradients)")->required();
  ana->add_option("--partition", partition_in, "Partition (JSON lines)")->required();
  ana->add_option("--out", out_path, "Also write the analysis JSON here");
  ana->add_option("--top-m", o.top_m, "TF-IDF terms per cluster");
  add_common(ana, o);

  auto* sim = app.add_subcommand("simulate", "Run the synthetic end-to-end experiment");
  sim->add_option("--out-dir", out_path, "Directory for report.json, CSVs and streams");
  sim->add_option("--num-tasks", o.num_tasks, "Number of synthetic tasks");
  sim->add_option("--examples-per-task", o.examples_per_task, "Examples per task");
  sim->add_option("--input-dim", o.input_dim, "Input feature dimension");
  sim->add_option("--output-dim", o.output_dim, "Model output dimension");
  sim->add_option("--mode-separation", o.mode_separation, "Pairwise cosine between task directions");
  sim->add_option("--noise-sigma", o.noise_sigma, "Per-coordinate residual noise");
  sim->add_option("--model", o.model, "linear-regression, logistic or two-layer-mlp");
  sim->add_option("--steps", o.steps, "SGD steps per model");
  sim->add_option("--lr", o.lr, "SGD step size");
  add_common(sim, o);
  add_spectral(sim, o);
  add_online(sim, o);

  auto* trn = app.add_subcommand("train-router", "Train the linear-softmax router on features + partition labels");
  trn->add_option("features", features_path, "Feature stream (.gsg or .jsonl)")->required();
  trn->add_option("--partition", partition_in, "Partition providing the labels")->required();
  trn->add_option("--out", model_path, "Router model JSON output")->required();
  trn->add_option("--epochs", router_epochs, "Training epochs");
  trn->add_option("--lr", router_lr, "Learning rate");
  trn->add_option("--batch", router_batch, "Mini-batch size");
  add_common(trn, o);

  auto* rte = app.add_subcommand("route", "Pick an expert for each feature vector");
  rte->add_option("--model", model_path, "Router model JSON")->required();
  auto* one = rte->add_option("--feature", feature_json, "One feature vector as a JSON array");
  auto* many = rte->add_option("--features", features_path, "Feature stream; one output line per record");
  one->excludes(many);

  auto* sum = app.add_subcommand("summarize-clusters", "Top TF-IDF terms per cluster");
  sum->add_option("stream", stream, "Stream carrying text payloads")->required();
  sum->add_option("--partition", partition_in, "Partition (JSON lines)")->required();
  sum->add_option("--top-m", o.top_m, "Terms per cluster");
  add_common(sum, o);

  auto* flp = app.add_subcommand("flops", "Per-query inference FLOPs of both routing schemes");
  flp->add_option("values", flops_args, "f_base f_lora f_sp k")->expected(4)->required();
  flp->add_flag("--json", flops_json, "Emit JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*flp) return cmd_flops(flops_args, flops_json, out);

  if (*rte) {
    const auto model = load_router(model_path);
    auto emit = [&](const VectorRef& x) {
      const auto r = route(model, x);
      nlohmann::ordered_json j;
      j["expert"] = r.expert;
      j["probabilities"] = std::vector<double>(r.probabilities.data(), r.probabilities.data() + r.probabilities.size());
      out << j.dump() << '\n';
    };
    if (!feature_json.empty()) {
      std::vector<double> v;
      try {
        v = nlohmann::json::parse(feature_json).get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("--feature must be a JSON array of numbers: ") + e.what());
      }
      emit(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    } else if (!features_path.empty()) {
      auto src = open_stream(features_path);
      while (auto rec = src->next()) emit(rec->vector);
    } else {
      throw ValidationError("route needs --feature or --features");
    }
    return kExitOk;
  }

  const RunConfig cfg = resolve(o);

  if (*est) {
    auto src = open_stream(stream);
    const auto init = estimate_k(*src, cfg);
    const auto report = to_json(init.report);
    if (!report_out.empty()) write_json(report, report_out);
    if (!centroids_out.empty()) write_centroids(init.centroids, centroids_out);
    out << report.dump() << '\n';
    return kExitOk;
  }

  if (*clu) {
    auto src = open_stream(stream);
    const auto initial = read_centroids(centroids_in);
    const auto run = cluster_stream(*src, initial, cfg);
    write_partition(run.partition, partition_out);
    if (!centroids_out.empty()) write_centroids(run.convergence.centroids, centroids_out);
    auto log = convergence_log(run.convergence);
    log["cluster_sizes"] = run.partition.cluster_sizes();
    for (auto c : run.convergence.starved_clusters)
      err << "warning: cluster " << c << " received no assignments in the final epoch\n";
    out << log.dump() << '\n';
    return kExitOk;
  }

  if (*asg) {
    auto src = open_stream(stream);
    const auto centroids = read_centroids(centroids_in);
    if (centroids.dim() != src->header().dim)
      throw ValidationError("centroid dim " + std::to_string(centroids.dim()) + " != stream dim " +
                            std::to_string(src->header().dim));
    const auto part = final_assignment(*src, centroids);
    write_partition(part, partition_out);
    nlohmann::ordered_json j;
    j["K"] = part.k();
    j["cluster_sizes"] = part.cluster_sizes();
    out << j.dump() << '\n';
    return kExitOk;
  }

  if (*ana) {
    auto src = open_stream(stream);
    const auto part = read_partition(partition_in);
    const auto res = analyze_partition(part, *src, cfg.top_m);
    const auto j = to_json(res);
    if (!out_path.empty()) write_json(j, out_path);
    for (auto c : res.variance.exceeding_clusters)
      err << "warning: cluster " << c << " has variance above the total variance\n";
    out << j.dump() << '\n';
    return kExitOk;
  }

  if (*sim) {
    const auto res = run_simulation(cfg);
    if (!out_path.empty()) write_simulation_outputs(res, out_path);
    out << simulation_report(res).dump() << '\n';
    return kExitOk;
  }

  if (*trn) {
    auto src = open_stream(features_path);
    const auto records = read_all(*src);
    const auto part = read_partition(partition_in);
    if (records.empty()) throw DegenerateError("empty feature stream");
    Matrix x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(src->header().dim));
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!part.contains(records[i].id))
        throw ValidationError("feature id " + std::to_string(records[i].id) + " has no partition entry");
      x.row(static_cast<Eigen::Index>(i)) = records[i].vector.transpose();
      y.push_back(part.at(records[i].id).cluster);
    }
    RouterTrainOptions opt;
    opt.epochs = router_epochs.value_or(cfg.router_epochs);
    opt.lr = router_lr.value_or(cfg.router_lr);
    opt.batch_size = router_batch.value_or(cfg.router_batch);
    opt.seed = cfg.seed;
    const auto model = train_router(x, y, part.k(), opt);
    save_router(model, model_path);
    nlohmann::ordered_json j;
    j["K"] = model.k();
    j["f"] = model.dim();
    j["initial_loss"] = model.metadata().initial_loss;
    j["final_loss"] = model.metadata().final_loss;
    out << j.dump() << '\n';
    return kExitOk;
  }

  if (*sum) {
    auto src = open_stream(stream);
    const auto records = read_all(*src);
    const auto part = read_partition(partition_in);
    const auto pos = index_by_id(records);
    std::vector<std::size_t> labels;
    std::vector<std::optional<std::string>> texts;
    for (const auto& e : part.entries()) {
      auto it = pos.find(e.id);
      if (it == pos.end()) throw ValidationError("partitioned id " + std::to_string(e.id) + " is not in the stream");
      labels.push_back(e.cluster);
      texts.push_back(records[it->second].text);
    }
    const auto s = tfidf_summarize(labels, texts, part.k(), cfg.top_m);
    out << to_json(s).dump() << '\n';
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::degenerate ? kExitDegenerate : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("gspace");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gspace::cli
