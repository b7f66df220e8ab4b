// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gspace/error.hpp"
#include "gspace/rng.hpp"

namespace gspace {

GradientMatrix sample_validation_rows(GradientSource& source, std::size_t max_rows, std::uint64_t seed) {
  if (max_rows == 0) throw ValidationError("validation sample size must be >= 1");
  source.rewind();
  Rng rng = make_rng(seed, "pipeline.reservoir");
  std::vector<std::pair<std::size_t, GradientRecord>> reservoir;
  std::size_t seen = 0;
  while (auto rec = source.next()) {
    if (reservoir.size() < max_rows) {
      reservoir.emplace_back(seen, std::move(*rec));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, seen);
      const auto j = pick(rng);
      if (j < max_rows) reservoir[j] = {seen, std::move(*rec)};
    }
    ++seen;
  }
  if (reservoir.empty()) throw DegenerateError("empty gradient stream");
  std::sort(reservoir.begin(), reservoir.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto d = static_cast<Eigen::Index>(reservoir.front().second.vector.size());
  Matrix rows(static_cast<Eigen::Index>(reservoir.size()), d);
  std::vector<std::uint64_t> ids;
  ids.reserve(reservoir.size());
  for (std::size_t i = 0; i < reservoir.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = reservoir[i].second.vector.transpose();
    ids.push_back(reservoir[i].second.id);
  }
  GradientMatrix m(std::move(rows), std::move(ids));
  return source.header().normalized() ? m : ingest(m, false);
}

SpectralInit estimate_k(GradientSource& source, const RunConfig& config) {
  const auto sample = sample_validation_rows(source, config.max_validation_rows, config.seed);
  return select_k(sample.rows(), config.select_k_options());
}

ClusterRun cluster_stream(GradientSource& source, const CentroidSet& initial, const RunConfig& config) {
  if (initial.dim() != source.header().dim)
    throw ValidationError("centroid dim " + std::to_string(initial.dim()) + " != stream dim " +
                          std::to_string(source.header().dim));
  OnlineState state(initial, config.online_params());
  source.rewind();
  auto conv = run_until_converged(source, state, config.drift_tol, config.max_epochs);
  source.rewind();
  auto part = final_assignment(source, conv.centroids);
  return {std::move(conv), std::move(part)};
}

nlohmann::ordered_json convergence_log(const ConvergenceResult& r) {
  nlohmann::ordered_json j;
  j["epochs"] = r.epochs;
  j["stop_reason"] = to_string(r.reason);
  j["drift_history"] = r.drift_history;
  j["starved_clusters"] = r.starved_clusters;
  j["K"] = r.centroids.k();
  return j;
}

AnalysisResult analyze_partition(const Partition& partition, GradientSource& source, std::size_t top_m) {
  source.rewind();
  const auto records = read_all(source);
  if (records.empty()) throw DegenerateError("empty gradient stream");
  const auto grads = GradientMatrix::from_records(records);
  AnalysisResult res;
  res.variance = total_variance_decomposition(partition, grads);
  try {
    res.stationarity = stationarity_ratio(res.variance);
  } catch (const DegenerateError&) {
    res.stationarity.reset();
  }
  const bool any_text =
      std::any_of(records.begin(), records.end(), [](const GradientRecord& r) { return r.text.has_value(); });
  if (any_text) {
    std::unordered_map<std::uint64_t, std::size_t> pos;
    for (std::size_t i = 0; i < records.size(); ++i) pos.emplace(records[i].id, i);
    std::vector<std::size_t> labels;
    std::vector<std::optional<std::string>> texts;
    for (const auto& e : partition.entries()) {
      labels.push_back(e.cluster);
      texts.push_back(records[pos.at(e.id)].text);
    }
    res.summaries = tfidf_summarize(labels, texts, partition.k(), top_m);
  }
  return res;
}

nlohmann::ordered_json to_json(const AnalysisResult& r) {
  nlohmann::ordered_json j;
  j["variance"] = to_json(r.variance);
  if (r.stationarity)
    j["stationarity_ratio"] = *r.stationarity;
  else
    j["stationarity_ratio"] = nullptr;
  j["identity_holds"] = r.variance.identity_residual <= 1e-9;
  j["per_cluster_within_total"] = r.variance.exceeding_clusters.empty();
  if (r.summaries) j["tfidf"] = to_json(*r.summaries);
  return j;
}

RouterStudy router_study(const Dataset& data, const Vector& theta, const CentroidSet& centroids,
                         std::span<const std::size_t> labels, std::size_t k, const RunConfig& config,
                         const EvalOptions& eval_options) {
  const auto n = data.examples.size();
  if (labels.size() != n) throw ValidationError("router study: one label per example required");
  // Stratified split: each cluster contributes floor(test_fraction * size)
  // held-out examples, so every cluster stays in the training set.
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) throw ValidationError("router study: label outside [0, K)");
    members[labels[i]].push_back(i);
  }
  Rng rng = make_rng(config.seed, "router.split");
  std::vector<std::size_t> test, train;
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::floor(config.test_fraction * static_cast<double>(m.size())));
    test.insert(test.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), m.begin() + static_cast<std::ptrdiff_t>(n_test), m.end());
  }
  if (test.empty()) throw DegenerateError("router study: no held-out examples (clusters too small for test_fraction)");
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());

  const auto f = static_cast<Eigen::Index>(data.config.input_dim);
  Matrix x_train(static_cast<Eigen::Index>(train.size()), f);
  std::vector<std::size_t> y_train, y_test;
  std::vector<std::optional<std::string>> texts;
  for (std::size_t i = 0; i < train.size(); ++i) {
    x_train.row(static_cast<Eigen::Index>(i)) = router_feature(data.examples[train[i]]).transpose();
    y_train.push_back(labels[train[i]]);
    texts.emplace_back(data.examples[train[i]].text);
  }
  for (auto i : test) y_test.push_back(labels[i]);

  RouterTrainOptions opt;
  opt.epochs = config.router_epochs;
  opt.lr = config.router_lr;
  opt.batch_size = config.router_batch;
  opt.seed = derive_seed(config.seed, "router.train");
  const RouterModel sp = train_router(x_train, y_train, k, opt);
  const Matrix means = cluster_mean_features(x_train, y_train, k);
  const auto summaries = tfidf_summarize(y_train, texts, k, config.top_m);
  const KeywordSets keywords = keyword_sets_from_summaries(summaries);

  const auto example = [&](std::size_t q) -> const Example& { return data.examples[test[q]]; };
  std::vector<NamedRouter> routers;
  routers.push_back({"KS", [&](std::size_t q) {
                       const auto tokens = tokenize(example(q).text);
                       return baseline_ks(keywords, tokens);
                     }});
  routers.push_back({"ES", [&](std::size_t q) { return baseline_es(means, router_feature(example(q))); }});
  routers.push_back({"GS", [&](std::size_t q) {
                       const auto g = per_example_gradient(data.model, theta, example(q));
                       return baseline_gs(centroids, g.vector);
                     }});
  routers.push_back({"SP", [&](std::size_t q) { return route(sp, router_feature(example(q))).expert; }});

  RouterStudy st;
  st.evals = evaluate_routers(routers, y_test, k, eval_options);
  st.train_size = train.size();
  st.test_size = test.size();
  st.router_final_loss = sp.metadata().final_loss;
  return st;
}

namespace {

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = std::string(name) + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::validation: throw ValidationError(msg);
      case ErrorKind::format: throw FormatError(msg);
      case ErrorKind::io: throw IoError(msg);
      case ErrorKind::degenerate: throw DegenerateError(msg);
    }
    throw;
  }
}

}  // namespace

SimulationResult run_simulation(const RunConfig& cfg_in, const EvalOptions& eval_options) {
  RunConfig cfg = cfg_in;
  cfg.sim.seed = cfg.seed;
  stage("config", [&] { cfg.validate(); return 0; });

  auto data = stage("generate", [&] { return gen_mixture(cfg.sim); });
  auto warm = stage("warm-up", [&] {
    return warmup_train(data.model, data.theta0, data.examples, cfg.sim.warmup_fraction, cfg.sim.warmup_steps,
                        cfg.sim.lr, cfg.seed);
  });
  auto grads = stage("extract", [&] { return extract_gradients(data, warm.params); });
  MemorySource source(grads, false);
  auto spectral = stage("estimate-k", [&] { return estimate_k(source, cfg); });
  auto clusters = stage("cluster", [&] { return cluster_stream(source, spectral.centroids, cfg); });
  const auto k = clusters.partition.k();

  std::vector<std::size_t> labels(data.examples.size()), truth(data.examples.size());
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    labels[i] = clusters.partition.at(data.examples[i].id).cluster;
    truth[i] = data.examples[i].task;
  }
  const double purity = cluster_purity(labels, truth);
  auto comparison = stage("experts", [&] { return expert_vs_shared(data, warm.params, labels, k); });
  auto control = stage("random-control", [&] {
    return expert_vs_shared(data, warm.params,
                            random_balanced_labels(data.examples.size(), k, derive_seed(cfg.seed, "sim.control")), k);
  });
  auto correlation = stage("correlation", [&] {
    return embedding_vs_gradient_correlation(data, warm.params, cfg.correlation_pairs,
                                             derive_seed(cfg.seed, "sim.correlation"));
  });
  auto routers = stage("router", [&] {
    return router_study(data, warm.params, clusters.convergence.centroids, labels, k, cfg, eval_options);
  });
  return SimulationResult{std::move(cfg),        std::move(data),       std::move(warm),
                          std::move(grads),      std::move(spectral),   std::move(clusters),
                          std::move(labels),     purity,                std::move(comparison), std::move(control),
                          std::move(correlation), std::move(routers)};
}

nlohmann::ordered_json simulation_report(const SimulationResult& r) {
  nlohmann::ordered_json j;
  j["config"] = to_json(r.config);
  j["examples"] = r.data.examples.size();
  j["grad_dim"] = r.data.model.param_count();
  j["warmup"] = {{"subset_size", r.warmup.subset_ids.size()}, {"losses", r.warmup.losses}};
  j["spectral"] = to_json(r.spectral.report);
  j["convergence"] = convergence_log(r.clusters.convergence);
  j["chosen_K"] = r.clusters.partition.k();
  j["num_tasks"] = r.config.sim.num_tasks;
  j["cluster_sizes"] = r.clusters.partition.cluster_sizes();
  j["purity"] = r.purity;
  j["experts_vs_shared"] = to_json(r.comparison);
  j["random_partition_control"] = to_json(r.random_control);
  j["correlation"] = {{"pairs", r.correlation.input_similarity.size()}, {"pearson_r", r.correlation.pearson_r}};
  nlohmann::ordered_json acc;
  for (const auto& e : r.routers.evals) acc[e.name] = e.accuracy;
  j["router"] = {{"feature_source", "input"},
                 {"train_size", r.routers.train_size},
                 {"test_size", r.routers.test_size},
                 {"final_ce_loss", r.routers.router_final_loss},
                 {"accuracy", acc}};
  return j;
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_simulation_outputs(const SimulationResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_json(simulation_report(r), dir / "report.json");
  write_json(to_json(r.routers.evals), dir / "router_eval.json");

  std::string sil = "tau,subspace_dim,K,silhouette\n";
  for (const auto& c : r.spectral.report.candidates)
    sil += fmt(c.tau) + "," + std::to_string(c.subspace_dim) + "," + std::to_string(c.k) + "," + fmt(c.silhouette) +
           "\n";
  write_text(sil, dir / "silhouette_vs_k.csv");

  std::string sc = "input_similarity,gradient_similarity\n";
  for (std::size_t i = 0; i < r.correlation.input_similarity.size(); ++i)
    sc += fmt(r.correlation.input_similarity[i]) + "," + fmt(r.correlation.gradient_similarity[i]) + "\n";
  write_text(sc, dir / "similarity_scatter.csv");

  write_stream(r.gradients, dir / "gradients.gsg");
  write_stream(export_features(r.data), dir / "features.gsg");
  write_partition(r.clusters.partition, dir / "partition.jsonl");
  write_centroids(r.clusters.convergence.centroids, dir / "centroids.gsg");
}

}  // namespace gspace
