// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/router.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gspace/error.hpp"
#include "gspace/online.hpp"
#include "gspace/rng.hpp"

namespace gspace {

RouterModel::RouterModel(Matrix w, Vector b, RouterMetadata metadata)
    : w_(std::move(w)), b_(std::move(b)), meta_(std::move(metadata)) {
  if (w_.rows() < 2) throw ValidationError("router needs K >= 2 experts");
  if (w_.cols() < 1) throw ValidationError("router needs feature dim >= 1");
  if (b_.size() != w_.rows()) throw ValidationError("router bias length does not match K");
  if (!w_.allFinite() || !b_.allFinite()) throw ValidationError("router parameters must be finite");
}

Vector RouterModel::logits(const VectorRef& feature) const {
  if (feature.size() != w_.cols())
    throw ValidationError("feature dim " + std::to_string(feature.size()) + " != router dim " +
                          std::to_string(w_.cols()));
  return w_ * feature + b_;
}

Vector softmax(const VectorRef& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

namespace {

std::size_t argmax_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  return best;
}

void check_labels(const Matrix& features, std::span<const std::size_t> labels, std::size_t k) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ValidationError("router: " + std::to_string(features.rows()) + " feature rows but " +
                          std::to_string(labels.size()) + " labels");
  for (auto l : labels)
    if (l >= k) throw ValidationError("router: label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
}

}  // namespace

Route route(const RouterModel& model, const VectorRef& feature) {
  Vector z = model.logits(feature);
  Route r;
  r.expert = argmax_lowest(z);
  r.probabilities = softmax(z);
  return r;
}

CrossEntropyGradient cross_entropy_gradient(const Matrix& w, const Vector& b, const Matrix& features,
                                            std::span<const std::size_t> labels) {
  check_labels(features, labels, static_cast<std::size_t>(w.rows()));
  if (labels.empty()) throw ValidationError("cross-entropy over an empty set");
  if (features.cols() != w.cols()) throw ValidationError("cross-entropy: feature dim mismatch");
  CrossEntropyGradient g{0.0, Matrix::Zero(w.rows(), w.cols()), Vector::Zero(w.rows())};
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Vector z = w * features.row(i).transpose() + b;
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    g.loss += lse - z[y];
    Vector r = (z.array() - lse).exp().matrix();
    r[y] -= 1.0;
    g.dw += r * features.row(i);
    g.db += r;
  }
  const double inv = 1.0 / static_cast<double>(features.rows());
  g.loss *= inv;
  g.dw *= inv;
  g.db *= inv;
  return g;
}

double cross_entropy(const Matrix& w, const Vector& b, const Matrix& features, std::span<const std::size_t> labels) {
  return cross_entropy_gradient(w, b, features, labels).loss;
}

RouterModel train_router(const Matrix& features, std::span<const std::size_t> labels, std::size_t k,
                         const RouterTrainOptions& opt) {
  if (k < 2) throw ValidationError("router needs K >= 2 experts");
  check_labels(features, labels, k);
  if (labels.size() < k) throw ValidationError("router needs at least K training examples");
  if (opt.epochs < 1 || opt.batch_size < 1) throw ValidationError("router epochs and batch size must be >= 1");
  if (!(opt.lr > 0.0)) throw ValidationError("router learning rate must be > 0");
  if (!features.allFinite()) throw ValidationError("router features must be finite");
  std::vector<bool> seen(k, false);
  for (auto l : labels) seen[l] = true;
  std::string missing;
  for (std::size_t c = 0; c < k; ++c)
    if (!seen[c]) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
  if (!missing.empty()) throw ValidationError("router training labels miss classes: " + missing);

  const auto f = features.cols();
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(k), f);
  Vector b = Vector::Zero(static_cast<Eigen::Index>(k));
  RouterMetadata meta{opt.epochs, opt.lr, opt.batch_size, opt.seed, 0.0, 0.0, opt.feature_source};
  meta.initial_loss = cross_entropy(w, b, features, labels);

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(opt.seed, "router.shuffle");
  Matrix xb;
  std::vector<std::size_t> yb;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const auto end = std::min(order.size(), start + opt.batch_size);
      xb.resize(static_cast<Eigen::Index>(end - start), f);
      yb.clear();
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = features.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(labels[order[i]]);
      }
      const auto g = cross_entropy_gradient(w, b, xb, yb);
      w -= opt.lr * g.dw;
      b -= opt.lr * g.db;
    }
    if (!w.allFinite() || !b.allFinite())
      throw DegenerateError("router training diverged in epoch " + std::to_string(e) + "; try a smaller lr");
  }
  meta.final_loss = cross_entropy(w, b, features, labels);
  return RouterModel(std::move(w), std::move(b), std::move(meta));
}

nlohmann::ordered_json to_json(const RouterModel& model) {
  nlohmann::ordered_json j;
  j["K"] = model.k();
  j["f"] = model.dim();
  std::vector<double> w(model.weights().data(), model.weights().data() + model.weights().size());
  j["W"] = w;
  j["b"] = std::vector<double>(model.bias().data(), model.bias().data() + model.bias().size());
  const auto& m = model.metadata();
  j["metadata"] = {{"epochs", m.epochs},         {"lr", m.lr},
                   {"batch_size", m.batch_size}, {"seed", m.seed},
                   {"initial_loss", m.initial_loss}, {"final_loss", m.final_loss},
                   {"feature_source", m.feature_source}};
  return j;
}

RouterModel router_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw FormatError("router model must be a JSON object");
    const auto k = j.at("K").get<std::size_t>();
    const auto f = j.at("f").get<std::size_t>();
    const auto w = j.at("W").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (w.size() != k * f) throw FormatError("router W has " + std::to_string(w.size()) + " entries, expected K*f");
    if (b.size() != k) throw FormatError("router b has " + std::to_string(b.size()) + " entries, expected K");
    RouterMetadata meta;
    if (j.contains("metadata")) {
      const auto& m = j.at("metadata");
      meta.epochs = m.value("epochs", std::size_t{0});
      meta.lr = m.value("lr", 0.0);
      meta.batch_size = m.value("batch_size", std::size_t{0});
      meta.seed = m.value("seed", std::uint64_t{0});
      meta.initial_loss = m.value("initial_loss", 0.0);
      meta.final_loss = m.value("final_loss", 0.0);
      meta.feature_source = m.value("feature_source", std::string("input"));
    }
    Matrix wm = Eigen::Map<const Matrix>(w.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(f));
    Vector bv = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(k));
    return RouterModel(std::move(wm), std::move(bv), std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed router model: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid router model: ") + e.what());
  }
}

void save_router(const RouterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

RouterModel load_router(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return router_from_json(j);
}

std::size_t baseline_gs(const CentroidSet& centroids, const VectorRef& gradient) {
  Matrix row = gradient.transpose();
  const std::uint64_t id = 0;
  return assign_rows(row, std::span<const std::uint64_t>(&id, 1), centroids.matrix()).front().cluster;
}

Matrix cluster_mean_features(const Matrix& features, std::span<const std::size_t> labels, std::size_t k) {
  check_labels(features, labels, k);
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(k), features.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    means.row(static_cast<Eigen::Index>(labels[i])) += features.row(static_cast<Eigen::Index>(i));
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw DegenerateError("cluster " + std::to_string(c) + " has no feature rows");
    means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  return means;
}

std::size_t baseline_es(const Matrix& cluster_means, const VectorRef& feature) {
  if (cluster_means.rows() < 1) throw ValidationError("ES baseline needs at least one cluster mean");
  Matrix row = feature.transpose();
  const std::uint64_t id = 0;
  return assign_rows(row, std::span<const std::uint64_t>(&id, 1), cluster_means).front().cluster;
}

KeywordSets keyword_sets_from_summaries(std::span<const ClusterSummary> summaries) {
  KeywordSets sets;
  for (const auto& s : summaries) {
    std::set<std::string> terms;
    for (const auto& t : s.terms) terms.insert(t.term);
    sets.push_back(std::move(terms));
  }
  return sets;
}

std::size_t baseline_ks(const KeywordSets& keywords, std::span<const std::string> tokens) {
  if (keywords.empty()) throw ValidationError("KS baseline needs keyword sets");
  const std::set<std::string> uniq(tokens.begin(), tokens.end());
  std::size_t best = 0, best_overlap = 0;
  for (std::size_t c = 0; c < keywords.size(); ++c) {
    std::size_t overlap = 0;
    for (const auto& t : uniq) overlap += keywords[c].count(t);
    if (overlap > best_overlap) {
      best = c;
      best_overlap = overlap;
    }
  }
  return best;
}

std::vector<RouterEval> evaluate_routers(std::span<const NamedRouter> routers, std::span<const std::size_t> labels,
                                         std::size_t k, const EvalOptions& opt) {
  if (labels.empty()) throw ValidationError("router evaluation on an empty test set");
  for (auto l : labels)
    if (l >= k) throw ValidationError("test label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
  const auto n = labels.size();
  std::vector<RouterEval> out;
  for (const auto& r : routers) {
    RouterEval ev;
    ev.name = r.name;
    ev.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pred = r.query(i);
      if (pred >= k) throw ValidationError("router '" + r.name + "' returned expert " + std::to_string(pred));
      ++ev.confusion[labels[i]][pred];
      correct += pred == labels[i];
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    if (opt.measure_latency) {
      volatile std::size_t sink = 0;
      for (std::size_t w = 0; w < opt.warmup_queries; ++w) sink = sink + r.query(w % n);
      const auto total = std::max(opt.min_timed_queries, n);
      std::vector<double> ms;
      ms.reserve(total);
      for (std::size_t q = 0; q < total; ++q) {
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + r.query(q % n);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
      double med = ms[ms.size() / 2];
      if (ms.size() % 2 == 0) {
        const double lo = *std::max_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2));
        med = 0.5 * (med + lo);
      }
      ev.latency_ms = med;
      ev.timed_queries = total;
    }
    out.push_back(std::move(ev));
  }
  return out;
}

nlohmann::ordered_json to_json(std::span<const RouterEval> evals) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : evals) {
    nlohmann::ordered_json j;
    j["router"] = e.name;
    j["accuracy"] = e.accuracy;
    j["latency_ms"] = e.latency_ms;
    j["timed_queries"] = e.timed_queries;
    j["confusion"] = e.confusion;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace gspace
