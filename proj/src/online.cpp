// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/online.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gspace/error.hpp"
#include "json.hpp"

namespace gspace {

// ------------------------------------------------------------ ClusterCache

ClusterCache::ClusterCache(std::size_t k, std::size_t dim, std::size_t alpha, std::size_t batch_size)
    : dim_(dim), capacity_(alpha * batch_size), buffers_(k) {
  if (k == 0) throw ValidationError("cluster cache needs K >= 1");
  if (alpha == 0) throw ValidationError("cache scale alpha must be >= 1");
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
}

void ClusterCache::check_cluster(std::size_t cluster) const {
  if (cluster >= buffers_.size())
    throw ValidationError("cluster index " + std::to_string(cluster) + " out of range [0, " +
                          std::to_string(buffers_.size()) + ")");
}

void ClusterCache::push(std::size_t cluster, const Matrix& rows) {
  check_cluster(cluster);
  if (rows.rows() > 0 && static_cast<std::size_t>(rows.cols()) != dim_)
    throw ValidationError("cache push: dimension " + std::to_string(rows.cols()) + " != " + std::to_string(dim_));
  auto& buf = buffers_[cluster];
  // Only the newest `capacity` rows can survive.
  const auto n = static_cast<std::size_t>(rows.rows());
  const std::size_t first = n > capacity_ ? n - capacity_ : 0;
  for (std::size_t i = first; i < n; ++i) buf.push_back(rows.row(static_cast<Eigen::Index>(i)).transpose());
  while (buf.size() > capacity_) buf.pop_front();
}

void ClusterCache::push(std::size_t cluster, std::span<const Vector> vectors) {
  check_cluster(cluster);
  auto& buf = buffers_[cluster];
  for (const auto& v : vectors) {
    if (static_cast<std::size_t>(v.size()) != dim_)
      throw ValidationError("cache push: dimension " + std::to_string(v.size()) + " != " + std::to_string(dim_));
  }
  for (const auto& v : vectors) {
    buf.push_back(v);
    if (buf.size() > capacity_) buf.pop_front();
  }
}

std::size_t ClusterCache::size(std::size_t cluster) const {
  check_cluster(cluster);
  return buffers_[cluster].size();
}

const std::deque<Vector>& ClusterCache::contents(std::size_t cluster) const {
  check_cluster(cluster);
  return buffers_[cluster];
}

Vector ClusterCache::mean(std::size_t cluster) const {
  const auto& buf = contents(cluster);
  if (buf.empty()) throw DegenerateError("mean of empty cache for cluster " + std::to_string(cluster));
  Vector m = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& v : buf) m += v;
  return m / static_cast<double>(buf.size());
}

// -------------------------------------------------------------- OnlineState

void OnlineParams::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("beta must lie in [0, 1)");
  if (alpha < 1) throw ValidationError("alpha must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

OnlineState::OnlineState(CentroidSet initial, const OnlineParams& p)
    : centroids(std::move(initial)),
      cache(centroids.k(), centroids.dim(), p.alpha, p.batch_size),
      params(p),
      epoch_assignments(centroids.k(), 0) {
  params.validate();
}

// --------------------------------------------------------------- assignment

std::vector<Assignment> assign_rows(const Matrix& rows, std::span<const std::uint64_t> ids, const Matrix& centroids) {
  if (rows.cols() != centroids.cols())
    throw ValidationError("assignment: row dim " + std::to_string(rows.cols()) + " != centroid dim " +
                          std::to_string(centroids.cols()));
  Vector cnorm = centroids.rowwise().norm();
  for (Eigen::Index c = 0; c < cnorm.size(); ++c)
    if (cnorm[c] == 0.0) throw ZeroVectorError("centroid " + std::to_string(c) + " has zero norm");
  std::vector<Assignment> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double rn = rows.row(i).norm();
    if (rn == 0.0) {
      const auto idx = static_cast<std::size_t>(i);
      throw ZeroVectorError("zero-norm gradient for id " +
                            std::to_string(idx < ids.size() ? ids[idx] : static_cast<std::uint64_t>(idx)));
    }
    Assignment best{0, -2.0};
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double s = std::clamp(rows.row(i).dot(centroids.row(c)) / (rn * cnorm[c]), -1.0, 1.0);
      if (s > best.similarity) best = {static_cast<std::size_t>(c), s};
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<Assignment> assign_batch(const GradientMatrix& batch, const CentroidSet& centroids) {
  return assign_rows(batch.rows(), batch.ids(), centroids.matrix());
}

EmaStep ema_update(const CentroidSet& centroids, const ClusterCache& cache, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("beta must lie in [0, 1)");
  if (cache.k() != centroids.k() || cache.dim() != centroids.dim())
    throw ValidationError("ema_update: cache shape does not match centroids");
  Matrix next = centroids.matrix();
  std::vector<double> drift(centroids.k(), 0.0);
  for (std::size_t k = 0; k < centroids.k(); ++k) {
    if (cache.empty(k)) continue;
    const auto row = static_cast<Eigen::Index>(k);
    Vector updated = beta * centroids.matrix().row(row).transpose() + (1.0 - beta) * cache.mean(k);
    const double n = updated.norm();
    if (n == 0.0) throw ZeroVectorError("EMA update of cluster " + std::to_string(k) + " has zero norm");
    updated /= n;
    drift[k] = (updated.transpose() - centroids.matrix().row(row)).norm();
    next.row(row) = updated.transpose();
  }
  return EmaStep{CentroidSet(std::move(next), centroids.epoch() + 1), std::move(drift)};
}

GradientMatrix ingest(const GradientMatrix& batch, bool already_normalized) {
  if (already_normalized) return batch;
  return GradientMatrix(normalize_rows(batch.rows(), batch.ids()), batch.ids());
}

namespace {

void check_dim(const GradientSource& source, const CentroidSet& centroids) {
  if (source.header().count > 0 && source.header().dim != centroids.dim())
    throw ValidationError("stream dimension " + std::to_string(source.header().dim) + " != centroid dimension " +
                          std::to_string(centroids.dim()));
}

}  // namespace

void refine_epoch(GradientSource& source, OnlineState& state) {
  check_dim(source, state.centroids);
  source.rewind();
  const Matrix start = state.centroids.matrix();
  const bool normalized = source.header().normalized();
  std::fill(state.epoch_assignments.begin(), state.epoch_assignments.end(), 0);

  BatchIterator batches(source, state.params.batch_size);
  while (auto raw = batches.next()) {
    const auto batch = ingest(*raw, normalized);
    const auto assignment = assign_batch(batch, state.centroids);
    std::vector<std::vector<Eigen::Index>> members(state.centroids.k());
    for (std::size_t i = 0; i < assignment.size(); ++i)
      members[assignment[i].cluster].push_back(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (members[k].empty()) continue;
      state.cache.push(k, Matrix(batch.rows()(members[k], Eigen::all)));
      state.epoch_assignments[k] += members[k].size();
    }
    state.centroids = ema_update(state.centroids, state.cache, state.params.beta).centroids;
  }

  double drift = 0.0;
  for (Eigen::Index k = 0; k < start.rows(); ++k)
    drift = std::max(drift, (state.centroids.matrix().row(k) - start.row(k)).norm());
  state.last_drift = drift;
  ++state.epoch;
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::converged: return "converged";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::single_cluster: return "single_cluster";
  }
  return "unknown";
}

ConvergenceResult run_until_converged(GradientSource& source, OnlineState& state, double drift_tol,
                                      std::size_t max_epochs) {
  if (!(drift_tol > 0.0)) throw ValidationError("drift_tol must be > 0");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  check_dim(source, state.centroids);

  ConvergenceResult res{state.centroids, 0, StopReason::max_epochs, {}, {}};
  if (state.centroids.k() == 1) {
    state.last_drift = 0.0;
    ++state.epoch;
    state.epoch_assignments.assign(1, source.header().count);
    res.epochs = 1;
    res.reason = StopReason::single_cluster;
    res.drift_history.push_back(0.0);
    return res;
  }

  for (std::size_t e = 0; e < max_epochs; ++e) {
    refine_epoch(source, state);
    res.drift_history.push_back(state.last_drift);
    res.epochs = e + 1;
    if (state.last_drift < drift_tol) {
      res.reason = StopReason::converged;
      break;
    }
  }
  res.centroids = state.centroids;
  for (std::size_t k = 0; k < state.epoch_assignments.size(); ++k)
    if (state.epoch_assignments[k] == 0) res.starved_clusters.push_back(k);
  return res;
}

// ---------------------------------------------------------------- Partition

Partition::Partition(std::vector<PartitionEntry> entries, std::size_t k)
    : entries_(std::move(entries)), k_(k), sizes_(k, 0) {
  if (k_ == 0) throw ValidationError("partition needs K >= 1");
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.cluster >= k_)
      throw ValidationError("partition: id " + std::to_string(e.id) + " has cluster " + std::to_string(e.cluster) +
                            " outside [0, " + std::to_string(k_) + ")");
    if (!index_.emplace(e.id, i).second)
      throw ValidationError("partition: id " + std::to_string(e.id) + " assigned more than once");
    ++sizes_[e.cluster];
  }
}

const PartitionEntry& Partition::at(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("partition has no entry for id " + std::to_string(id));
  return entries_[it->second];
}

std::vector<std::size_t> Partition::labels() const {
  std::vector<std::size_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.cluster);
  return out;
}

Partition final_assignment(GradientSource& source, const CentroidSet& centroids, std::size_t batch_size) {
  check_dim(source, centroids);
  source.rewind();
  std::vector<PartitionEntry> entries;
  entries.reserve(source.header().count);
  BatchIterator batches(source, batch_size);
  while (auto batch = batches.next()) {
    const auto a = assign_batch(*batch, centroids);
    for (std::size_t i = 0; i < a.size(); ++i) entries.push_back({batch->ids()[i], a[i].cluster, a[i].similarity});
  }
  return Partition(std::move(entries), centroids.k());
}

void write_partition(const Partition& partition, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : partition.entries()) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["cluster"] = e.cluster;
    j["similarity"] = e.similarity;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Partition read_partition(const std::filesystem::path& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PartitionEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_cluster = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PartitionEntry e{j.at("id").get<std::uint64_t>(), j.at("cluster").get<std::size_t>(),
                       j.value("similarity", 0.0)};
      max_cluster = std::max(max_cluster, e.cluster);
      entries.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (entries.empty()) throw FormatError(path.string() + ": partition is empty");
  return Partition(std::move(entries), k == 0 ? max_cluster + 1 : k);
}

}  // namespace gspace
