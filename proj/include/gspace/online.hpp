// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Online centroid refinement: cosine assignment of stream batches, a
// per-cluster FIFO cache of recent assignments, EMA centroid updates, and
// the final full-stream assignment pass.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "gspace/centroids.hpp"
#include "gspace/stream.hpp"

namespace gspace {

/// Per-cluster FIFO of the most recent assigned gradients. Capacity is
/// alpha * batch_size for every cluster.
class ClusterCache {
 public:
  ClusterCache(std::size_t k, std::size_t dim, std::size_t alpha, std::size_t batch_size);

  /// Appends rows newest-last, evicting oldest entries beyond capacity.
  void push(std::size_t cluster, const Matrix& rows);
  void push(std::size_t cluster, std::span<const Vector> vectors);

  std::size_t k() const { return buffers_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size(std::size_t cluster) const;
  bool empty(std::size_t cluster) const { return size(cluster) == 0; }
  const std::deque<Vector>& contents(std::size_t cluster) const;
  /// Mean of the cached vectors (cluster must be nonempty).
  Vector mean(std::size_t cluster) const;

 private:
  void check_cluster(std::size_t cluster) const;

  std::size_t dim_;
  std::size_t capacity_;
  std::vector<std::deque<Vector>> buffers_;
};

struct OnlineParams {
  double beta = 0.9;
  std::size_t alpha = 5;
  std::size_t batch_size = 32;

  void validate() const;
};

struct OnlineState {
  OnlineState(CentroidSet initial, const OnlineParams& params);

  CentroidSet centroids;
  ClusterCache cache;
  OnlineParams params;
  std::size_t epoch = 0;
  double last_drift = 0.0;
  std::vector<std::size_t> epoch_assignments;  // per cluster, last epoch
};

struct Assignment {
  std::size_t cluster = 0;
  double similarity = 0.0;
};

/// argmax_k cosine(row, centroid_k), lowest index on ties. Centroid rows need
/// not be unit norm. Zero-norm rows raise ZeroVectorError naming the id.
std::vector<Assignment> assign_rows(const Matrix& rows, std::span<const std::uint64_t> ids, const Matrix& centroids);
std::vector<Assignment> assign_batch(const GradientMatrix& batch, const CentroidSet& centroids);

struct EmaStep {
  CentroidSet centroids;
  std::vector<double> drift;  // ||c_new - c_old|| between unit centroids
};

/// c_k <- normalize(beta c_k + (1 - beta) mean(cache_k)); clusters with an
/// empty cache keep their centroid.
EmaStep ema_update(const CentroidSet& centroids, const ClusterCache& cache, double beta);

/// Divides rows by their norms unless the source is flagged normalized.
GradientMatrix ingest(const GradientMatrix& batch, bool already_normalized);

/// One pass over the source: assign, cache, EMA per batch. `last_drift` is the
/// largest centroid movement between the start and the end of the epoch.
void refine_epoch(GradientSource& source, OnlineState& state);

enum class StopReason { converged, max_epochs, single_cluster };

struct ConvergenceResult {
  CentroidSet centroids;
  std::size_t epochs = 0;
  StopReason reason = StopReason::max_epochs;
  std::vector<double> drift_history;
  std::vector<std::size_t> starved_clusters;  // no assignments in the final epoch
};

/// Repeats refine_epoch until drift < drift_tol or max_epochs. With K == 1
/// every assignment is fixed, so a single epoch with zero drift is recorded
/// and the centroid is left as given.
ConvergenceResult run_until_converged(GradientSource& source, OnlineState& state, double drift_tol,
                                      std::size_t max_epochs);

const char* to_string(StopReason reason);

struct PartitionEntry {
  std::uint64_t id = 0;
  std::size_t cluster = 0;
  double similarity = 0.0;
};

/// Disjoint cover of a stream's ids by K clusters, in stream order.
class Partition {
 public:
  Partition(std::vector<PartitionEntry> entries, std::size_t k);

  const std::vector<PartitionEntry>& entries() const { return entries_; }
  const std::vector<std::size_t>& cluster_sizes() const { return sizes_; }
  std::size_t k() const { return k_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::uint64_t id) const { return index_.count(id) != 0; }
  /// Throws ValidationError for an unknown id.
  const PartitionEntry& at(std::uint64_t id) const;
  std::vector<std::size_t> labels() const;

 private:
  std::vector<PartitionEntry> entries_;
  std::size_t k_;
  std::vector<std::size_t> sizes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

Partition final_assignment(GradientSource& source, const CentroidSet& centroids, std::size_t batch_size = 256);

/// JSON-lines {"id", "cluster", "similarity"}. `k` defaults to max cluster + 1.
void write_partition(const Partition& partition, const std::filesystem::path& path);
Partition read_partition(const std::filesystem::path& path, std::size_t k = 0);

}  // namespace gspace
