// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/analysis.hpp"

#include <cmath>
#include <unordered_map>

#include "gspace/error.hpp"

namespace gspace {

void KahanSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

Vector compensated_mean(const Matrix& rows) {
  if (rows.rows() == 0) throw ValidationError("mean of an empty gradient set");
  Vector mean(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    KahanSum s;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) s.add(rows(i, j));
    mean[j] = s.value() / static_cast<double>(rows.rows());
  }
  return mean;
}

namespace {

// Corrected two-pass: (sum d^2 - ||sum d||^2 / n) / n with d = g - mean.
double centered_second_moment(const Matrix& rows, const Vector& mean) {
  const auto n = static_cast<double>(rows.rows());
  KahanSum sq;
  Vector resid_sum = Vector::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Vector d = rows.row(i).transpose() - mean;
    sq.add(d.squaredNorm());
    resid_sum += d;
  }
  return std::max(0.0, (sq.value() - resid_sum.squaredNorm() / n) / n);
}

}  // namespace

double gradient_variance(const Matrix& rows) {
  if (rows.rows() == 0) throw ValidationError("variance of an empty gradient set");
  return centered_second_moment(rows, compensated_mean(rows));
}

double gradient_covariance(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw ValidationError("covariance needs paired samples of identical shape");
  if (x.rows() == 0) throw ValidationError("covariance of empty samples");
  const Vector mx = compensated_mean(x);
  const Vector my = compensated_mean(y);
  KahanSum s;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s.add((x.row(i).transpose() - mx).dot(y.row(i).transpose() - my));
  return s.value() / static_cast<double>(x.rows());
}

MixtureVarianceResult mixture_variance_check(std::span<const Matrix> subsets, std::span<const double> alphas) {
  if (subsets.empty()) throw ValidationError("mixture_variance_check: no subsets");
  if (subsets.size() != alphas.size()) throw ValidationError("mixture_variance_check: one weight per subset required");
  KahanSum wsum;
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("mixture_variance_check: weights must lie in [0, 1]");
    wsum.add(a);
  }
  if (std::abs(wsum.value() - 1.0) > 1e-12) throw ValidationError("mixture_variance_check: weights must sum to 1");
  for (const auto& s : subsets)
    if (s.rows() != subsets[0].rows() || s.cols() != subsets[0].cols())
      throw ValidationError("mixture_variance_check: subsets must be paired draws of identical shape");

  Matrix combined = Matrix::Zero(subsets[0].rows(), subsets[0].cols());
  for (std::size_t i = 0; i < subsets.size(); ++i) combined += alphas[i] * subsets[i];

  MixtureVarianceResult r;
  r.lhs = gradient_variance(combined);
  KahanSum rhs;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    rhs.add(alphas[i] * alphas[i] * gradient_variance(subsets[i]));
    for (std::size_t j = 0; j < subsets.size(); ++j)
      if (i != j) rhs.add(alphas[i] * alphas[j] * gradient_covariance(subsets[i], subsets[j]));
  }
  r.rhs = rhs.value();
  const double scale = std::max({std::abs(r.lhs), std::abs(r.rhs), 1e-300});
  r.relative_error = std::abs(r.lhs - r.rhs) / scale;
  return r;
}

VarianceReport total_variance_decomposition(const Matrix& rows, std::span<const std::size_t> labels, std::size_t k) {
  if (rows.rows() == 0) throw ValidationError("variance decomposition of an empty gradient set");
  if (static_cast<std::size_t>(rows.rows()) != labels.size())
    throw ValidationError("variance decomposition: one label per row required");
  if (k == 0) throw ValidationError("variance decomposition: K must be >= 1");

  VarianceReport rep;
  const auto n = static_cast<double>(rows.rows());
  const Vector mu = compensated_mean(rows);
  rep.total_variance = centered_second_moment(rows, mu);
  {
    KahanSum s;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) s.add(rows.row(i).squaredNorm());
    rep.mean_squared_norm = s.value() / n;
  }

  std::vector<std::vector<Eigen::Index>> members(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k)
      throw ValidationError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(k) + ")");
    members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }

  KahanSum within, between;
  for (std::size_t c = 0; c < k; ++c) {
    rep.cluster_sizes.push_back(members[c].size());
    if (members[c].empty()) {
      rep.per_cluster_variance.push_back(0.0);
      rep.weights.push_back(0.0);
      rep.empty_clusters.push_back(c);
      continue;
    }
    const Matrix sub = rows(members[c], Eigen::all);
    const Vector mu_c = compensated_mean(sub);
    const double var_c = centered_second_moment(sub, mu_c);
    const double p = static_cast<double>(members[c].size()) / n;
    rep.per_cluster_variance.push_back(var_c);
    rep.weights.push_back(p);
    within.add(p * var_c);
    between.add(p * (mu_c - mu).squaredNorm());
    if (var_c > rep.total_variance * (1.0 + 1e-12)) rep.exceeding_clusters.push_back(c);
  }
  rep.within_term = within.value();
  rep.between_term = between.value();
  // With zero total variance nothing can be reduced; report a neutral ratio.
  rep.variance_ratio = rep.total_variance > 0.0 ? rep.within_term / rep.total_variance : 1.0;
  rep.identity_residual = rep.total_variance > 0.0
                              ? std::abs(rep.within_term + rep.between_term - rep.total_variance) / rep.total_variance
                              : std::abs(rep.within_term + rep.between_term);
  return rep;
}

VarianceReport total_variance_decomposition(const Partition& partition, const GradientMatrix& gradients) {
  std::unordered_map<std::uint64_t, Eigen::Index> row_of;
  row_of.reserve(gradients.size());
  for (std::size_t i = 0; i < gradients.size(); ++i) row_of.emplace(gradients.ids()[i], static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> rows;
  std::vector<std::size_t> labels;
  rows.reserve(partition.size());
  labels.reserve(partition.size());
  for (const auto& e : partition.entries()) {
    auto it = row_of.find(e.id);
    if (it == row_of.end()) throw ValidationError("no gradient for partitioned id " + std::to_string(e.id));
    rows.push_back(it->second);
    labels.push_back(e.cluster);
  }
  if (rows.empty()) throw ValidationError("variance decomposition of an empty partition");
  const Matrix selected = gradients.rows()(rows, Eigen::all);
  return total_variance_decomposition(selected, labels, partition.k());
}

nlohmann::ordered_json to_json(const VarianceReport& r) {
  nlohmann::ordered_json j;
  j["total_variance"] = r.total_variance;
  j["within_term"] = r.within_term;
  j["between_term"] = r.between_term;
  j["variance_ratio"] = r.variance_ratio;
  j["identity_residual"] = r.identity_residual;
  j["cluster_sizes"] = r.cluster_sizes;
  j["weights"] = r.weights;
  j["per_cluster_variance"] = r.per_cluster_variance;
  j["empty_clusters"] = r.empty_clusters;
  j["clusters_exceeding_total_variance"] = r.exceeding_clusters;
  return j;
}

double stationarity_ratio(const VarianceReport& report) {
  const double floor = 1e-24 * std::max(report.mean_squared_norm, 1e-300);
  if (!(report.total_variance > floor))
    throw DegenerateError("stationarity ratio undefined: total gradient variance is zero");
  return report.within_term / report.total_variance;
}

FlopsEstimate flops_estimate(const FlopsModel& m, RoutingMethod method) {
  if (m.f_base < 0 || m.f_lora < 0 || m.f_sp < 0 || m.k < 0)
    throw ValidationError("FLOPs model fields must be nonnegative");
  switch (method) {
    case RoutingMethod::elrea:
      // One base+adapter forward and an adapter backward (2x) to get the
      // routing gradient, then k ensembled expert forwards.
      return {m.f_base + 3.0 * m.f_lora, (1.0 + m.k) * m.f_base + (3.0 + m.k) * m.f_lora};
    case RoutingMethod::gradientspace:
      return {m.f_sp, m.f_base + m.f_lora + m.f_sp};
  }
  return {};
}

}  // namespace gspace
