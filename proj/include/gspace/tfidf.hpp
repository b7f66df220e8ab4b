// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gspace {

/// Splits on anything that is not an ASCII letter or digit and lowercases
/// ASCII. Bytes >= 0x80 are kept inside words, so UTF-8 sequences stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct TermWeight {
  std::string term;
  double weight = 0.0;
};

struct ClusterSummary {
  std::size_t cluster = 0;
  bool has_text = false;
  std::vector<TermWeight> terms;
};

/// TF = raw count in the cluster's concatenated text,
/// IDF = log((1 + K) / (1 + df)) + 1. Top `top_m` by TF*IDF, ties
/// lexicographic. Clusters without text get an empty list and has_text=false.
std::vector<ClusterSummary> tfidf_summarize(std::span<const std::size_t> labels,
                                            std::span<const std::optional<std::string>> texts, std::size_t k,
                                            std::size_t top_m);

nlohmann::ordered_json to_json(std::span<const ClusterSummary> summaries);

}  // namespace gspace
