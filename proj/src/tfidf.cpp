// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gspace/error.hpp"

namespace gspace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 0x80) || std::isalnum(c);
    if (word) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<ClusterSummary> tfidf_summarize(std::span<const std::size_t> labels,
                                            std::span<const std::optional<std::string>> texts, std::size_t k,
                                            std::size_t top_m) {
  if (labels.size() != texts.size()) throw ValidationError("tfidf: one text slot per label required");
  if (top_m < 1) throw ValidationError("tfidf: top_m must be >= 1");
  if (k == 0) throw ValidationError("tfidf: K must be >= 1");

  std::vector<std::map<std::string, std::size_t>> tf(k);
  std::vector<bool> has_text(k, false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw ValidationError("tfidf: label outside [0, K)");
    if (!texts[i]) continue;
    has_text[labels[i]] = true;
    for (auto& tok : tokenize(*texts[i])) ++tf[labels[i]][tok];
  }
  std::map<std::string, std::size_t> df;
  for (const auto& counts : tf)
    for (const auto& [term, _] : counts) ++df[term];

  const double kk = static_cast<double>(k);
  std::vector<ClusterSummary> out;
  for (std::size_t c = 0; c < k; ++c) {
    ClusterSummary s{c, has_text[c], {}};
    for (const auto& [term, count] : tf[c]) {
      const double idf = std::log((1.0 + kk) / (1.0 + static_cast<double>(df[term]))) + 1.0;
      s.terms.push_back({term, static_cast<double>(count) * idf});
    }
    std::sort(s.terms.begin(), s.terms.end(), [](const TermWeight& a, const TermWeight& b) {
      return a.weight != b.weight ? a.weight > b.weight : a.term < b.term;
    });
    if (s.terms.size() > top_m) s.terms.resize(top_m);
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json to_json(std::span<const ClusterSummary> summaries) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& s : summaries) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& t : s.terms) arr.push_back({t.term, t.weight});
    j[std::to_string(s.cluster)] = arr;
  }
  return j;
}

}  // namespace gspace
