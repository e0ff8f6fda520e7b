#pragma once

// Corpus-level BLEU over whitespace tokens: geometric mean of modified
// n-gram precisions with corpus-pooled counts, times the brevity penalty
// exp(min(0, 1 - ref_len/hyp_len)), scaled to [0, 100]. Token comparison
// is exact match (case-sensitive). Optional add-one smoothing on orders
// >= 2 for very short corpora; off by default, and any zero precision
// then yields a score of 0.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace simulst {

struct EvalPair {
  std::vector<std::string> hypothesis;
  std::vector<std::string> reference;  // non-empty
};

namespace detail {

inline std::map<std::vector<std::string>, std::int64_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t order) {
  std::map<std::vector<std::string>, std::int64_t> counts;
  if (tokens.size() < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    auto begin = tokens.begin() + static_cast<std::ptrdiff_t>(i);
    ++counts[std::vector<std::string>(begin, begin + static_cast<std::ptrdiff_t>(order))];
  }
  return counts;
}

}  // namespace detail

inline double corpus_bleu(const std::vector<EvalPair>& pairs, int max_order = 4,
                          bool smoothing = false) {
  if (pairs.empty()) throw std::invalid_argument("corpus_bleu needs at least one pair");
  if (max_order < 1) throw std::invalid_argument("max_order must be >= 1");
  for (const auto& pair : pairs)
    if (pair.reference.empty()) throw std::invalid_argument("reference must be non-empty");

  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
  std::vector<std::int64_t> matched(static_cast<std::size_t>(max_order), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(max_order), 0);
  for (const auto& pair : pairs) {
    hyp_len += static_cast<std::int64_t>(pair.hypothesis.size());
    ref_len += static_cast<std::int64_t>(pair.reference.size());
    for (int order = 1; order <= max_order; ++order) {
      auto hyp_counts = detail::ngram_counts(pair.hypothesis, static_cast<std::size_t>(order));
      auto ref_counts = detail::ngram_counts(pair.reference, static_cast<std::size_t>(order));
      for (const auto& [ngram, count] : hyp_counts) {
        total[order - 1] += count;
        auto it = ref_counts.find(ngram);
        if (it != ref_counts.end()) matched[order - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_precision_sum = 0.0;
  for (int order = 1; order <= max_order; ++order) {
    std::int64_t m = matched[order - 1];
    std::int64_t t = total[order - 1];
    if (smoothing && order >= 2) {
      ++m;
      ++t;
    }
    if (m == 0 || t == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  double geo_mean = std::exp(log_precision_sum / max_order);
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * geo_mean * bp;
}

}  // namespace simulst
