#pragma once

#include "patternkit/types.hpp"

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace patternkit {

struct CorpusStats {
  std::size_t doc_count = 0;
  double average_doc_length = 0.0;
  std::unordered_map<std::string, std::size_t> doc_frequency;
};

CorpusStats corpus_stats(std::span<const std::vector<std::string>> documents);

/// Okapi BM25 of one document. idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
/// which is never negative. Each distinct query term counts once.
double bm25_score(std::span<const std::string> query_tokens, std::span<const std::string> doc_tokens,
                  const CorpusStats& stats, double k1, double b);

/// Tokenized d ⊕ c of every pattern plus the corpus statistics.
class LexicalIndex {
 public:
  LexicalIndex() = default;
  explicit LexicalIndex(const std::map<PatternId, Pattern>& patterns);

  const CorpusStats& stats() const noexcept { return stats_; }
  std::size_t size() const noexcept { return ids_.size(); }

  /// (id, score) for every indexed pattern with a positive score, id order.
  std::vector<std::pair<PatternId, double>> score(std::span<const std::string> query_tokens,
                                                  double k1, double b) const;

 private:
  std::vector<PatternId> ids_;
  std::vector<std::vector<std::string>> documents_;
  CorpusStats stats_;
};

}  // namespace patternkit
