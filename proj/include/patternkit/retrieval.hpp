#pragma once

#include "patternkit/repository.hpp"
#include "patternkit/retrieval_index.hpp"
#include "patternkit/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace patternkit {

/// Reformulates a task description into m retrieval queries. The original
/// description is always the first query and every query is non-empty.
class QueryGenerator {
 public:
  virtual ~QueryGenerator() = default;
  virtual std::vector<std::string> expand(std::string_view task_description,
                                          std::size_t m) const = 0;
};

/// Rule-based reformulations: original, content words (stopwords dropped),
/// and the constraint clauses ("with", "under", "within", ...). Any rule that
/// yields nothing falls back to the original text.
class ScriptedQueryGenerator final : public QueryGenerator {
 public:
  std::vector<std::string> expand(std::string_view task_description,
                                  std::size_t m) const override;
};

/// Replays a fixed query list; used for audit replay.
class FixedQueryGenerator final : public QueryGenerator {
 public:
  explicit FixedQueryGenerator(std::vector<std::string> queries) : queries_(std::move(queries)) {}
  std::vector<std::string> expand(std::string_view task_description,
                                  std::size_t m) const override;

 private:
  std::vector<std::string> queries_;
};

struct RankedHit {
  PatternId pattern_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const RankedHit&, const RankedHit&) = default;
};

using Ranking = std::vector<RankedHit>;

/// Sorts by score descending, smaller id first on ties, and assigns ranks.
Ranking make_ranking(std::vector<std::pair<PatternId, double>> scored);

struct TaskQuery {
  std::string task_description;
  std::vector<std::string> queries;
  std::vector<Embedding> embeddings;
};

TaskQuery prepare_query(const Repository& repo, std::string_view task_description,
                        const QueryGenerator& generator);

double max_query_sim(std::span<const Embedding> queries, const Pattern& pattern);

/// sim(task, p) for every pattern, in id order.
std::vector<std::pair<PatternId, double>> semantic_scores(const Repository& repo,
                                                          std::span<const Embedding> queries);

/// TopK({p : sim(task, p) >= θ}, k).
Ranking retrieve(const Repository& repo, const TaskQuery& query, std::size_t k, double theta);
Ranking retrieve(const Repository& repo, std::string_view task_description, std::size_t k,
                 double theta);

Ranking bm25_ranking(const Repository& repo, std::string_view text);

/// score(p) = Σ over rankings containing p of 1 / (constant + rank_p).
Ranking rrf_fuse(std::span<const Ranking> rankings, double rrf_constant);

/// Patterns with semantic score >= θ ordered by RRF(BM25, semantic), at most
/// `limit` of them. Hit scores are the fused scores.
Ranking hybrid_retrieve(const Repository& repo, const TaskQuery& query, std::size_t limit,
                        double theta);

struct MmrCandidate {
  PatternId pattern_id;
  double relevance = 0.0;  // sim(task, p)
  Embedding embedding;
};

struct MmrPick {
  PatternId pattern_id;
  double relevance = 0.0;
  double mmr_value = 0.0;
};

/// One MMR evaluation: λ·relevance − (1−λ)·max_selected_similarity.
inline double mmr_value(double lambda, double relevance, double max_selected_similarity) {
  return lambda * relevance - (1.0 - lambda) * max_selected_similarity;
}

/// Greedy maximal marginal relevance. The first pick is the most relevant
/// candidate; afterwards the argmax of mmr_value. Ties go to the smaller id.
std::vector<MmrPick> mmr_select(std::span<const MmrCandidate> candidates, double lambda,
                                std::size_t k);

/// The full read-side pipeline used by task execution: threshold, optional
/// hybrid fusion, optional MMR, as configured. Scores are semantic relevance.
std::vector<MmrPick> select_patterns(const Repository& repo, const TaskQuery& query);

}  // namespace patternkit
