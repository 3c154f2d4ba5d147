#include "patternkit/retrieval.hpp"

#include "patternkit/embedding.hpp"
#include "patternkit/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

namespace patternkit {

// -- lexical ----------------------------------------------------------------

CorpusStats corpus_stats(std::span<const std::vector<std::string>> documents) {
  CorpusStats stats;
  stats.doc_count = documents.size();
  std::size_t total = 0;
  for (const auto& doc : documents) {
    total += doc.size();
    for (const auto& term : std::set<std::string>(doc.begin(), doc.end())) {
      ++stats.doc_frequency[term];
    }
  }
  stats.average_doc_length =
      documents.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(documents.size());
  return stats;
}

double bm25_score(std::span<const std::string> query_tokens, std::span<const std::string> doc_tokens,
                  const CorpusStats& stats, double k1, double b) {
  if (doc_tokens.empty() || stats.doc_count == 0) return 0.0;
  const auto n = static_cast<double>(stats.doc_count);
  const double length_norm =
      1.0 - b + b * static_cast<double>(doc_tokens.size()) / stats.average_doc_length;
  double score = 0.0;
  std::unordered_set<std::string_view> seen;
  for (const auto& term : query_tokens) {
    if (!seen.insert(term).second) continue;
    const auto tf = static_cast<double>(std::count(doc_tokens.begin(), doc_tokens.end(), term));
    if (tf == 0.0) continue;
    const auto df_it = stats.doc_frequency.find(term);
    const double df = df_it == stats.doc_frequency.end() ? 0.0 : static_cast<double>(df_it->second);
    const double idf = std::log1p((n - df + 0.5) / (df + 0.5));
    score += idf * tf * (k1 + 1.0) / (tf + k1 * length_norm);
  }
  return score;
}

LexicalIndex::LexicalIndex(const std::map<PatternId, Pattern>& patterns) {
  ids_.reserve(patterns.size());
  documents_.reserve(patterns.size());
  for (const auto& [id, p] : patterns) {
    ids_.push_back(id);
    documents_.push_back(tokenize(retrieval_text(p.metadata)));
  }
  stats_ = corpus_stats(documents_);
}

std::vector<std::pair<PatternId, double>> LexicalIndex::score(
    std::span<const std::string> query_tokens, double k1, double b) const {
  std::vector<std::pair<PatternId, double>> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double s = bm25_score(query_tokens, documents_[i], stats_, k1, b);
    if (s > 0.0) out.emplace_back(ids_[i], s);
  }
  return out;
}

// -- queries ----------------------------------------------------------------

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a",    "an",   "and",  "are", "as",   "at",   "be",   "by",   "for",  "from", "i",
      "in",   "into", "is",   "it",  "me",   "my",   "of",   "on",   "or",   "our",  "please",
      "the",  "then", "this", "to",  "up",   "us",   "we",   "will", "with", "you",  "your",
      "can",  "that", "some", "need", "want", "help", "make", "do",   "get",  "also"};
  return words;
}

const std::set<std::string, std::less<>>& constraint_cues() {
  static const std::set<std::string, std::less<>> cues = {
      "with", "under", "within", "must", "without", "before", "after", "only",
      "least", "most", "no", "not", "budget", "limit", "maximum", "minimum", "require", "requires"};
  return cues;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace

std::vector<std::string> ScriptedQueryGenerator::expand(std::string_view task_description,
                                                        std::size_t m) const {
  const std::string original(trim(task_description));
  std::vector<std::string> queries{original};
  if (m <= 1) return queries;

  const auto tokens = tokenize(original);
  std::vector<std::string> content;
  for (const auto& t : tokens) {
    if (!stopwords().contains(t)) content.push_back(t);
  }
  // Tokens from a constraint cue up to the end of the description.
  std::vector<std::string> constraints;
  bool in_clause = false;
  for (const auto& t : tokens) {
    if (constraint_cues().contains(t)) in_clause = true;
    if (in_clause && !stopwords().contains(t)) constraints.push_back(t);
  }
  const std::string noun_phrases = content.empty() ? original : join(content);
  const std::string emphasis = constraints.empty() ? noun_phrases : join(constraints);

  while (queries.size() < m) {
    queries.push_back(queries.size() % 2 == 1 ? noun_phrases : emphasis);
  }
  return queries;
}

std::vector<std::string> FixedQueryGenerator::expand(std::string_view task_description,
                                                     std::size_t m) const {
  if (queries_.empty()) return ScriptedQueryGenerator{}.expand(task_description, m);
  return queries_;
}

// -- semantic ---------------------------------------------------------------

Ranking make_ranking(std::vector<std::pair<PatternId, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  Ranking ranking;
  ranking.reserve(scored.size());
  for (const auto& [id, score] : scored) ranking.push_back({id, score, ranking.size() + 1});
  return ranking;
}

TaskQuery prepare_query(const Repository& repo, std::string_view task_description,
                        const QueryGenerator& generator) {
  if (trim(task_description).empty()) {
    throw Error(ErrorCode::EmptyText, "task description is blank");
  }
  TaskQuery q;
  q.task_description = std::string(task_description);
  q.queries = generator.expand(task_description, repo.config().query_count);
  for (const auto& text : q.queries) q.embeddings.push_back(embed(repo.embedder(), text));
  return q;
}

double max_query_sim(std::span<const Embedding> queries, const Pattern& pattern) {
  if (queries.empty()) throw Error(ErrorCode::InvariantViolation, "no query vectors");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& q : queries) best = std::max(best, cosine(q, pattern.metadata.embedding));
  return best;
}

std::vector<std::pair<PatternId, double>> semantic_scores(const Repository& repo,
                                                          std::span<const Embedding> queries) {
  std::vector<std::pair<PatternId, double>> out;
  out.reserve(repo.size());
  for (const auto& [id, p] : repo.patterns()) out.emplace_back(id, max_query_sim(queries, p));
  return out;
}

Ranking retrieve(const Repository& repo, const TaskQuery& query, std::size_t k, double theta) {
  auto scored = semantic_scores(repo, query.embeddings);
  std::erase_if(scored, [theta](const auto& s) { return s.second < theta; });
  Ranking ranking = make_ranking(std::move(scored));
  if (ranking.size() > k) ranking.resize(k);
  return ranking;
}

Ranking retrieve(const Repository& repo, std::string_view task_description, std::size_t k,
                 double theta) {
  return retrieve(repo, prepare_query(repo, task_description, ScriptedQueryGenerator{}), k, theta);
}

Ranking bm25_ranking(const Repository& repo, std::string_view text) {
  const auto& cfg = repo.config();
  return make_ranking(repo.lexical_index().score(tokenize(text), cfg.bm25_k1, cfg.bm25_b));
}

Ranking rrf_fuse(std::span<const Ranking> rankings, double rrf_constant) {
  // Terms are summed best rank first so the result ignores input order.
  std::map<PatternId, std::vector<std::size_t>> ranks;
  for (const auto& ranking : rankings) {
    for (const auto& hit : ranking) ranks[hit.pattern_id].push_back(hit.rank);
  }
  std::vector<std::pair<PatternId, double>> fused;
  for (auto& [id, r] : ranks) {
    std::sort(r.begin(), r.end());
    double score = 0.0;
    for (const auto rank : r) score += 1.0 / (rrf_constant + static_cast<double>(rank));
    fused.emplace_back(id, score);
  }
  return make_ranking(std::move(fused));
}

Ranking hybrid_retrieve(const Repository& repo, const TaskQuery& query, std::size_t limit,
                        double theta) {
  const auto semantic = semantic_scores(repo, query.embeddings);
  const std::array<Ranking, 2> rankings{make_ranking(semantic),
                                        bm25_ranking(repo, query.task_description)};
  Ranking fused = rrf_fuse(rankings, repo.config().rrf_constant);
  std::map<PatternId, double> sem(semantic.begin(), semantic.end());
  std::erase_if(fused, [&](const RankedHit& h) { return sem.at(h.pattern_id) < theta; });
  if (fused.size() > limit) fused.resize(limit);
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i].rank = i + 1;
  return fused;
}

// -- diversity --------------------------------------------------------------

std::vector<MmrPick> mmr_select(std::span<const MmrCandidate> candidates, double lambda,
                                std::size_t k) {
  std::vector<MmrPick> picks;
  const std::size_t n = candidates.size();
  std::vector<bool> taken(n, false);
  std::vector<double> max_sim(n, 0.0);  // max similarity to the selected set
  while (picks.size() < std::min(k, n)) {
    std::size_t best = n;
    double best_value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double value = picks.empty() ? candidates[i].relevance
                                         : mmr_value(lambda, candidates[i].relevance, max_sim[i]);
      if (best == n || value > best_value ||
          (value == best_value && candidates[i].pattern_id < candidates[best].pattern_id)) {
        best = i;
        best_value = value;
      }
    }
    taken[best] = true;
    picks.push_back({candidates[best].pattern_id, candidates[best].relevance, best_value});
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double c = cosine(candidates[i].embedding, candidates[best].embedding);
      max_sim[i] = picks.size() == 1 ? c : std::max(max_sim[i], c);
    }
  }
  return picks;
}

std::vector<MmrPick> select_patterns(const Repository& repo, const TaskQuery& query) {
  const auto& cfg = repo.config();
  const std::size_t k = cfg.retrieval_k;
  const std::size_t pool = cfg.mmr_enabled ? k * cfg.mmr_pool_factor : k;
  const Ranking hits = cfg.hybrid_retrieval
                           ? hybrid_retrieve(repo, query, pool, cfg.similarity_threshold)
                           : retrieve(repo, query, pool, cfg.similarity_threshold);

  std::vector<MmrCandidate> candidates;
  candidates.reserve(hits.size());
  for (const auto& hit : hits) {
    const Pattern& p = repo.at(hit.pattern_id);
    candidates.push_back({hit.pattern_id, max_query_sim(query.embeddings, p), p.metadata.embedding});
  }
  if (cfg.mmr_enabled) return mmr_select(candidates, cfg.mmr_lambda, k);

  std::vector<MmrPick> picks;
  for (std::size_t i = 0; i < candidates.size() && i < k; ++i) {
    picks.push_back({candidates[i].pattern_id, candidates[i].relevance, candidates[i].relevance});
  }
  return picks;
}

}  // namespace patternkit
