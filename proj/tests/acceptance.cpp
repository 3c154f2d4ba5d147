// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "patternkit/embedding.hpp"
#include "patternkit/error.hpp"
#include "patternkit/extraction.hpp"
#include "patternkit/harness.hpp"
#include "patternkit/lifecycle.hpp"
#include "patternkit/persistence.hpp"
#include "patternkit/retrieval.hpp"
#include "patternkit/serialize.hpp"
#include "patternkit/text.hpp"
#include "patternkit/tracking.hpp"
#include "support.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace patternkit;
using patternkit::testing::random_pattern;
using patternkit::testing::random_text;
using BigFloat = boost::multiprecision::cpp_dec_float_50;

namespace {

// Pinned tolerances and budgets.
constexpr double kUtilityTolerance = 1e-9;
constexpr double kBm25Tolerance = 1e-9;
constexpr double kMetricTolerance = 1e-12;
constexpr double kBudget1 = 1.0;
constexpr double kBudget2 = 30.0;
constexpr double kBudget3 = 60.0;
constexpr double kBudget9 = 60.0;

struct Verdict {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

int failures = 0;

void run(int number, const char* title, double budget_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.fail(std::string("exception: ") + e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0.0 && seconds >= budget_s) {
    std::ostringstream why;
    why << "took " << seconds << " s, budget " << budget_s << " s";
    v.fail(why.str());
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.3f s", seconds);
  std::printf("%s criterion %d: %s (%s)%s%s\n", v.ok ? "PASS" : "FAIL", number, title, timing,
              v.detail.empty() ? "" : ": ", v.detail.c_str());
  std::fflush(stdout);
  if (!v.ok) ++failures;
}

bool embeds(const EngineConfig& config, const std::string& text) {
  try {
    embed(*HashFeatureEmbedder::for_config(config), text);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// random_pattern, redrawn until both texts embed to nonzero vectors.
Pattern embeddable_pattern(std::mt19937_64& rng, const EngineConfig& config) {
  for (;;) {
    Pattern p = random_pattern(rng);
    const auto& m = p.metadata;
    if (embeds(config, m.description + "\n" + m.context)) return p;
  }
}

std::string embeddable_text(std::mt19937_64& rng, const EngineConfig& config, std::size_t lo, std::size_t hi) {
  for (;;) {
    std::string t = random_text(rng, lo, hi);
    if (embeds(config, t)) return t;
  }
}

Repository fuzz_repository(std::mt19937_64& rng, std::size_t n, EngineConfig config = {}) {
  Repository repo = new_repository(config);
  std::vector<Pattern> patterns;
  for (std::size_t i = 0; i < n; ++i) patterns.push_back(embeddable_pattern(rng, config));
  if (!patterns.empty()) seed_patterns(repo, std::move(patterns));
  return repo;
}

// -- 1 ------------------------------------------------------------------------

BigFloat utility_oracle(std::uint64_t r, std::uint64_t u, std::uint64_t s, const BigFloat& eps) {
  const BigFloat R(r), U(u), S(s);
  return (S / (U + eps)) * boost::multiprecision::log(BigFloat(1) + U) * (BigFloat(1) + U / (R + eps));
}

Verdict utility_exactness() {
  Verdict v;
  const BigFloat eps("0.01");
  PatternMetadata m;
  m.retrieval_count = 10;
  m.utilization_count = 8;
  m.success_count = 6;
  const double got = utility_score(m, 0.01);
  const double want = static_cast<double>(utility_oracle(10, 8, 6, eps));
  if (std::abs(got - want) > kUtilityTolerance) v.fail("example off by " + std::to_string(got - want));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> count(0, 100000);
  for (int i = 0; i < 10000 && v.ok; ++i) {
    const std::uint64_t r = count(rng);
    const std::uint64_t u = std::uniform_int_distribution<std::uint64_t>(0, r)(rng);
    const std::uint64_t s = std::uniform_int_distribution<std::uint64_t>(0, u)(rng);
    m.retrieval_count = r;
    m.utilization_count = u;
    m.success_count = s;
    const double d = utility_score(m, 0.01) - static_cast<double>(utility_oracle(r, u, s, eps));
    if (std::abs(d) > kUtilityTolerance) v.fail("fuzz case " + std::to_string(i));
  }
  return v;
}

// -- 2 ------------------------------------------------------------------------

bool counters_ok(const Repository& repo) {
  for (const auto& [id, p] : repo.patterns()) {
    const auto& m = p.metadata;
    if (m.success_count > m.utilization_count || m.utilization_count > m.retrieval_count) return false;
  }
  return true;
}

PatternDraft random_draft(std::mt19937_64& rng, const EngineConfig& config) {
  PatternDraft d;
  do {
    d.description = random_text(rng, 2, 4);
    d.context = random_text(rng, 2, 4);
  } while (!embeds(config, d.description + "\n" + d.context));
  d.body = SkillBody::guideline("- " + random_text(rng, 2, 3));
  d.features.stateless_guidance = true;
  return d;
}

Verdict metadata_safety() {
  Verdict v;
  EngineConfig config;
  config.similarity_threshold = 0.2;
  config.extraction_batch = 3;
  config.merge_threshold = 0.6;
  const ScriptedMergeVerifier verifier(config.merge_threshold);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> op(0, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t operations = 0;
  for (int sequence = 0; sequence < 100000 && v.ok; ++sequence) {
    Repository repo = fuzz_repository(rng, 1 + rng() % 4, config);
    const int length = 1 + static_cast<int>(rng() % 6);
    for (int step = 0; step < length; ++step) {
      switch (op(rng)) {
        case 0:
          seed_patterns(repo, {embeddable_pattern(rng, config)});
          break;
        case 1:
        case 2: {
          const std::string id = "t" + std::to_string(repo.tasks_completed() + 1);
          ExecutionContext ctx = begin_task(repo, id, embeddable_text(rng, config, 2, 5));
          std::map<PatternId, double> alphas;
          for (const auto& r : ctx.retrieved) alphas[r.pattern_id] = unit(rng);
          TrajectoryRecord t{id, ctx.task_description, {{"act", "ok"}}, {}, {}, {}, unit(rng) < 0.5};
          finish_task(repo, ctx, std::move(t), RecordedJudge(alphas));
          break;
        }
        case 3:
          if (extraction_due(repo, config.extraction_batch)) {
            extract_and_install(repo, FixedExtractionProvider({random_draft(rng, config)}));
          }
          break;
        case 4:
          run_maintenance(repo, verifier, {.force = true, .prune_enabled = true});
          break;
        case 5:
          run_maintenance(repo, AlwaysVerifier(true), {.force = true, .prune_enabled = false});
          break;
      }
      ++operations;
      if (!counters_ok(repo)) {
        v.fail("violated in sequence " + std::to_string(sequence) + " step " + std::to_string(step));
        break;
      }
    }
  }
  if (v.ok) v.detail = std::to_string(operations) + " operations";
  return v;
}

// -- 3 ------------------------------------------------------------------------

Verdict retrieval_oracles() {
  Verdict v;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000 && v.ok; ++trial) {
    EngineConfig config;
    const Repository repo = fuzz_repository(rng, rng() % 201, config);
    const TaskQuery q = prepare_query(repo, embeddable_text(rng, config, 2, 6), ScriptedQueryGenerator{});
    const std::size_t k = 1 + rng() % 25;
    const double theta = std::uniform_real_distribution<double>(0.0, 0.8)(rng);
    std::vector<std::pair<PatternId, double>> naive;
    for (const auto& [id, p] : repo.patterns()) {
      double best = -2.0;
      for (const auto& e : q.embeddings) best = std::max(best, cosine(e, p.metadata.embedding));
      if (best >= theta) naive.emplace_back(id, best);
    }
    std::stable_sort(naive.begin(), naive.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (naive.size() > k) naive.resize(k);
    const Ranking got = retrieve(repo, q, k, theta);
    if (got.size() != naive.size()) {
      v.fail("size mismatch in trial " + std::to_string(trial));
      break;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].pattern_id != naive[i].first || got[i].score != naive[i].second) {
        v.fail("order mismatch in trial " + std::to_string(trial));
        break;
      }
    }
  }
  // MMR against an exhaustive greedy that rescans every remaining candidate.
  std::normal_distribution<double> g;
  std::size_t sets = 0;
  for (int trial = 0; trial < 20000 && v.ok; ++trial) {
    const std::size_t n = rng() % 9;
    std::vector<MmrCandidate> c;
    for (std::size_t i = 0; i < n; ++i) {
      Embedding e(5);
      for (int j = 0; j < 5; ++j) e[j] = g(rng);
      e.normalize();
      c.push_back({PatternId{i + 1}, std::round(std::uniform_real_distribution<double>(0, 1)(rng) * 6) / 6, e});
    }
    std::shuffle(c.begin(), c.end(), rng);
    const double lambda = std::round(std::uniform_real_distribution<double>(0, 1)(rng) * 10) / 10;
    const std::size_t k = rng() % 10;
    std::vector<PatternId> want;
    std::vector<bool> used(n, false);
    while (want.size() < std::min(k, n)) {
      std::size_t best = n;
      double best_value = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        double value = c[i].relevance;
        if (!want.empty()) {
          double red = -2.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) red = std::max(red, cosine(c[i].embedding, c[j].embedding));
          }
          value = lambda * c[i].relevance - (1.0 - lambda) * red;
        }
        if (best == n || value > best_value || (value == best_value && c[i].pattern_id < c[best].pattern_id)) {
          best = i;
          best_value = value;
        }
      }
      used[best] = true;
      want.push_back(c[best].pattern_id);
    }
    std::vector<PatternId> got;
    for (const auto& p : mmr_select(c, lambda, k)) got.push_back(p.pattern_id);
    if (got != want) v.fail("MMR mismatch in trial " + std::to_string(trial));
    ++sets;
  }
  if (v.ok) v.detail = "1000 repositories, " + std::to_string(sets) + " MMR sets";
  return v;
}

// -- 4 ------------------------------------------------------------------------

Verdict bm25_and_rrf() {
  Verdict v;
  const std::vector<std::vector<std::string>> docs = {tokenize("book hotel near city center"),
                                                      tokenize("reserve flight to city"),
                                                      tokenize("hotel booking with budget constraint hotel")};
  const CorpusStats stats = corpus_stats(docs);
  const auto q = tokenize("hotel city");
  // ln(1 + (N - df + 0.5) / (df + 0.5)) idf, evaluated by hand.
  const double want[] = {0.9400072584914711073, 0.51188514076268228615, 0.61183904398853148996};
  for (std::size_t i = 0; i < 3; ++i) {
    const double got = bm25_score(q, docs[i], stats, 1.2, 0.75);
    if (std::abs(got - want[i]) > kBm25Tolerance) v.fail("document " + std::to_string(i + 1));
  }
  const Ranking a = make_ranking({{PatternId{1}, 0.9}, {PatternId{2}, 0.5}});
  const Ranking b = make_ranking({{PatternId{1}, 3.0}, {PatternId{3}, 1.0}});
  const std::vector<Ranking> both = {a, b};
  const Ranking fused = rrf_fuse(both, 60.0);
  if (fused.empty() || fused.front().pattern_id != PatternId{1} || fused.front().score != 2.0 / 61.0) {
    v.fail("RRF rank-1-in-both is not 2/61");
  }
  return v;
}

// -- 5 ------------------------------------------------------------------------

std::array<std::uint64_t, 3> totals(const Repository& repo) {
  std::array<std::uint64_t, 3> t{0, 0, 0};
  for (const auto& [id, p] : repo.patterns()) {
    t[0] += p.metadata.retrieval_count;
    t[1] += p.metadata.utilization_count;
    t[2] += p.metadata.success_count;
  }
  return t;
}

Verdict merge_correctness() {
  Verdict v;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200 && v.ok; ++trial) {
    Repository repo = fuzz_repository(rng, 50);
    const double theta = std::uniform_real_distribution<double>(0.3, 0.95)(rng);
    std::vector<PatternPair> brute;
    for (auto i = repo.patterns().begin(); i != repo.patterns().end(); ++i) {
      for (auto j = std::next(i); j != repo.patterns().end(); ++j) {
        if (i->second.kind == j->second.kind &&
            cosine(i->second.metadata.embedding, j->second.metadata.embedding) >= theta) {
          brute.emplace_back(i->first, j->first);
        }
      }
    }
    if (merge_candidates(repo, theta) != brute) {
      v.fail("candidate mismatch in trial " + std::to_string(trial));
      break;
    }
    // Pairwise sums, then conservation across a whole merge sequence.
    const auto before = totals(repo);
    for (int m = 0; m < 5; ++m) {
      const auto pairs = merge_candidates(repo, theta);
      if (pairs.empty()) break;
      const auto [a, b] = pairs[rng() % pairs.size()];
      const PatternMetadata ma = repo.at(a).metadata, mb = repo.at(b).metadata;
      MergeVerdict verdict;
      verdict.accepted = true;
      verdict.description = ma.description;
      verdict.context = mb.context;
      const Pattern merged = merge_pair(repo, a, b, verdict);
      const auto& mm = merged.metadata;
      if (mm.retrieval_count != ma.retrieval_count + mb.retrieval_count ||
          mm.utilization_count != ma.utilization_count + mb.utilization_count ||
          mm.success_count != ma.success_count + mb.success_count) {
        v.fail("merged stats are not sums in trial " + std::to_string(trial));
      }
    }
    agglomerative_merge(repo, theta, AlwaysVerifier(true));
    if (totals(repo) != before) v.fail("totals changed in trial " + std::to_string(trial));
  }
  return v;
}

// -- 6 ------------------------------------------------------------------------

Verdict scheduler() {
  Verdict v;
  const ExperimentResult r = run_experiment({}, {});
  if (r.maintenance_tasks != std::vector<std::int64_t>{10, 20, 40, 80, 160}) v.fail("maintenance tasks");
  std::vector<std::int64_t> every_tenth;
  for (std::int64_t t = 10; t <= 180; t += 10) every_tenth.push_back(t);
  if (r.extraction_tasks != every_tenth) v.fail("extraction tasks");
  return v;
}

// -- 7 ------------------------------------------------------------------------

Verdict metrics() {
  Verdict v;
  Pattern p = patternkit::testing::skill(
      "d", "c", "- open the map\n- pick a route\n- buy ticket\n- board train\n- rate trip");
  TrajectoryRecord t;
  t.task_id = "t";
  t.success = true;
  for (const char* a : {"Open the city map", "pick a scenic route", "buy a ticket online", "board the train"}) {
    t.steps.push_back({a, "ok"});
  }
  const double alpha = match_score(TokenSubsequenceJudge{}, p, t);
  if (std::abs(alpha - 0.80) > kMetricTolerance) v.fail("alpha " + std::to_string(alpha));

  Repository repo = new_repository({});
  std::vector<Pattern> patterns;
  for (int i = 0; i < 20; ++i) {
    patterns.push_back(patternkit::testing::skill("museum ticket", "city tours", "- step " + std::to_string(i)));
  }
  seed_patterns(repo, patterns);
  ExecutionContext ctx = begin_task(repo, "t1", "museum ticket city tours");
  std::map<PatternId, double> alphas;
  for (std::uint64_t id = 1; id <= 20; ++id) alphas[PatternId{id}] = id <= 12 ? 0.31 : 0.3;
  TrajectoryRecord done{"t1", ctx.task_description, {}, {}, {}, {}, true};
  const UtilizationSummary s = finish_task(repo, ctx, done, RecordedJudge(alphas));
  if (ctx.retrieved.size() != 20 || std::abs(s.beta_util - 0.60) > kMetricTolerance) {
    v.fail("beta_util " + std::to_string(s.beta_util));
  }
  return v;
}

// -- 8 ------------------------------------------------------------------------

// Written from the ordered questions, independent of classify().
PatternKind expected_route(const ClassificationFeatures& f) {
  if (f.sustained_memory) return PatternKind::Subagent;
  if (f.independent_reasoning) return PatternKind::Subagent;
  if (f.subtask_encapsulation) return PatternKind::Subagent;
  if (f.stateless_guidance) return PatternKind::Skill;
  const int votes = (f.step_count >= 5) + (f.decision_points >= 3) + (f.tool_count >= 3) + f.stateful;
  return votes >= 2 ? PatternKind::Subagent : PatternKind::Skill;
}

Verdict classification() {
  Verdict v;
  std::size_t cases = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    for (std::uint32_t st : {0u, 4u, 5u, 12u}) {
      for (std::uint32_t dp : {0u, 2u, 3u}) {
        for (std::uint32_t tc : {0u, 2u, 3u}) {
          for (bool stateful : {false, true}) {
            ClassificationFeatures f;
            f.sustained_memory = mask & 1;
            f.independent_reasoning = mask & 2;
            f.subtask_encapsulation = mask & 4;
            f.stateless_guidance = mask & 8;
            f.step_count = st;
            f.decision_points = dp;
            f.tool_count = tc;
            f.stateful = stateful;
            if (classify(f) != expected_route(f)) v.fail("mask " + std::to_string(mask));
            ++cases;
          }
        }
      }
    }
  }
  if (v.ok) v.detail = std::to_string(cases) + " cases";
  return v;
}

// -- 9 ------------------------------------------------------------------------

Verdict dynamics() {
  Verdict v;
  const DynamicsCheck c = check_dynamics({}, {});
  const DynamicsCheck again = check_dynamics({}, {});
  char buf[200];
  std::snprintf(buf, sizeof buf, "size on %zu off %zu; utilization on %.3f off %.3f", c.size_on, c.size_off,
                c.utilization_on, c.utilization_off);
  v.detail = buf;
  if (again.size_on != c.size_on || again.size_off != c.size_off || again.utilization_on != c.utilization_on ||
      again.utilization_off != c.utilization_off) {
    v.ok = false;
    v.detail += "; not deterministic";
  }
  if (!c.size_ok) {
    v.ok = false;
    v.detail += "; size_off < 3 * size_on";
  }
  if (c.utilization_on < 0.5) {
    v.ok = false;
    v.detail += "; utilization_on < 0.5";
  }
  if (c.utilization_off > 0.15) {
    v.ok = false;
    v.detail += "; utilization_off > 0.15";
  }
  return v;
}

// -- 10 -----------------------------------------------------------------------

Verdict persistence() {
  Verdict v;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200 && v.ok; ++i) {
    EngineConfig config;
    config.seed = rng() % 4;
    Repository repo = fuzz_repository(rng, rng() % 40, config);
    const std::size_t tasks = rng() % 12;
    for (std::size_t t = 0; t < tasks; ++t) {
      ExecutionContext ctx = begin_task(repo, "t" + std::to_string(t), embeddable_text(rng, config, 2, 4));
      TrajectoryRecord tr{"t" + std::to_string(t), ctx.task_description, {{random_text(rng, 1, 3), "ok"}},
                          {}, {}, {}, rng() % 2 == 0};
      finish_task(repo, ctx, tr, TokenSubsequenceJudge{});
      if (maintenance_due(repo)) run_maintenance(repo, ScriptedMergeVerifier(0.85));
    }
    const std::string text = serialize(repo);
    const Repository back = deserialize(text);
    if (back.state_digest() != repo.state_digest()) v.fail("digest differs for repository " + std::to_string(i));
    if (serialize(back) != text || serialize(repo) != text) v.fail("save not byte-identical " + std::to_string(i));
  }
  // Every simulation configuration exercised elsewhere in this run.
  std::size_t replays = 0;
  Toggles off;
  off.maintenance_on = false;
  Toggles single;
  single.batch_extraction_on = false;
  Toggles flat;
  flat.subagents_on = false;
  for (const Toggles& t : {Toggles{}, off, single, flat}) {
    for (std::uint64_t seed : {7u, 1u, 2u}) {
      ExperimentOptions o;
      o.seed = seed;
      const ExperimentResult r = run_experiment({}, t, o);
      const AuditLog log = parse_audit(serialize_audit(audit_log_of(r.repository)));
      if (replay(log) != r.final_digest) v.fail("replay digest differs");
      ++replays;
    }
  }
  if (v.ok) v.detail = "200 repositories, " + std::to_string(replays) + " replayed simulations";
  return v;
}

}  // namespace

int main() {
  run(1, "utility score matches 50-digit oracle within 1e-9 (example + 10000 fuzz)", kBudget1, utility_exactness);
  run(2, "0 <= s <= u <= r after every operation over 100000 sequences", kBudget2, metadata_safety);
  run(3, "retrieve equals linear scan; MMR equals exhaustive greedy", kBudget3, retrieval_oracles);
  run(4, "BM25 toy corpus within 1e-9; RRF rank-1-in-both equals 2/61", 0.0, bm25_and_rrf);
  run(5, "merge candidates equal brute force; stats summed and conserved", 0.0, merge_correctness);
  run(6, "maintenance at {10,20,40,80,160}, extraction every 10th task", 0.0, scheduler);
  run(7, "alpha = 0.80 for 4 of 5 steps; beta_util = 0.60 for 12 of 20", 0.0, metrics);
  run(8, "classification cascade over all 16 primary combinations", 0.0, classification);
  run(9, "180 tasks: size_off >= 3 * size_on, utilization_off <= 0.15, utilization_on >= 0.5", kBudget9, dynamics);
  run(10, "save/load digest-identical, byte-identical saves, replay matches live chain", 0.0, persistence);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
