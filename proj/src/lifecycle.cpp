#include "patternkit/lifecycle.hpp"

#include "patternkit/embedding.hpp"
#include "patternkit/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace patternkit {

namespace {

std::string join_distinct(const std::string& a, const std::string& b) {
  if (a.find(b) != std::string::npos) return a;
  if (b.find(a) != std::string::npos) return b;
  return a + " | " + b;
}

}  // namespace

MergeVerdict ScriptedMergeVerifier::decide(const Pattern& a, const Pattern& b) const {
  if (a.kind != b.kind) return MergeVerdict::reject("kinds differ");
  const double sim = cosine(a.metadata.embedding, b.metadata.embedding);
  if (sim < threshold_) return MergeVerdict::reject("similarity below verification threshold");
  MergeVerdict v;
  v.accepted = true;
  v.description = join_distinct(a.metadata.description, b.metadata.description);
  v.context = join_distinct(a.metadata.context, b.metadata.context);
  v.reason = "same subtask";
  return v;
}

MergeVerdict AlwaysVerifier::decide(const Pattern& a, const Pattern& b) const {
  if (!accept_ || a.kind != b.kind) return MergeVerdict::reject("scripted reject");
  MergeVerdict v;
  v.accepted = true;
  v.description = join_distinct(a.metadata.description, b.metadata.description);
  v.context = join_distinct(a.metadata.context, b.metadata.context);
  return v;
}

// -- pruning ----------------------------------------------------------------

bool prune_eligible(const Repository& repo, const Pattern& pattern) {
  return !(pattern.metadata.retrieval_count == 0 &&
           pattern.created_at_task > repo.last_maintenance_task());
}

std::vector<PatternId> prune(Repository& repo, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
  }
  std::vector<std::pair<double, PatternId>> eligible;
  for (const auto& [id, p] : repo.patterns()) {
    if (prune_eligible(repo, p)) {
      eligible.emplace_back(utility_score(p.metadata, repo.config().epsilon), id);
    }
  }
  const auto count = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(eligible.size())));
  // Lowest score first; among equal scores the newer (larger) id goes first.
  std::sort(eligible.begin(), eligible.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first < y.first : x.second > y.second;
  });
  std::vector<PatternId> pruned;
  for (std::size_t i = 0; i < count; ++i) {
    repo.erase(eligible[i].second);
    pruned.push_back(eligible[i].second);
  }
  return pruned;
}

// -- merging ----------------------------------------------------------------

std::vector<PatternPair> merge_candidates(const Repository& repo, double theta_merge) {
  std::vector<const Pattern*> items;
  items.reserve(repo.size());
  for (const auto& [id, p] : repo.patterns()) items.push_back(&p);
  std::vector<PatternPair> pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (items[i]->kind != items[j]->kind) continue;
      if (cosine(items[i]->metadata.embedding, items[j]->metadata.embedding) >= theta_merge) {
        pairs.emplace_back(items[i]->id, items[j]->id);
      }
    }
  }
  return pairs;
}

Pattern merge_pair(Repository& repo, PatternId a, PatternId b, const MergeVerdict& verdict) {
  const Pattern& pa = repo.at(a);
  const Pattern& pb = repo.at(b);
  if (a == b) throw Error(ErrorCode::InvariantViolation, "cannot merge a pattern with itself");
  if (pa.kind != pb.kind) {
    throw Error(ErrorCode::KindMismatch, to_string(a) + " and " + to_string(b) + " differ in kind");
  }
  if (!verdict.accepted) {
    throw Error(ErrorCode::VerifierRejected, to_string(a) + "+" + to_string(b) + ": " + verdict.reason);
  }

  const double eps = repo.config().epsilon;
  const double score_a = utility_score(pa.metadata, eps);
  const double score_b = utility_score(pb.metadata, eps);
  const Pattern& keeper = (score_b > score_a || (score_b == score_a && b < a)) ? pb : pa;

  Pattern merged;
  merged.kind = pa.kind;
  merged.body = verdict.body ? *verdict.body : keeper.body;
  if (kind_of(merged.body) != merged.kind) {
    throw Error(ErrorCode::KindMismatch, "verifier supplied a body of the wrong kind");
  }
  merged.metadata.description = verdict.description;
  merged.metadata.context = verdict.context;
  merged.metadata.retrieval_count = pa.metadata.retrieval_count + pb.metadata.retrieval_count;
  merged.metadata.utilization_count = pa.metadata.utilization_count + pb.metadata.utilization_count;
  merged.metadata.success_count = pa.metadata.success_count + pb.metadata.success_count;
  merged.metadata.embedding = embed(repo.embedder(), retrieval_text(merged.metadata));
  merged.created_at_task = std::min(pa.created_at_task, pb.created_at_task);
  validate(merged);  // before touching the repository

  repo.erase(a);
  repo.erase(b);
  const PatternId id = repo.insert(std::move(merged));
  return repo.at(id);
}

std::vector<MergeRecord> agglomerative_merge(Repository& repo, double theta_merge,
                                             const MergeVerifier& verifier,
                                             std::vector<VerdictRecord>* trace) {
  std::vector<MergeRecord> merges;
  std::set<PatternPair> excluded;
  for (;;) {
    bool found = false;
    PatternPair best{};
    double best_sim = 0.0;
    for (const auto& pair : merge_candidates(repo, theta_merge)) {
      if (excluded.contains(pair)) continue;
      const double sim =
          cosine(repo.at(pair.first).metadata.embedding, repo.at(pair.second).metadata.embedding);
      // Candidates arrive in lexicographic id order, so strict > keeps the
      // smallest pair among equal similarities.
      if (!found || sim > best_sim) {
        found = true;
        best = pair;
        best_sim = sim;
      }
    }
    if (!found) break;

    MergeVerdict verdict;
    try {
      verdict = verifier.decide(repo.at(best.first), repo.at(best.second));
    } catch (const std::exception& e) {
      verdict = MergeVerdict::reject(std::string("verifier failure: ") + e.what());
    }
    if (verdict.accepted && repo.at(best.first).kind != repo.at(best.second).kind) {
      verdict = MergeVerdict::reject("verifier accepted a cross-kind pair");
    }
    if (trace) trace->push_back({best, best_sim, verdict});
    if (!verdict.accepted) {
      excluded.insert(best);
      continue;
    }
    const Pattern merged = merge_pair(repo, best.first, best.second, verdict);
    merges.push_back({{best.first, best.second}, merged.id});
  }
  return merges;
}

// -- schedule ---------------------------------------------------------------

bool maintenance_due(const Repository& repo) {
  return repo.tasks_completed() >= repo.next_maintenance_threshold();
}

MaintenanceReport run_maintenance(Repository& repo, const MergeVerifier& verifier,
                                  MaintenanceOptions options) {
  if (repo.open_task()) {
    throw Error(ErrorCode::ContextAlreadyOpen, "task " + *repo.open_task() + " is still open");
  }
  if (!options.force && !maintenance_due(repo)) {
    throw Error(ErrorCode::InvariantViolation,
                "maintenance not due (" + std::to_string(repo.tasks_completed()) + " < " +
                    std::to_string(repo.next_maintenance_threshold()) + ")");
  }
  // Readers must never observe a half-maintained repository.
  Repository work = repo;
  MaintenanceReport report;
  report.task_index = work.tasks_completed();
  report.size_before = work.size();
  for (const auto& [id, p] : work.patterns()) {
    report.scored.emplace_back(id, utility_score(p.metadata, work.config().epsilon));
  }
  if (options.prune_enabled) report.pruned_ids = prune(work, work.config().prune_fraction);
  report.merges =
      agglomerative_merge(work, work.config().merge_threshold, verifier, &report.verdicts);
  work.advance_maintenance_schedule();
  report.size_after = work.size();

  Json payload = to_json(report);
  payload["forced"] = options.force;
  payload["prune_enabled"] = options.prune_enabled;
  work.record(AuditEventKind::Maintenance, std::move(payload));
  repo = std::move(work);
  return report;
}

}  // namespace patternkit
