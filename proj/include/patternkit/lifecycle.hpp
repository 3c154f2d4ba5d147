#pragma once

#include "patternkit/repository.hpp"
#include "patternkit/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace patternkit {

/// (s / (u + ε)) · ln(1 + u) · (1 + u / (r + ε))
inline double utility_score(const PatternMetadata& m, double epsilon) {
  const auto r = static_cast<double>(m.retrieval_count);
  const auto u = static_cast<double>(m.utilization_count);
  const auto s = static_cast<double>(m.success_count);
  return (s / (u + epsilon)) * std::log1p(u) * (1.0 + u / (r + epsilon));
}

struct MergeVerdict {
  bool accepted = false;
  std::string description;
  std::string context;
  std::optional<PatternBody> body;  // absent: keep the higher-scored input's body
  std::string reason;

  static MergeVerdict reject(std::string why) { return {false, {}, {}, std::nullopt, std::move(why)}; }
};

/// Decides whether two same-kind candidates address the same subtask with
/// compatible steps and overlapping applicability.
class MergeVerifier {
 public:
  virtual ~MergeVerifier() = default;
  virtual MergeVerdict decide(const Pattern& a, const Pattern& b) const = 0;
};

/// Accepts iff kinds match and cosine(e_a, e_b) >= threshold + margin;
/// d and c are joined with " | ".
class ScriptedMergeVerifier final : public MergeVerifier {
 public:
  explicit ScriptedMergeVerifier(double merge_threshold, double margin = 0.05)
      : threshold_(merge_threshold + margin) {}
  MergeVerdict decide(const Pattern& a, const Pattern& b) const override;

 private:
  double threshold_;
};

class AlwaysVerifier final : public MergeVerifier {
 public:
  explicit AlwaysVerifier(bool accept) : accept_(accept) {}
  MergeVerdict decide(const Pattern& a, const Pattern& b) const override;

 private:
  bool accept_;
};

using PatternPair = std::pair<PatternId, PatternId>;  // first < second

struct MergeRecord {
  std::vector<PatternId> absorbed_ids;
  PatternId new_id;
};

/// One verifier consultation inside agglomerative_merge, kept for replay.
struct VerdictRecord {
  PatternPair pair;
  double similarity = 0.0;
  MergeVerdict verdict;
};

struct MaintenanceReport {
  std::int64_t task_index = 0;
  std::vector<std::pair<PatternId, double>> scored;
  std::vector<PatternId> pruned_ids;
  std::vector<MergeRecord> merges;
  std::size_t size_before = 0;
  std::size_t size_after = 0;
  std::vector<VerdictRecord> verdicts;
};

/// Whether `pattern` may be pruned at a maintenance event right now: patterns
/// never retrieved and created after the previous event are exempt.
bool prune_eligible(const Repository& repo, const Pattern& pattern);

/// Removes the floor(α·E) lowest-utility eligible patterns (E = eligible
/// count); equal scores remove the newer id first.
std::vector<PatternId> prune(Repository& repo, double alpha);

/// All same-kind pairs with cosine(e_i, e_j) >= θ_merge, i < j, id order.
std::vector<PatternPair> merge_candidates(const Repository& repo, double theta_merge);

/// Replaces a and b with a new pattern carrying the verdict's d/c, a fresh
/// embedding of d ⊕ c and summed (r, u, s).
Pattern merge_pair(Repository& repo, PatternId a, PatternId b, const MergeVerdict& verdict);

/// Repeatedly merges the most similar unexcluded candidate pair until none
/// remain. Rejected pairs are excluded for the rest of this call.
std::vector<MergeRecord> agglomerative_merge(Repository& repo, double theta_merge,
                                             const MergeVerifier& verifier,
                                             std::vector<VerdictRecord>* trace = nullptr);

bool maintenance_due(const Repository& repo);

struct MaintenanceOptions {
  bool force = false;
  bool prune_enabled = true;
};

/// score → prune → merge, doubles the threshold, appends a Maintenance audit
/// event. Throws InvariantViolation when not due and not forced.
MaintenanceReport run_maintenance(Repository& repo, const MergeVerifier& verifier,
                                  MaintenanceOptions options = {});

}  // namespace patternkit
