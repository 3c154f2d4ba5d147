#pragma once

#include "patternkit/audit.hpp"
#include "patternkit/embedding.hpp"
#include "patternkit/retrieval_index.hpp"
#include "patternkit/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace patternkit {

/// The versioned pattern collection.
///
/// Invariants (checked after every mutation when PATTERNKIT_CHECK_INVARIANTS):
///  - every pattern satisfies validate(Pattern), has a unit embedding of
///    config().embedding_dim, and an id below next_pattern_id();
///  - tasks_completed() == trajectories().size();
///  - next_maintenance_threshold() == 10 * 2^m.
///
/// Mutators here are the primitive building blocks; the audited operations
/// (seed_patterns, finish_task, extract_and_install, run_maintenance) live in
/// their modules and are what callers should normally use.
class Repository {
 public:
  explicit Repository(EngineConfig config = {},
                      std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

  const EngineConfig& config() const noexcept { return config_; }
  const EmbeddingProvider& embedder() const noexcept { return *embedder_; }
  std::shared_ptr<const EmbeddingProvider> embedder_handle() const noexcept { return embedder_; }
  int schema_version() const noexcept { return kSchemaVersion; }

  const std::map<PatternId, Pattern>& patterns() const noexcept { return patterns_; }
  std::size_t size() const noexcept { return patterns_.size(); }
  bool contains(PatternId id) const { return patterns_.contains(id); }
  const Pattern& at(PatternId id) const;

  std::span<const TrajectoryRecord> trajectories() const noexcept { return trajectories_; }
  std::int64_t tasks_completed() const noexcept {
    return static_cast<std::int64_t>(trajectories_.size());
  }
  std::int64_t next_maintenance_threshold() const noexcept { return next_maintenance_threshold_; }
  /// Task count at the most recent maintenance event, -1 before the first.
  std::int64_t last_maintenance_task() const noexcept { return last_maintenance_task_; }
  std::uint64_t next_pattern_id() const noexcept { return next_pattern_id_; }

  /// BM25 corpus over d ⊕ c, rebuilt whenever the pattern set changes.
  const LexicalIndex& lexical_index() const noexcept { return lexical_; }

  const AuditTrail& audit() const noexcept { return audit_; }

  /// FNV-1a 64 over the canonical binary encoding of the state (config,
  /// counters, patterns, trajectory chain). Excludes the audit trail itself.
  std::uint64_t state_digest() const;

  std::optional<std::string> open_task() const { return open_task_; }

  // -- primitive mutators ---------------------------------------------------

  PatternId allocate_id() { return PatternId{next_pattern_id_++}; }
  /// Inserts after full validation; assigns an id when unset and embeds d ⊕ c
  /// when the embedding is empty. Returns the stored id.
  PatternId insert(Pattern pattern);
  void erase(PatternId id);
  /// Adds to (r, u, s); rejects results that break 0 <= s <= u <= r.
  void add_counts(PatternId id, std::uint64_t dr, std::uint64_t du, std::uint64_t ds);
  void append_trajectory(TrajectoryRecord record);
  /// Doubles the threshold and records the current task count.
  void advance_maintenance_schedule();

  void set_open_task(std::optional<std::string> task_id) { open_task_ = std::move(task_id); }

  /// Appends an audit event stamped with the post-event digest.
  const AuditEvent& record(AuditEventKind kind, nlohmann::json payload);
  void restore_audit(AuditTrail trail) { audit_ = std::move(trail); }

  /// Records a Snapshot event whose payload is the full serialized state.
  const AuditEvent& snapshot();

  void check_invariants() const;

  // Used by persistence when rebuilding a repository from disk.
  void restore_counters(std::int64_t next_maintenance_threshold, std::int64_t last_maintenance_task,
                        std::uint64_t next_pattern_id);

 private:
  void after_mutation(bool pattern_set_changed);

  EngineConfig config_;
  std::shared_ptr<const EmbeddingProvider> embedder_;
  std::map<PatternId, Pattern> patterns_;
  std::vector<TrajectoryRecord> trajectories_;
  std::uint64_t trajectory_chain_ = kTrajectoryChainSeed;
  std::int64_t next_maintenance_threshold_ = kInitialMaintenanceThreshold;
  std::int64_t last_maintenance_task_ = -1;
  std::uint64_t next_pattern_id_ = 1;
  std::optional<std::string> open_task_;
  LexicalIndex lexical_;
  AuditTrail audit_;

  static constexpr std::uint64_t kTrajectoryChainSeed = 0xcbf29ce484222325ULL;
};

/// new_repository: validated construction of an empty repository.
Repository new_repository(const EngineConfig& config,
                          std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

/// Inserts caller-supplied patterns with their metadata (cold-start seeding).
/// All-or-nothing: validates the whole batch before inserting any.
std::size_t seed_patterns(Repository& repo, std::vector<Pattern> patterns);

/// Many-readers / one-writer wrapper for sharing a repository across threads.
class SharedRepository {
 public:
  explicit SharedRepository(Repository repo) : repo_(std::move(repo)) {}

  template <typename F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mutex_);
    return std::invoke(std::forward<F>(f), std::as_const(repo_));
  }

  template <typename F>
  decltype(auto) write(F&& f) {
    std::unique_lock lock(mutex_);
    return std::invoke(std::forward<F>(f), repo_);
  }

 private:
  mutable std::shared_mutex mutex_;
  Repository repo_;
};

}  // namespace patternkit
