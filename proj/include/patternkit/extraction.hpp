#pragma once

#include "patternkit/repository.hpp"
#include "patternkit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace patternkit {

struct ClassificationFeatures {
  bool sustained_memory = false;
  bool independent_reasoning = false;
  bool subtask_encapsulation = false;
  bool stateless_guidance = false;
  std::uint32_t step_count = 0;
  std::uint32_t decision_points = 0;
  std::uint32_t tool_count = 0;
  bool stateful = false;

  friend bool operator==(const ClassificationFeatures&, const ClassificationFeatures&) = default;
};

struct PatternDraft {
  std::string description;
  std::string context;
  PatternBody body;
  ClassificationFeatures features;
  std::optional<PatternKind> pinned_kind;
};

struct TrajectoryBatch {
  std::vector<TrajectoryRecord> successes;  // H⁺
  std::vector<TrajectoryRecord> failures;   // H⁻
};

inline constexpr std::size_t kMaxDraftsPerBatch = 5;

/// Contrastive extraction agent. Returns at most five drafts per batch; may
/// throw, which the engine reports as a provider failure.
class ExtractionProvider {
 public:
  virtual ~ExtractionProvider() = default;
  virtual std::vector<PatternDraft> extract(const TrajectoryBatch& batch) const = 0;
};

/// Returns a fixed draft list; used for audit replay and tests.
class FixedExtractionProvider final : public ExtractionProvider {
 public:
  explicit FixedExtractionProvider(std::vector<PatternDraft> drafts, bool fail = false)
      : drafts_(std::move(drafts)), fail_(fail) {}
  std::vector<PatternDraft> extract(const TrajectoryBatch& batch) const override;

 private:
  std::vector<PatternDraft> drafts_;
  bool fail_;
};

bool extraction_due(const Repository& repo, std::size_t batch_size);

/// The most recent `batch_size` trajectories split by outcome, oldest first.
/// Throws InsufficientHistory when fewer are stored.
TrajectoryBatch recent_batch(const Repository& repo, std::size_t batch_size);

/// Ordered primary questions (memory, reasoning, subtask, stateless), then
/// the 2-of-4 secondary indicator vote.
PatternKind classify(const ClassificationFeatures& features);

/// Turns a subagent definition into a guideline skill listing its phases.
SkillBody flatten_to_guideline(const SubagentBody& subagent);

struct ExtractionOptions {
  std::size_t batch_size = 0;  // 0 → config().extraction_batch
  bool allow_subagents = true;
};

struct ExtractionResult {
  std::vector<PatternId> installed;
  std::vector<std::string> dropped;  // one reason per invalid draft
  bool provider_failed = false;
  std::string failure;
};

/// Runs the provider over the recent batch and installs every valid draft with
/// zeroed counters, embedding of d ⊕ c and created_at_task = tasks_completed.
/// Appends one Extraction audit event.
ExtractionResult extract_and_install(Repository& repo, const ExtractionProvider& provider,
                                     ExtractionOptions options = {});

/// The installation half of extract_and_install for an already obtained draft
/// list (or a recorded failure); shared with audit replay.
ExtractionResult install_drafts(Repository& repo, std::size_t batch_size,
                                std::optional<std::vector<PatternDraft>> drafts,
                                std::string failure, bool allow_subagents);

}  // namespace patternkit
