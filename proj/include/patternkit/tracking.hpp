#pragma once

#include "patternkit/repository.hpp"
#include "patternkit/retrieval.hpp"
#include "patternkit/types.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace patternkit {

struct PromptAugmentation {
  PatternId pattern_id;
  std::string text;
};

struct ToolRegistration {
  PatternId pattern_id;
  std::string tool_name;
  std::string code_ref;
};

struct Delegation {
  PatternId pattern_id;
  std::string subagent_name;
  std::string context_payload;
};

/// Guideline skills go to the prompt, code skills become tools, subagents
/// become delegation targets. Every retrieved pattern lands in exactly one list.
struct IntegrationPlan {
  std::vector<PromptAugmentation> prompt_augmentations;
  std::vector<ToolRegistration> tool_registrations;
  std::vector<Delegation> delegations;

  std::size_t size() const noexcept {
    return prompt_augmentations.size() + tool_registrations.size() + delegations.size();
  }
};

struct RetrievedPattern {
  PatternId pattern_id;
  double score = 0.0;
};

struct ExecutionContext {
  std::string task_id;
  std::string task_description;
  std::vector<std::string> queries;
  std::vector<RetrievedPattern> retrieved;
  IntegrationPlan plan;
  bool open = false;
};

IntegrationPlan build_integration_plan(const Repository& repo,
                                       const std::vector<RetrievedPattern>& retrieved);

/// Steps a pattern declares for utilization matching: guideline lines,
/// a code skill's usage hint, or a subagent's phases (tool declarations).
std::vector<std::string> declared_steps(const Pattern& pattern);

/// Scores how much of a pattern a trajectory actually used (α_match).
class UtilizationJudge {
 public:
  virtual ~UtilizationJudge() = default;
  virtual double match_score(const Pattern& pattern, const TrajectoryRecord& trajectory) const = 0;
};

/// A declared step matches when its normalized tokens occur, in order, within
/// the tokens of one trajectory action (or tool call for code skills, or
/// subagent call for subagents). α = matched steps / declared steps.
class TokenSubsequenceJudge final : public UtilizationJudge {
 public:
  double match_score(const Pattern& pattern, const TrajectoryRecord& trajectory) const override;
};

/// Replays recorded α values by pattern id; used for audit replay.
class RecordedJudge final : public UtilizationJudge {
 public:
  explicit RecordedJudge(std::map<PatternId, double> alphas) : alphas_(std::move(alphas)) {}
  double match_score(const Pattern& pattern, const TrajectoryRecord& trajectory) const override;

 private:
  std::map<PatternId, double> alphas_;
};

bool token_subsequence(std::span<const std::string> needle, std::span<const std::string> haystack);

/// α clipped to [0, 1]; a pattern declaring zero steps scores 0.
double match_score(const UtilizationJudge& judge, const Pattern& pattern,
                   const TrajectoryRecord& trajectory);

struct PatternUtilization {
  PatternId pattern_id;
  double alpha = 0.0;
  bool utilized = false;
  bool success_credited = false;
};

struct UtilizationSummary {
  std::string task_id;
  std::int64_t task_index = 0;  // 1-based count after this task
  std::vector<PatternUtilization> patterns;
  double beta_util = 0.0;
  bool success = false;
};

/// |{α > θ_match}| / |retrieved|, 0 for an empty retrieval.
double utilization_rate(std::span<const PatternUtilization> patterns);

/// Retrieves, increments r for every selected pattern and builds the plan.
ExecutionContext begin_task(Repository& repo, std::string task_id,
                            std::string_view task_description, const QueryGenerator& generator);
ExecutionContext begin_task(Repository& repo, std::string task_id,
                            std::string_view task_description);

/// Judges each retrieved pattern, increments u when α > θ_match and, on
/// success, s for exactly those patterns; appends the trajectory and a
/// TaskFinished audit event; closes the context.
UtilizationSummary finish_task(Repository& repo, ExecutionContext& context,
                               TrajectoryRecord trajectory, const UtilizationJudge& judge);

/// CSV: task_id,pattern_id,alpha,utilized,success_credited
std::string utilization_csv(std::span<const UtilizationSummary> summaries);

}  // namespace patternkit
