#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace patternkit {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Embedding = Vector<double>;

/// Creation-ordered identifier; 0 means "unassigned".
struct PatternId {
  std::uint64_t value = 0;

  constexpr explicit operator bool() const noexcept { return value != 0; }
  friend constexpr auto operator<=>(PatternId, PatternId) = default;
};

std::string to_string(PatternId id);

enum class PatternKind { Skill, Subagent };

std::string_view to_string(PatternKind kind) noexcept;
PatternKind parse_kind(std::string_view text);

enum class SkillForm { Guideline, Code };

std::string_view to_string(SkillForm form) noexcept;

struct SkillBody {
  SkillForm form = SkillForm::Guideline;
  std::string guideline_text;
  // Code form only. The engine never executes or interprets these.
  std::string code_snippet;
  std::string code_language_tag;
  std::vector<std::string> dependencies;
  std::string usage_hint;

  static SkillBody guideline(std::string text);
  static SkillBody code(std::string snippet, std::string language, std::vector<std::string> deps,
                        std::string usage);

  friend bool operator==(const SkillBody&, const SkillBody&) = default;
};

struct ToolDeclaration {
  std::string name;
  std::string purpose;
  friend bool operator==(const ToolDeclaration&, const ToolDeclaration&) = default;
};

struct DelegationRule {
  std::string peer;
  std::string condition;
  friend bool operator==(const DelegationRule&, const DelegationRule&) = default;
};

struct SubagentBody {
  std::string system_prompt;
  std::vector<ToolDeclaration> tool_declarations;
  std::string input_contract;
  std::string output_contract;
  std::vector<DelegationRule> delegation_rules;

  friend bool operator==(const SubagentBody&, const SubagentBody&) = default;
};

using PatternBody = std::variant<SkillBody, SubagentBody>;

PatternKind kind_of(const PatternBody& body) noexcept;

/// The (d, c, r, u, s, e) tuple. 0 <= s <= u <= r always.
struct PatternMetadata {
  std::string description;
  std::string context;
  std::uint64_t retrieval_count = 0;
  std::uint64_t utilization_count = 0;
  std::uint64_t success_count = 0;
  Embedding embedding;
};

struct Pattern {
  PatternId id;
  PatternKind kind = PatternKind::Skill;
  PatternBody body;
  PatternMetadata metadata;
  std::int64_t created_at_task = 0;
};

/// Text that is embedded and BM25-indexed for a pattern: d, newline, c.
std::string retrieval_text(const PatternMetadata& metadata);

struct TrajectoryStep {
  std::string action;
  std::string observation;
  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct ToolCall {
  std::string tool;
  std::string args_digest;
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct TrajectoryRecord {
  std::string task_id;
  std::string task_description;
  std::vector<TrajectoryStep> steps;
  std::vector<ToolCall> tool_calls;
  std::vector<std::string> subagent_calls;
  std::vector<PatternId> injected_pattern_ids;
  bool success = false;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

struct EngineConfig {
  std::size_t retrieval_k = 20;           // k
  double similarity_threshold = 0.5;      // θ
  double mmr_lambda = 0.7;                // λ
  std::size_t extraction_batch = 10;      // K
  double prune_fraction = 0.20;           // α
  double merge_threshold = 0.85;          // θ_merge
  double epsilon = 0.01;                  // ε
  double match_threshold = 0.3;           // θ_match
  std::size_t embedding_dim = 64;
  double rrf_constant = 60.0;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  std::uint64_t seed = 0;
  std::size_t query_count = 3;
  bool hybrid_retrieval = true;
  bool mmr_enabled = true;
  std::size_t mmr_pool_factor = 2;

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// Throws Error(InvalidConfig) naming the first offending field.
void validate(const EngineConfig& config);

/// Structural checks that do not depend on a repository: body/kind agreement,
/// body content rules, counter ordering. Throws Error(InvariantViolation).
void validate(const Pattern& pattern);

inline constexpr std::int64_t kInitialMaintenanceThreshold = 10;
inline constexpr int kSchemaVersion = 1;

}  // namespace patternkit
