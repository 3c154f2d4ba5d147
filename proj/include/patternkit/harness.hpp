#pragma once

// Offline synthetic-task simulator. Tasks are built from subtask tags; a mock
// agent follows injected patterns and succeeds with a probability that grows
// with how many of the task's tags those patterns cover.

#include "patternkit/extraction.hpp"
#include "patternkit/lifecycle.hpp"
#include "patternkit/repository.hpp"
#include "patternkit/tracking.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace patternkit {

struct SubtaskTag {
  std::string id;       // also the marker token patterns for this tag carry
  std::vector<std::string> vocabulary;
  std::vector<std::string> step_verbs;  // one declared step per verb
  bool procedural = false;              // extracted as a subagent when allowed
};

struct SyntheticDomain {
  std::vector<SubtaskTag> subtask_tags;
  std::vector<std::string> entities;
  double base_success_prob = 0.35;
  double pattern_boost = 0.6;
  double noise_pattern_rate = 0.3;  // chance a guided failure yields a spurious draft
  double second_tag_prob = 0.35;
  double step_echo_prob = 0.9;

  /// Six tags (two procedural) over a travel-planning style vocabulary.
  static SyntheticDomain standard();
  void validate() const;
};

struct SyntheticTask {
  std::string task_id;
  std::string description;
  std::vector<std::size_t> tags;  // indices into subtask_tags
  std::string entity;
  std::uint64_t stream;           // seeds this task's private RNG
};

/// Deterministic in (domain, n, seed).
std::vector<SyntheticTask> generate_tasks(const SyntheticDomain& domain, std::size_t n,
                                          std::uint64_t seed);

using SimRng = std::mt19937_64;

/// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(SimRng& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

double success_probability(const SyntheticDomain& domain, double covered_tag_fraction);

/// Whether `pattern` is a genuine pattern for `tag` (noise drafts never are).
bool addresses_tag(const Pattern& pattern, const SubtaskTag& tag);

/// The agent follows, per task tag, the most recently created injected
/// pattern addressing it and echoes its declared steps (each with
/// step_echo_prob). The first RNG draw decides the outcome.
TrajectoryRecord mock_agent_step(const SyntheticDomain& domain, const SyntheticTask& task,
                                 const Repository& repo, const IntegrationPlan& plan, SimRng& rng);

/// Templated drafts for the most frequent tags seen succeeding in a batch,
/// plus spurious drafts drawn from failures that had guidance injected. At
/// most five drafts in total.
/// Deterministic in the batch contents.
inline constexpr std::size_t kMaxNoisePerBatch = 2;

class ScriptedExtractionProvider final : public ExtractionProvider {
 public:
  explicit ScriptedExtractionProvider(SyntheticDomain domain, std::uint64_t seed = 0)
      : domain_(std::move(domain)), seed_(seed) {}
  std::vector<PatternDraft> extract(const TrajectoryBatch& batch) const override;

  /// The draft the provider writes for `tag` given the entity it observed.
  PatternDraft tag_draft(std::size_t tag, const std::string& entity) const;
  PatternDraft noise_draft(std::size_t tag, const std::string& entity) const;

 private:
  SyntheticDomain domain_;
  std::uint64_t seed_;
};

struct Toggles {
  bool maintenance_on = true;
  bool batch_extraction_on = true;
  bool subagents_on = true;
  bool pruning_on = true;
  bool extraction_on = true;  // off: the no-pattern baseline
};

struct TimeSeriesRow {
  std::int64_t task_index = 0;
  std::size_t repo_size = 0;
  double utilization_ratio = 0.0;  // mean u/r over patterns with r > 0
  double success_rate = 0.0;       // rolling over the last kRollingWindow tasks
};

inline constexpr std::size_t kRollingWindow = 20;

struct RunTimeSeries {
  std::vector<TimeSeriesRow> rows;
};

struct ExperimentResult {
  RunTimeSeries series;
  std::vector<UtilizationSummary> summaries;
  std::vector<std::int64_t> extraction_tasks;
  std::vector<std::int64_t> maintenance_tasks;
  std::size_t patterns_installed = 0;
  std::size_t final_size = 0;
  double final_utilization = 0.0;
  double final_success_rate = 0.0;
  double overall_success_rate = 0.0;
  std::uint64_t final_digest = 0;
  Repository repository;
};

struct ExperimentOptions {
  std::size_t tasks = 180;
  std::uint64_t seed = 7;
  SyntheticDomain domain = SyntheticDomain::standard();
};

ExperimentResult run_experiment(const EngineConfig& config, const Toggles& toggles,
                                const ExperimentOptions& options = {});

/// Mean u/r over patterns with r > 0 (0 when none qualify).
double mean_utilization_ratio(const Repository& repo);

/// CSV: task_index,repo_size,utilization_ratio,success_rate
std::string to_csv(const RunTimeSeries& series);

enum class SweepParameter { ExtractionBatch, PruneFraction, RetrievalK, SimilarityThreshold };

/// Accepts "K", "alpha", "k", "theta".
SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter p) noexcept;

struct SweepRow {
  double value = 0.0;
  std::size_t final_size = 0;
  double final_utilization = 0.0;
  double final_success_rate = 0.0;
  std::size_t maintenance_events = 0;
  std::size_t patterns_installed = 0;
};

/// One run per value. A prune fraction of 0 runs with pruning disabled.
std::vector<SweepRow> sweep(const EngineConfig& config, SweepParameter parameter,
                            const std::vector<double>& values, const Toggles& toggles = {},
                            const ExperimentOptions& options = {});

/// CSV: parameter,value,final_repo_size,final_utilization_ratio,final_success_rate,
/// maintenance_events,patterns_installed
std::string sweep_csv(SweepParameter parameter, const std::vector<SweepRow>& rows);

/// Per-pattern usage labels derived from utilization summaries.
struct EffectivenessReport {
  std::vector<PatternId> high_value;  // alpha > 0.5 in some successful task
  std::vector<PatternId> misleading;  // utilized in some failed task, never high value
  std::vector<PatternId> low_value;   // everything else that was injected
};

EffectivenessReport effectiveness(const std::vector<UtilizationSummary>& summaries);

/// Acceptance bands for the maintenance ablation.
struct DynamicsCheck {
  std::size_t size_on = 0;
  std::size_t size_off = 0;
  double utilization_on = 0.0;
  double utilization_off = 0.0;
  bool size_ok = false;
  bool utilization_ok = false;
  bool ok() const noexcept { return size_ok && utilization_ok; }
};

DynamicsCheck check_dynamics(const EngineConfig& config, const ExperimentOptions& options = {});

}  // namespace patternkit
