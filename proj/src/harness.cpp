#include "patternkit/harness.hpp"

#include "patternkit/serialize.hpp"
#include "patternkit/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <set>

namespace patternkit {

namespace {

std::size_t pick(SimRng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

std::string underscore(std::string_view text) {
  std::string out(text);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

bool has_token(const std::vector<std::string>& tokens, std::string_view t) {
  return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
}

}  // namespace

// -- domain -----------------------------------------------------------------

SyntheticDomain SyntheticDomain::standard() {
  SyntheticDomain d;
  d.subtask_tags = {
      {"lodging", {"hotel", "room", "night", "stay"}, {"search", "compare", "reserve", "confirm"}, false},
      {"transit", {"flight", "train", "ticket", "route"}, {"lookup", "price", "book", "verify"}, false},
      {"dining", {"restaurant", "meal", "menu", "table"}, {"shortlist", "check", "hold", "note"}, false},
      {"budget", {"cost", "limit", "total", "expense"}, {"tally", "cap", "allocate", "audit"}, true},
      {"itinerary", {"schedule", "day", "visit", "order"}, {"draft", "sequence", "balance", "finalize"}, true},
      {"permits", {"visa", "passport", "document", "entry"}, {"identify", "gather", "submit", "track"}, false},
  };
  d.entities = {"paris",  "rome",   "tokyo",  "lima",   "oslo",   "cairo",  "seoul",  "quito",
                "perth",  "dublin", "hanoi",  "accra",  "madrid", "vienna", "prague", "lisbon",
                "nairobi", "manila", "bogota", "denver", "austin", "zurich", "munich", "kyoto",
                "busan",  "porto",  "sevilla", "krakow", "riga",  "tallinn", "helsinki", "bergen",
                "cusco",  "santiago", "havana", "tunis", "dakar", "lagos",  "doha",   "muscat"};
  return d;
}

void SyntheticDomain::validate() const {
  if (subtask_tags.empty()) throw Error(ErrorCode::InvalidConfig, "domain needs at least one tag");
  if (entities.empty()) throw Error(ErrorCode::InvalidConfig, "domain needs at least one entity");
  for (const auto& t : subtask_tags) {
    if (t.id.empty() || t.vocabulary.size() < 4 || t.step_verbs.empty()) {
      throw Error(ErrorCode::InvalidConfig, "tag '" + t.id + "' needs an id, 4 words and steps");
    }
  }
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(base_success_prob) || pattern_boost < 0.0 ||
      base_success_prob + pattern_boost > 1.0 + 1e-12) {
    throw Error(ErrorCode::InvalidConfig, "need 0 <= base, 0 <= boost, base + boost <= 1");
  }
  if (!in_unit(noise_pattern_rate) || !in_unit(second_tag_prob) || !in_unit(step_echo_prob)) {
    throw Error(ErrorCode::InvalidConfig, "domain rates must lie in [0, 1]");
  }
}

std::vector<SyntheticTask> generate_tasks(const SyntheticDomain& domain, std::size_t n,
                                          std::uint64_t seed) {
  domain.validate();
  SimRng rng(seed);
  std::vector<SyntheticTask> tasks;
  tasks.reserve(n);
  const std::size_t tag_count = domain.subtask_tags.size();
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticTask t;
    char id[32];
    std::snprintf(id, sizeof id, "task-%04zu", i + 1);
    t.task_id = id;
    t.tags.push_back(pick(rng, tag_count));
    if (tag_count > 1 && uniform01(rng) < domain.second_tag_prob) {
      std::size_t second = pick(rng, tag_count - 1);
      if (second >= t.tags.front()) ++second;
      t.tags.push_back(second);
    }
    t.entity = domain.entities[pick(rng, domain.entities.size())];
    for (std::size_t k = 0; k < t.tags.size(); ++k) {
      const SubtaskTag& tag = domain.subtask_tags[t.tags[k]];
      const std::size_t a = pick(rng, tag.vocabulary.size());
      std::size_t b = pick(rng, tag.vocabulary.size() - 1);
      if (b >= a) ++b;
      if (k == 0) {
        t.description = "handle " + tag.id + " " + tag.vocabulary[a] + " " + tag.vocabulary[b] +
                        " for " + t.entity;
      } else {
        t.description += " with " + tag.id + " " + tag.vocabulary[a] + " " + tag.vocabulary[b];
      }
    }
    t.stream = DigestWriter(seed).u64(i).value();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

double success_probability(const SyntheticDomain& domain, double covered_tag_fraction) {
  return std::min(1.0, domain.base_success_prob + domain.pattern_boost * covered_tag_fraction);
}

bool addresses_tag(const Pattern& pattern, const SubtaskTag& tag) {
  const auto steps = declared_steps(pattern);
  if (steps.empty()) return false;
  return std::all_of(steps.begin(), steps.end(),
                     [&](const std::string& s) { return has_token(tokenize(s), tag.id); });
}

// -- agent ------------------------------------------------------------------

TrajectoryRecord mock_agent_step(const SyntheticDomain& domain, const SyntheticTask& task,
                                 const Repository& repo, const IntegrationPlan& plan, SimRng& rng) {
  const double outcome_draw = uniform01(rng);

  std::vector<PatternId> injected;
  for (const auto& a : plan.prompt_augmentations) injected.push_back(a.pattern_id);
  for (const auto& t : plan.tool_registrations) injected.push_back(t.pattern_id);
  for (const auto& d : plan.delegations) injected.push_back(d.pattern_id);

  TrajectoryRecord record;
  record.task_id = task.task_id;
  record.task_description = task.description;
  record.steps.push_back({"read task", "ok"});

  std::size_t covered = 0;
  for (const std::size_t tag_index : task.tags) {
    const SubtaskTag& tag = domain.subtask_tags[tag_index];
    std::optional<PatternId> chosen;
    for (const auto id : injected) {
      if (addresses_tag(repo.at(id), tag) && (!chosen || id > *chosen)) chosen = id;
    }
    if (!chosen) {
      record.steps.push_back({"improvise " + tag.id, "partial"});
      continue;
    }
    ++covered;
    const Pattern& p = repo.at(*chosen);
    for (const auto& step : declared_steps(p)) {
      if (uniform01(rng) >= domain.step_echo_prob) continue;
      if (p.kind == PatternKind::Subagent) {
        record.subagent_calls.push_back(step);
      } else {
        record.steps.push_back({step, "ok"});
        if (const auto* s = std::get_if<SkillBody>(&p.body); s && s->form == SkillForm::Code) {
          record.tool_calls.push_back({underscore(step), task.entity});
        }
      }
    }
  }
  const double fraction =
      task.tags.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(task.tags.size());
  record.success = outcome_draw < success_probability(domain, fraction);
  record.steps.push_back({"report result", record.success ? "accepted" : "rejected"});
  return record;
}

// -- extraction provider ----------------------------------------------------

PatternDraft ScriptedExtractionProvider::tag_draft(std::size_t tag_index,
                                                   const std::string& entity) const {
  const SubtaskTag& tag = domain_.subtask_tags.at(tag_index);
  const auto& v = tag.vocabulary;
  PatternDraft d;
  d.description = "Handle " + tag.id + " " + v[0] + " " + v[1];
  d.context = tag.id + " " + v[2] + " " + v[3] + " requests";
  std::vector<std::string> steps;
  for (const auto& verb : tag.step_verbs) steps.push_back(verb + " " + tag.id + " " + entity);

  if (tag.procedural) {
    SubagentBody body;
    body.system_prompt = "Coordinate " + tag.id + " work for the main agent";
    for (const auto& s : steps) body.tool_declarations.push_back({underscore(s), "phase of " + tag.id});
    body.input_contract = tag.id + " request";
    body.output_contract = tag.id + " outcome";
    d.body = std::move(body);
    d.features.subtask_encapsulation = true;
    d.features.step_count = static_cast<std::uint32_t>(steps.size());
    d.features.stateful = true;
  } else {
    std::string text;
    for (const auto& s : steps) text += (text.empty() ? "- " : "\n- ") + s;
    d.body = SkillBody::guideline(std::move(text));
    d.features.stateless_guidance = true;
    d.features.step_count = static_cast<std::uint32_t>(steps.size());
  }
  return d;
}

PatternDraft ScriptedExtractionProvider::noise_draft(std::size_t tag_index,
                                                     const std::string& entity) const {
  const SubtaskTag& tag = domain_.subtask_tags.at(tag_index);
  PatternDraft d;
  const auto& v = tag.vocabulary;
  d.description = "Handle " + tag.id + " " + v[0] + " " + v[1] + " setbacks";
  d.context = tag.id + " " + v[2] + " " + v[3] + " " + entity + " retries";
  d.body = SkillBody::guideline("- recheck " + entity + " twice\n- wait for a sign\n- proceed anyway");
  d.features.stateless_guidance = true;
  d.features.step_count = 3;
  return d;
}

namespace {

struct Observed {
  std::size_t first_tag = 0;
  std::string entity;
};

}  // namespace

std::vector<PatternDraft> ScriptedExtractionProvider::extract(const TrajectoryBatch& batch) const {
  const std::size_t n = domain_.subtask_tags.size();
  std::vector<std::size_t> count(n, 0);
  std::vector<std::string> entity(n);
  DigestWriter batch_hash(seed_);

  const auto observe = [&](const TrajectoryRecord& t, bool learn_entity) {
    batch_hash.str(t.task_id);
    const auto tokens = tokenize(t.task_description);
    Observed seen{n, {}};
    for (const auto& e : domain_.entities) {
      if (has_token(tokens, e)) seen.entity = e;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!has_token(tokens, domain_.subtask_tags[i].id)) continue;
      ++count[i];
      if (seen.first_tag == n) seen.first_tag = i;
      if (learn_entity && entity[i].empty()) entity[i] = seen.entity;
    }
    return seen;
  };

  for (const auto& t : batch.successes) observe(t, true);
  std::vector<Observed> failed;
  // Only a failure that followed injected guidance can be misread as a lesson.
  for (const auto& t : batch.failures) {
    Observed seen = observe(t, false);
    if (t.injected_pattern_ids.empty()) seen.entity.clear();
    failed.push_back(std::move(seen));
  }

  // Only tags seen succeeding yield a genuine lesson.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (!entity[i].empty()) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return count[a] > count[b]; });

  // Each failure may leave behind a spurious lesson about what went wrong.
  SimRng rng(batch_hash.value());
  std::vector<PatternDraft> noise;
  for (const Observed& f : failed) {
    const bool spurious = uniform01(rng) < domain_.noise_pattern_rate;
    if (spurious && f.first_tag < n && !f.entity.empty() && noise.size() < kMaxNoisePerBatch) {
      noise.push_back(noise_draft(f.first_tag, f.entity));
    }
  }

  std::vector<PatternDraft> drafts;
  const std::size_t room = kMaxDraftsPerBatch - noise.size();
  for (std::size_t i = 0; i < order.size() && drafts.size() < room; ++i) {
    drafts.push_back(tag_draft(order[i], entity[order[i]]));
  }
  for (auto& d : noise) drafts.push_back(std::move(d));
  return drafts;
}

// -- experiment -------------------------------------------------------------

double mean_utilization_ratio(const Repository& repo) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& [id, p] : repo.patterns()) {
    if (p.metadata.retrieval_count == 0) continue;
    total += static_cast<double>(p.metadata.utilization_count) /
             static_cast<double>(p.metadata.retrieval_count);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

ExperimentResult run_experiment(const EngineConfig& config, const Toggles& toggles,
                                const ExperimentOptions& options) {
  ExperimentResult result;
  result.repository = new_repository(config);
  Repository& repo = result.repository;
  const ScriptedExtractionProvider provider(options.domain, options.seed);
  const ScriptedMergeVerifier verifier(config.merge_threshold);
  const TokenSubsequenceJudge judge;
  const ScriptedQueryGenerator queries;
  const std::size_t batch = toggles.batch_extraction_on ? config.extraction_batch : 1;

  std::deque<bool> window;
  std::size_t successes = 0;
  for (const auto& task : generate_tasks(options.domain, options.tasks, options.seed)) {
    ExecutionContext ctx = begin_task(repo, task.task_id, task.description, queries);
    SimRng rng(task.stream);
    TrajectoryRecord trajectory = mock_agent_step(options.domain, task, repo, ctx.plan, rng);
    const bool success = trajectory.success;
    result.summaries.push_back(finish_task(repo, ctx, std::move(trajectory), judge));

    if (toggles.extraction_on && extraction_due(repo, batch)) {
      const auto extracted =
          extract_and_install(repo, provider, {.batch_size = batch, .allow_subagents = toggles.subagents_on});
      result.patterns_installed += extracted.installed.size();
      result.extraction_tasks.push_back(repo.tasks_completed());
    }
    if (toggles.maintenance_on && maintenance_due(repo)) {
      run_maintenance(repo, verifier, {.force = false, .prune_enabled = toggles.pruning_on});
      result.maintenance_tasks.push_back(repo.tasks_completed());
    }

    successes += success ? 1 : 0;
    window.push_back(success);
    if (window.size() > kRollingWindow) window.pop_front();
    TimeSeriesRow row;
    row.task_index = repo.tasks_completed();
    row.repo_size = repo.size();
    row.utilization_ratio = mean_utilization_ratio(repo);
    row.success_rate = static_cast<double>(std::count(window.begin(), window.end(), true)) /
                       static_cast<double>(window.size());
    result.series.rows.push_back(row);
  }

  result.final_size = repo.size();
  result.final_utilization = mean_utilization_ratio(repo);
  result.final_success_rate = result.series.rows.empty() ? 0.0 : result.series.rows.back().success_rate;
  result.overall_success_rate =
      options.tasks == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(options.tasks);
  result.final_digest = repo.state_digest();
  return result;
}

std::string to_csv(const RunTimeSeries& series) {
  std::string out = "task_index,repo_size,utilization_ratio,success_rate\n";
  char buf[128];
  for (const auto& r : series.rows) {
    std::snprintf(buf, sizeof buf, "%lld,%zu,%.6f,%.6f\n", static_cast<long long>(r.task_index),
                  r.repo_size, r.utilization_ratio, r.success_rate);
    out += buf;
  }
  return out;
}

// -- sweeps -----------------------------------------------------------------

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "K") return SweepParameter::ExtractionBatch;
  if (name == "alpha") return SweepParameter::PruneFraction;
  if (name == "k") return SweepParameter::RetrievalK;
  if (name == "theta") return SweepParameter::SimilarityThreshold;
  throw Error(ErrorCode::InvalidConfig, "unknown sweep parameter '" + std::string(name) +
                                            "' (expected K, alpha, k or theta)");
}

std::string_view to_string(SweepParameter p) noexcept {
  switch (p) {
    case SweepParameter::ExtractionBatch: return "K";
    case SweepParameter::PruneFraction: return "alpha";
    case SweepParameter::RetrievalK: return "k";
    case SweepParameter::SimilarityThreshold: return "theta";
  }
  return "?";
}

namespace {

std::size_t as_count(double v, std::string_view name) {
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<SweepRow> sweep(const EngineConfig& config, SweepParameter parameter,
                            const std::vector<double>& values, const Toggles& toggles,
                            const ExperimentOptions& options) {
  // Validate every value up front so a bad list fails before any run.
  std::vector<std::pair<EngineConfig, Toggles>> runs;
  for (const double v : values) {
    EngineConfig c = config;
    Toggles t = toggles;
    switch (parameter) {
      case SweepParameter::ExtractionBatch: c.extraction_batch = as_count(v, "K"); break;
      case SweepParameter::RetrievalK: c.retrieval_k = as_count(v, "k"); break;
      case SweepParameter::SimilarityThreshold: c.similarity_threshold = v; break;
      case SweepParameter::PruneFraction:
        if (v == 0.0) {
          t.pruning_on = false;
        } else {
          c.prune_fraction = v;
        }
        break;
    }
    validate(c);
    runs.emplace_back(c, t);
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const ExperimentResult r = run_experiment(runs[i].first, runs[i].second, options);
    rows.push_back({values[i], r.final_size, r.final_utilization, r.final_success_rate,
                    r.maintenance_tasks.size(), r.patterns_installed});
  }
  return rows;
}

std::string sweep_csv(SweepParameter parameter, const std::vector<SweepRow>& rows) {
  std::string out =
      "parameter,value,final_repo_size,final_utilization_ratio,final_success_rate,"
      "maintenance_events,patterns_installed\n";
  char buf[192];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%zu,%.6f,%.6f,%zu,%zu\n",
                  std::string(to_string(parameter)).c_str(), r.value, r.final_size,
                  r.final_utilization, r.final_success_rate, r.maintenance_events,
                  r.patterns_installed);
    out += buf;
  }
  return out;
}

// -- reports ----------------------------------------------------------------

EffectivenessReport effectiveness(const std::vector<UtilizationSummary>& summaries) {
  std::set<PatternId> injected, high, used_in_failure;
  for (const auto& s : summaries) {
    for (const auto& p : s.patterns) {
      injected.insert(p.pattern_id);
      if (s.success && p.alpha > 0.5) high.insert(p.pattern_id);
      if (!s.success && p.utilized) used_in_failure.insert(p.pattern_id);
    }
  }
  EffectivenessReport report;
  for (const auto id : injected) {
    if (high.contains(id)) {
      report.high_value.push_back(id);
    } else if (used_in_failure.contains(id)) {
      report.misleading.push_back(id);
    } else {
      report.low_value.push_back(id);
    }
  }
  return report;
}

DynamicsCheck check_dynamics(const EngineConfig& config, const ExperimentOptions& options) {
  Toggles off;
  off.maintenance_on = false;
  const ExperimentResult with = run_experiment(config, Toggles{}, options);
  const ExperimentResult without = run_experiment(config, off, options);
  DynamicsCheck c;
  c.size_on = with.final_size;
  c.size_off = without.final_size;
  c.utilization_on = with.final_utilization;
  c.utilization_off = without.final_utilization;
  c.size_ok = c.size_off >= 3 * c.size_on;
  c.utilization_ok = c.utilization_off <= 0.15 && c.utilization_on >= 0.5;
  return c;
}

}  // namespace patternkit
