#include "patternkit/tracking.hpp"

#include "patternkit/serialize.hpp"
#include "patternkit/text.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace patternkit {

namespace {

// Drops "-", "*", "•", "1.", "2)" and similar list markers.
std::string_view strip_list_marker(std::string_view line) {
  line = trim(line);
  if (line.starts_with("- ") || line.starts_with("* ")) return trim(line.substr(2));
  if (line.starts_with("\xE2\x80\xA2")) return trim(line.substr(3));
  std::size_t i = 0;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return trim(line.substr(i + 1));
  return line;
}

std::string tool_name_for(const Pattern& p, const SkillBody& skill) {
  std::string_view hint = trim(skill.usage_hint);
  if (const auto paren = hint.find('('); paren != std::string_view::npos) {
    hint = trim(hint.substr(0, paren));
  }
  return hint.empty() ? "pattern_" + std::to_string(p.id.value) : std::string(hint);
}

}  // namespace

IntegrationPlan build_integration_plan(const Repository& repo,
                                       const std::vector<RetrievedPattern>& retrieved) {
  IntegrationPlan plan;
  for (const auto& r : retrieved) {
    const Pattern& p = repo.at(r.pattern_id);
    if (const auto* skill = std::get_if<SkillBody>(&p.body)) {
      if (skill->form == SkillForm::Guideline) {
        plan.prompt_augmentations.push_back(
            {p.id, p.metadata.description + "\n" + skill->guideline_text});
      } else {
        plan.tool_registrations.push_back(
            {p.id, tool_name_for(p, *skill), "pattern:" + std::to_string(p.id.value)});
      }
    } else {
      plan.delegations.push_back({p.id, p.metadata.description, p.metadata.context});
    }
  }
  return plan;
}

std::vector<std::string> declared_steps(const Pattern& pattern) {
  std::vector<std::string> steps;
  if (const auto* skill = std::get_if<SkillBody>(&pattern.body)) {
    if (skill->form == SkillForm::Guideline) {
      std::string_view text = skill->guideline_text;
      while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = strip_list_marker(text.substr(0, nl));
        if (!line.empty()) steps.emplace_back(line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
      }
    } else if (!trim(skill->usage_hint).empty()) {
      steps.emplace_back(trim(skill->usage_hint));
    }
  } else {
    for (const auto& tool : std::get<SubagentBody>(pattern.body).tool_declarations) {
      steps.push_back(tool.name);
    }
  }
  return steps;
}

bool token_subsequence(std::span<const std::string> needle, std::span<const std::string> haystack) {
  if (needle.empty()) return false;
  std::size_t i = 0;
  for (const auto& token : haystack) {
    if (token == needle[i] && ++i == needle.size()) return true;
  }
  return false;
}

double TokenSubsequenceJudge::match_score(const Pattern& pattern,
                                          const TrajectoryRecord& trajectory) const {
  const auto steps = declared_steps(pattern);
  if (steps.empty()) return 0.0;

  std::vector<std::vector<std::string>> haystacks;
  if (const auto* skill = std::get_if<SkillBody>(&pattern.body)) {
    for (const auto& s : trajectory.steps) haystacks.push_back(tokenize(s.action));
    if (skill->form == SkillForm::Code) {
      for (const auto& call : trajectory.tool_calls) {
        haystacks.push_back(tokenize(call.tool + " " + call.args_digest));
      }
    }
  } else {
    for (const auto& call : trajectory.subagent_calls) haystacks.push_back(tokenize(call));
  }

  std::size_t matched = 0;
  for (const auto& step : steps) {
    const auto needle = tokenize(step);
    if (std::any_of(haystacks.begin(), haystacks.end(),
                    [&](const auto& h) { return token_subsequence(needle, h); })) {
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(steps.size());
}

double RecordedJudge::match_score(const Pattern& pattern, const TrajectoryRecord&) const {
  const auto it = alphas_.find(pattern.id);
  return it == alphas_.end() ? 0.0 : it->second;
}

double match_score(const UtilizationJudge& judge, const Pattern& pattern,
                   const TrajectoryRecord& trajectory) {
  if (declared_steps(pattern).empty()) return 0.0;
  const double alpha = judge.match_score(pattern, trajectory);
  if (!(alpha > 0.0)) return 0.0;  // also maps NaN to 0
  return std::min(alpha, 1.0);
}

double utilization_rate(std::span<const PatternUtilization> patterns) {
  if (patterns.empty()) return 0.0;
  const auto used = std::count_if(patterns.begin(), patterns.end(),
                                  [](const PatternUtilization& p) { return p.utilized; });
  return static_cast<double>(used) / static_cast<double>(patterns.size());
}

ExecutionContext begin_task(Repository& repo, std::string task_id,
                            std::string_view task_description, const QueryGenerator& generator) {
  if (repo.open_task()) {
    throw Error(ErrorCode::ContextAlreadyOpen, "task " + *repo.open_task() + " is still open");
  }
  ExecutionContext ctx;
  ctx.task_id = std::move(task_id);
  ctx.task_description = std::string(task_description);
  const TaskQuery query = prepare_query(repo, task_description, generator);
  ctx.queries = query.queries;
  for (const auto& pick : select_patterns(repo, query)) {
    ctx.retrieved.push_back({pick.pattern_id, pick.relevance});
  }
  for (const auto& r : ctx.retrieved) repo.add_counts(r.pattern_id, 1, 0, 0);
  ctx.plan = build_integration_plan(repo, ctx.retrieved);
  ctx.open = true;
  repo.set_open_task(ctx.task_id);
  return ctx;
}

ExecutionContext begin_task(Repository& repo, std::string task_id,
                            std::string_view task_description) {
  return begin_task(repo, std::move(task_id), task_description, ScriptedQueryGenerator{});
}

UtilizationSummary finish_task(Repository& repo, ExecutionContext& ctx, TrajectoryRecord trajectory,
                               const UtilizationJudge& judge) {
  if (!ctx.open) throw Error(ErrorCode::DoubleFinish, "task " + ctx.task_id + " already finished");
  if (repo.open_task() != ctx.task_id) {
    throw Error(ErrorCode::ContextMismatch, "context " + ctx.task_id + " is not the open task");
  }
  if (trajectory.task_id != ctx.task_id) {
    throw Error(ErrorCode::ContextMismatch,
                "trajectory for " + trajectory.task_id + " does not belong to " + ctx.task_id);
  }
  std::set<PatternId> retrieved_ids;
  for (const auto& r : ctx.retrieved) retrieved_ids.insert(r.pattern_id);
  if (trajectory.injected_pattern_ids.empty()) {
    for (const auto& r : ctx.retrieved) trajectory.injected_pattern_ids.push_back(r.pattern_id);
  }
  for (const auto id : trajectory.injected_pattern_ids) {
    if (!retrieved_ids.contains(id)) {
      throw Error(ErrorCode::InvariantViolation,
                  "injected " + to_string(id) + " was not retrieved for " + ctx.task_id);
    }
  }
  if (trajectory.task_description.empty()) trajectory.task_description = ctx.task_description;

  UtilizationSummary summary;
  summary.task_id = ctx.task_id;
  summary.success = trajectory.success;
  const double threshold = repo.config().match_threshold;
  for (const auto& r : ctx.retrieved) {
    PatternUtilization pu;
    pu.pattern_id = r.pattern_id;
    pu.alpha = match_score(judge, repo.at(r.pattern_id), trajectory);
    pu.utilized = pu.alpha > threshold;
    pu.success_credited = pu.utilized && trajectory.success;
    summary.patterns.push_back(pu);
  }
  for (const auto& pu : summary.patterns) {
    repo.add_counts(pu.pattern_id, 0, pu.utilized ? 1 : 0, pu.success_credited ? 1 : 0);
  }
  summary.beta_util = utilization_rate(summary.patterns);

  Json alphas = Json::array();
  for (const auto& pu : summary.patterns) alphas.push_back(Json::array({pu.pattern_id.value, pu.alpha}));
  Json payload{{"queries", ctx.queries},
               {"task_description", ctx.task_description},
               {"alphas", std::move(alphas)},
               {"trajectory", to_json(trajectory)}};
  repo.append_trajectory(std::move(trajectory));
  summary.task_index = repo.tasks_completed();
  repo.set_open_task(std::nullopt);
  ctx.open = false;
  repo.record(AuditEventKind::TaskFinished, std::move(payload));
  return summary;
}

std::string utilization_csv(std::span<const UtilizationSummary> summaries) {
  std::string out = "task_id,pattern_id,alpha,utilized,success_credited\n";
  char buf[64];
  for (const auto& s : summaries) {
    for (const auto& p : s.patterns) {
      std::snprintf(buf, sizeof buf, "%.6f", p.alpha);
      out += s.task_id + "," + std::to_string(p.pattern_id.value) + "," + buf + "," +
             (p.utilized ? "1" : "0") + "," + (p.success_credited ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace patternkit
