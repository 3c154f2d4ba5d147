#include "patternkit/extraction.hpp"

#include "patternkit/embedding.hpp"
#include "patternkit/serialize.hpp"
#include "patternkit/text.hpp"

namespace patternkit {

std::vector<PatternDraft> FixedExtractionProvider::extract(const TrajectoryBatch&) const {
  if (fail_) throw Error(ErrorCode::InvariantViolation, "scripted provider failure");
  return drafts_;
}

bool extraction_due(const Repository& repo, std::size_t batch_size) {
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");
  const auto n = repo.tasks_completed();
  return n > 0 && n % static_cast<std::int64_t>(batch_size) == 0;
}

TrajectoryBatch recent_batch(const Repository& repo, std::size_t batch_size) {
  const auto history = repo.trajectories();
  if (history.size() < batch_size) {
    throw Error(ErrorCode::InsufficientHistory,
                "need " + std::to_string(batch_size) + " trajectories, have " +
                    std::to_string(history.size()));
  }
  TrajectoryBatch batch;
  for (const auto& t : history.last(batch_size)) {
    (t.success ? batch.successes : batch.failures).push_back(t);
  }
  return batch;
}

PatternKind classify(const ClassificationFeatures& f) {
  if (f.sustained_memory) return PatternKind::Subagent;
  if (f.independent_reasoning) return PatternKind::Subagent;
  if (f.subtask_encapsulation) return PatternKind::Subagent;
  if (f.stateless_guidance) return PatternKind::Skill;
  const int votes = int{f.step_count >= 5} + int{f.decision_points >= 3} +
                    int{f.tool_count >= 3} + int{f.stateful};
  return votes >= 2 ? PatternKind::Subagent : PatternKind::Skill;
}

SkillBody flatten_to_guideline(const SubagentBody& subagent) {
  std::string text = std::string(trim(subagent.system_prompt));
  for (const auto& tool : subagent.tool_declarations) {
    text += "\n" + tool.name;
    if (!tool.purpose.empty()) text += ": " + tool.purpose;
  }
  return SkillBody::guideline(std::move(text));
}

namespace {

std::string check_draft(const PatternDraft& d) {
  if (trim(d.description).empty()) return "empty description";
  if (trim(d.context).empty()) return "empty context";
  return {};
}

}  // namespace

ExtractionResult install_drafts(Repository& repo, std::size_t batch_size,
                                std::optional<std::vector<PatternDraft>> drafts,
                                std::string failure, bool allow_subagents) {
  ExtractionResult result;
  Json payload{{"batch_size", batch_size}, {"allow_subagents", allow_subagents}};
  if (drafts && drafts->size() > kMaxDraftsPerBatch) {
    failure = "provider returned " + std::to_string(drafts->size()) + " drafts (limit " +
              std::to_string(kMaxDraftsPerBatch) + ")";
    drafts.reset();
  }
  if (!drafts) {
    result.provider_failed = true;
    result.failure = failure;
    payload["provider_failure"] = failure;
    repo.record(AuditEventKind::Extraction, std::move(payload));
    return result;
  }

  Repository staged = repo;
  Json drafts_json = Json::array();
  for (auto& draft : *drafts) {
    drafts_json.push_back(to_json(draft));
    if (auto why = check_draft(draft); !why.empty()) {
      result.dropped.push_back(why);
      continue;
    }
    PatternKind kind = draft.pinned_kind.value_or(classify(draft.features));
    PatternBody body = draft.body;
    if (!allow_subagents && kind == PatternKind::Subagent) {
      kind = PatternKind::Skill;
      if (const auto* sub = std::get_if<SubagentBody>(&body)) body = flatten_to_guideline(*sub);
    }
    if (kind_of(body) != kind) {
      result.dropped.push_back("body does not match resolved kind " + std::string(to_string(kind)));
      continue;
    }
    Pattern p;
    p.kind = kind;
    p.body = std::move(body);
    p.metadata.description = draft.description;
    p.metadata.context = draft.context;
    p.created_at_task = staged.tasks_completed();
    try {
      validate(p);
      p.metadata.embedding = embed(staged.embedder(), retrieval_text(p.metadata));
      result.installed.push_back(staged.insert(std::move(p)));
    } catch (const Error& e) {
      result.dropped.push_back(e.what());
    }
  }
  Json installed = Json::array();
  for (const auto id : result.installed) installed.push_back(id.value);
  payload["drafts"] = std::move(drafts_json);
  payload["installed"] = std::move(installed);
  payload["dropped"] = result.dropped;
  staged.record(AuditEventKind::Extraction, std::move(payload));
  repo = std::move(staged);
  return result;
}

ExtractionResult extract_and_install(Repository& repo, const ExtractionProvider& provider,
                                     ExtractionOptions options) {
  if (repo.open_task()) {
    throw Error(ErrorCode::ContextAlreadyOpen, "task " + *repo.open_task() + " is still open");
  }
  const std::size_t k = options.batch_size ? options.batch_size : repo.config().extraction_batch;
  const TrajectoryBatch batch = recent_batch(repo, k);
  const std::int64_t tasks_before = repo.tasks_completed();

  std::optional<std::vector<PatternDraft>> drafts;
  std::string failure;
  try {
    drafts = provider.extract(batch);
  } catch (const std::exception& e) {
    failure = e.what();
  }
  if (repo.tasks_completed() != tasks_before) {
    throw Error(ErrorCode::InvariantViolation, "task counter moved during extraction");
  }
  return install_drafts(repo, k, std::move(drafts), std::move(failure), options.allow_subagents);
}

}  // namespace patternkit
