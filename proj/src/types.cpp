#include "patternkit/types.hpp"

#include "patternkit/audit.hpp"
#include "patternkit/error.hpp"
#include "patternkit/text.hpp"

#include <set>

namespace patternkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::DuplicateId: return "duplicate-id";
    case ErrorCode::InvariantViolation: return "invariant-violation";
    case ErrorCode::UnknownPattern: return "unknown-pattern";
    case ErrorCode::EmptyText: return "empty-text";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::ZeroVector: return "zero-vector";
    case ErrorCode::KindMismatch: return "kind-mismatch";
    case ErrorCode::VerifierRejected: return "verifier-rejected";
    case ErrorCode::InsufficientHistory: return "insufficient-history";
    case ErrorCode::ContextAlreadyOpen: return "context-already-open";
    case ErrorCode::ContextMismatch: return "context-mismatch";
    case ErrorCode::DoubleFinish: return "double-finish";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::DigestDivergence: return "digest-divergence";
  }
  return "unknown-error";
}

DigestDivergence::DigestDivergence(std::uint64_t sequence_no, std::uint64_t expected,
                                   std::uint64_t actual)
    : Error(ErrorCode::DigestDivergence, "sequence_no " + std::to_string(sequence_no) +
                                             ": recorded " + to_hex(expected) + ", replayed " +
                                             to_hex(actual)),
      sequence_no_(sequence_no),
      expected_(expected),
      actual_(actual) {}

std::string_view to_string(AuditEventKind kind) noexcept {
  switch (kind) {
    case AuditEventKind::Seed: return "seed";
    case AuditEventKind::TaskFinished: return "task_finished";
    case AuditEventKind::Extraction: return "extraction";
    case AuditEventKind::Maintenance: return "maintenance";
    case AuditEventKind::Snapshot: return "snapshot";
  }
  return "?";
}

AuditEventKind parse_audit_kind(std::string_view text) {
  for (auto k : {AuditEventKind::Seed, AuditEventKind::TaskFinished, AuditEventKind::Extraction,
                 AuditEventKind::Maintenance, AuditEventKind::Snapshot}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::ParseError, "unknown audit event kind '" + std::string(text) + "'");
}

std::string to_string(PatternId id) { return "p" + std::to_string(id.value); }

std::string_view to_string(PatternKind kind) noexcept {
  return kind == PatternKind::Skill ? "skill" : "subagent";
}

PatternKind parse_kind(std::string_view text) {
  if (text == "skill") return PatternKind::Skill;
  if (text == "subagent") return PatternKind::Subagent;
  throw Error(ErrorCode::ParseError, "unknown pattern kind '" + std::string(text) + "'");
}

std::string_view to_string(SkillForm form) noexcept {
  return form == SkillForm::Guideline ? "guideline" : "code";
}

SkillBody SkillBody::guideline(std::string text) {
  SkillBody b;
  b.form = SkillForm::Guideline;
  b.guideline_text = std::move(text);
  return b;
}

SkillBody SkillBody::code(std::string snippet, std::string language, std::vector<std::string> deps,
                          std::string usage) {
  SkillBody b;
  b.form = SkillForm::Code;
  b.code_snippet = std::move(snippet);
  b.code_language_tag = std::move(language);
  b.dependencies = std::move(deps);
  b.usage_hint = std::move(usage);
  return b;
}

PatternKind kind_of(const PatternBody& body) noexcept {
  return std::holds_alternative<SkillBody>(body) ? PatternKind::Skill : PatternKind::Subagent;
}

std::string retrieval_text(const PatternMetadata& metadata) {
  return metadata.description + "\n" + metadata.context;
}

namespace {

[[noreturn]] void bad_config(std::string_view field, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, std::string(field) + " " + why);
}

}  // namespace

void validate(const EngineConfig& c) {
  if (c.retrieval_k < 1) bad_config("k", "must be >= 1");
  if (!(c.similarity_threshold >= 0.0 && c.similarity_threshold <= 1.0)) {
    bad_config("theta", "must lie in [0, 1]");
  }
  if (!(c.mmr_lambda >= 0.0 && c.mmr_lambda <= 1.0)) bad_config("lambda", "must lie in [0, 1]");
  if (c.extraction_batch < 1) bad_config("K", "must be >= 1");
  if (!(c.prune_fraction > 0.0 && c.prune_fraction < 1.0)) {
    bad_config("alpha", "must lie in (0, 1)");
  }
  if (!(c.merge_threshold > 0.0 && c.merge_threshold <= 1.0)) {
    bad_config("theta_merge", "must lie in (0, 1]");
  }
  if (!(c.epsilon > 0.0)) bad_config("epsilon", "must be > 0");
  if (!(c.match_threshold >= 0.0 && c.match_threshold <= 1.0)) {
    bad_config("theta_match", "must lie in [0, 1]");
  }
  if (c.embedding_dim < 1) bad_config("embedding_dim", "must be >= 1");
  if (!(c.rrf_constant > 0.0)) bad_config("rrf_constant", "must be > 0");
  if (!(c.bm25_k1 > 0.0)) bad_config("bm25_k1", "must be > 0");
  if (!(c.bm25_b > 0.0 && c.bm25_b <= 1.0)) bad_config("bm25_b", "must lie in (0, 1]");
  if (c.query_count < 1) bad_config("query_count", "must be >= 1");
  if (c.mmr_pool_factor < 1) bad_config("mmr_pool_factor", "must be >= 1");
}

namespace {

[[noreturn]] void bad_pattern(const Pattern& p, const std::string& why) {
  throw Error(ErrorCode::InvariantViolation, "pattern " + to_string(p.id) + ": " + why);
}

}  // namespace

void validate(const Pattern& p) {
  if (kind_of(p.body) != p.kind) bad_pattern(p, "body variant disagrees with kind");
  const auto& m = p.metadata;
  if (!(m.success_count <= m.utilization_count && m.utilization_count <= m.retrieval_count)) {
    bad_pattern(p, "counters violate 0 <= s <= u <= r (r=" + std::to_string(m.retrieval_count) +
                       ", u=" + std::to_string(m.utilization_count) +
                       ", s=" + std::to_string(m.success_count) + ")");
  }
  if (trim(m.description).empty()) bad_pattern(p, "empty description");
  if (trim(m.context).empty()) bad_pattern(p, "empty context");
  if (const auto* skill = std::get_if<SkillBody>(&p.body)) {
    if (skill->form == SkillForm::Guideline) {
      if (trim(skill->guideline_text).empty()) bad_pattern(p, "guideline skill without text");
      if (!skill->code_snippet.empty() || !skill->code_language_tag.empty() ||
          !skill->dependencies.empty() || !skill->usage_hint.empty()) {
        bad_pattern(p, "guideline skill carries code fields");
      }
    } else if (trim(skill->code_snippet).empty()) {
      bad_pattern(p, "code skill without snippet");
    }
  } else {
    const auto& sub = std::get<SubagentBody>(p.body);
    if (trim(sub.system_prompt).empty()) bad_pattern(p, "subagent without system prompt");
    std::set<std::string> names;
    for (const auto& tool : sub.tool_declarations) {
      if (!names.insert(tool.name).second) bad_pattern(p, "duplicate tool name '" + tool.name + "'");
    }
  }
}

}  // namespace patternkit
