#include "patternkit/persistence.hpp"

#include "patternkit/extraction.hpp"
#include "patternkit/lifecycle.hpp"
#include "patternkit/serialize.hpp"
#include "patternkit/tracking.hpp"

#include <fstream>
#include <sstream>

namespace patternkit {

namespace {

// nlohmann reports a byte offset; callers want a line and column.
[[noreturn]] void rethrow_parse_error(const nlohmann::json::parse_error& e, std::string_view text,
                                      std::size_t line_offset = 0) {
  const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  std::string what = e.what();
  if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
  throw ParseError(line + line_offset, column, what);
}

Json parse_json(std::string_view text, std::size_t line_offset = 0) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    rethrow_parse_error(e, text, line_offset);
  }
}

void check_header(const Json& doc, std::string_view format) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "document is not a JSON object");
  const auto f = doc.find("format");
  if (f == doc.end() || !f->is_string() || f->get<std::string>() != format) {
    throw Error(ErrorCode::ParseError, "not a " + std::string(format) + " document");
  }
  const auto v = doc.find("schema_version");
  if (v == doc.end() || !v->is_number_integer()) {
    throw Error(ErrorCode::ParseError, "missing integer schema_version");
  }
  if (v->get<std::int64_t>() != kSchemaVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "file has schema_version " + std::to_string(v->get<std::int64_t>()) +
                    ", this build reads " + std::to_string(kSchemaVersion));
  }
}

const Json& member(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  return *it;
}

Repository repository_from_json(const Json& doc, std::shared_ptr<const EmbeddingProvider> embedder) {
  check_header(doc, kRepositoryFormat);
  try {
    const EngineConfig config = config_from_json(member(doc, "config"));
    validate(config);
    Repository repo(config, std::move(embedder));
    for (const auto& pj : member(doc, "patterns")) {
      Pattern p = pattern_from_json(pj);
      if (!p.id) throw Error(ErrorCode::InvariantViolation, "stored pattern without an id");
      repo.insert(std::move(p));
    }
    for (const auto& tj : member(doc, "trajectories")) repo.append_trajectory(trajectory_from_json(tj));

    const Json& c = member(doc, "counters");
    const auto tasks = member(c, "tasks_completed").get<std::int64_t>();
    if (tasks != repo.tasks_completed()) {
      throw Error(ErrorCode::InvariantViolation,
                  "tasks_completed " + std::to_string(tasks) + " but " +
                      std::to_string(repo.tasks_completed()) + " trajectories stored");
    }
    repo.restore_counters(member(c, "next_maintenance_threshold").get<std::int64_t>(),
                          member(c, "last_maintenance_task").get<std::int64_t>(),
                          member(c, "next_pattern_id").get<std::uint64_t>());
    repo.check_invariants();
    return repo;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

Json repository_to_json(const Repository& repo) {
  Json patterns = Json::array();
  for (const auto& [id, p] : repo.patterns()) patterns.push_back(to_json(p));
  Json trajectories = Json::array();
  for (const auto& t : repo.trajectories()) trajectories.push_back(to_json(t));
  return Json{{"format", kRepositoryFormat},
              {"schema_version", kSchemaVersion},
              {"config", to_json(repo.config())},
              {"counters",
               {{"tasks_completed", repo.tasks_completed()},
                {"next_maintenance_threshold", repo.next_maintenance_threshold()},
                {"last_maintenance_task", repo.last_maintenance_task()},
                {"next_pattern_id", repo.next_pattern_id()}}},
              {"patterns", std::move(patterns)},
              {"trajectories", std::move(trajectories)}};
}

/// Hands back the verdicts recorded by a maintenance event, in order.
class RecordedVerifier final : public MergeVerifier {
 public:
  explicit RecordedVerifier(std::vector<VerdictRecord> verdicts) : verdicts_(std::move(verdicts)) {}

  MergeVerdict decide(const Pattern& a, const Pattern& b) const override {
    if (next_ >= verdicts_.size()) return MergeVerdict::reject("no recorded verdict");
    const VerdictRecord& r = verdicts_[next_++];
    if (r.pair != PatternPair{a.id, b.id}) return MergeVerdict::reject("recorded pair differs");
    return r.verdict;
  }

 private:
  std::vector<VerdictRecord> verdicts_;
  mutable std::size_t next_ = 0;
};

void apply_event(Repository& repo, const AuditEvent& event) {
  const Json& p = event.payload;
  switch (event.kind) {
    case AuditEventKind::Seed: {
      std::vector<Pattern> patterns;
      for (const auto& pj : member(p, "patterns")) patterns.push_back(pattern_from_json(pj));
      seed_patterns(repo, std::move(patterns));
      return;
    }
    case AuditEventKind::TaskFinished: {
      TrajectoryRecord trajectory = trajectory_from_json(member(p, "trajectory"));
      const auto description = member(p, "task_description").get<std::string>();
      const FixedQueryGenerator queries(member(p, "queries").get<std::vector<std::string>>());
      std::map<PatternId, double> alphas;
      for (const auto& a : member(p, "alphas")) {
        alphas[PatternId{a.at(0).get<std::uint64_t>()}] = a.at(1).get<double>();
      }
      ExecutionContext ctx = begin_task(repo, trajectory.task_id, description, queries);
      finish_task(repo, ctx, std::move(trajectory), RecordedJudge(std::move(alphas)));
      return;
    }
    case AuditEventKind::Extraction: {
      const auto batch = member(p, "batch_size").get<std::size_t>();
      const bool allow_subagents = member(p, "allow_subagents").get<bool>();
      if (p.contains("provider_failure")) {
        install_drafts(repo, batch, std::nullopt, p["provider_failure"].get<std::string>(),
                       allow_subagents);
        return;
      }
      std::vector<PatternDraft> drafts;
      for (const auto& d : member(p, "drafts")) drafts.push_back(draft_from_json(d));
      install_drafts(repo, batch, std::move(drafts), {}, allow_subagents);
      return;
    }
    case AuditEventKind::Maintenance: {
      const MaintenanceReport report = report_from_json(p);
      MaintenanceOptions options;
      options.force = member(p, "forced").get<bool>();
      options.prune_enabled = member(p, "prune_enabled").get<bool>();
      run_maintenance(repo, RecordedVerifier(report.verdicts), options);
      return;
    }
    case AuditEventKind::Snapshot:
      repo.snapshot();
      return;
  }
}

}  // namespace

std::string serialize(const Repository& repo) {
  if (repo.open_task()) {
    throw Error(ErrorCode::ContextAlreadyOpen,
                "cannot serialize while task " + *repo.open_task() + " is open");
  }
  return canonical_dump(repository_to_json(repo), true);
}

Repository deserialize(std::string_view text, std::shared_ptr<const EmbeddingProvider> embedder) {
  return repository_from_json(parse_json(text), std::move(embedder));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  // Write beside the target and rename so a crash never leaves a torn file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

std::size_t save(const Repository& repo, const std::filesystem::path& path) {
  const std::string text = serialize(repo);
  write_file(path, text);
  return text.size();
}

Repository load(const std::filesystem::path& path, std::shared_ptr<const EmbeddingProvider> embedder) {
  return deserialize(read_file(path), std::move(embedder));
}

// -- audit ------------------------------------------------------------------

AuditLog audit_log_of(const Repository& repo) { return {repo.config(), repo.audit()}; }

std::string serialize_audit(const AuditLog& log) {
  std::string out = canonical_dump(
      Json{{"format", kAuditFormat}, {"schema_version", kSchemaVersion}, {"config", to_json(log.config)}},
      false);
  out.push_back('\n');
  for (const auto& e : log.events) {
    out += canonical_dump(Json{{"seq", e.sequence_no},
                               {"kind", to_string(e.kind)},
                               {"payload", e.payload},
                               {"digest", to_hex(e.state_digest)}},
                          false);
    out.push_back('\n');
  }
  return out;
}

AuditLog parse_audit(std::string_view text) {
  AuditLog log;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const Json j = parse_json(line, line_no - 1);
    try {
      if (!have_header) {
        check_header(j, kAuditFormat);
        log.config = config_from_json(member(j, "config"));
        validate(log.config);
        have_header = true;
        continue;
      }
      AuditEvent e;
      e.sequence_no = member(j, "seq").get<std::uint64_t>();
      e.kind = parse_audit_kind(member(j, "kind").get<std::string>());
      e.payload = member(j, "payload");
      e.state_digest = from_hex(member(j, "digest").get<std::string>());
      const std::uint64_t expected = log.events.empty() ? e.sequence_no : log.events.back().sequence_no + 1;
      if (e.sequence_no != expected || e.sequence_no == 0) {
        throw Error(ErrorCode::ParseError, "sequence number " + std::to_string(e.sequence_no) +
                                               " out of order (expected " +
                                               std::to_string(expected) + ")");
      }
      log.events.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::VersionMismatch) throw;
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "audit log has no header line");
  return log;
}

std::size_t save_audit(const Repository& repo, const std::filesystem::path& path) {
  const std::string text = serialize_audit(audit_log_of(repo));
  write_file(path, text);
  return text.size();
}

AuditLog load_audit(const std::filesystem::path& path) { return parse_audit(read_file(path)); }

// -- replay -----------------------------------------------------------------

Repository replay_repository(const AuditLog& log, std::shared_ptr<const EmbeddingProvider> embedder) {
  std::size_t start = 0;
  Repository repo = [&] {
    if (!log.events.empty() && log.events.front().kind == AuditEventKind::Snapshot) {
      Repository r = repository_from_json(log.events.front().payload, embedder);
      if (r.state_digest() != log.events.front().state_digest) {
        throw DigestDivergence(log.events.front().sequence_no, log.events.front().state_digest,
                               r.state_digest());
      }
      r.restore_audit({log.events.front()});
      start = 1;
      return r;
    }
    return new_repository(log.config, embedder);
  }();
  if (start == 0 && !log.events.empty() && log.events.front().sequence_no != 1) {
    throw Error(ErrorCode::ParseError, "audit log neither starts at 1 nor with a snapshot");
  }

  for (std::size_t i = start; i < log.events.size(); ++i) {
    const AuditEvent& event = log.events[i];
    try {
      apply_event(repo, event);
    } catch (const DigestDivergence&) {
      throw;
    } catch (const std::exception&) {
      // The recorded event cannot be reproduced from this state.
      throw DigestDivergence(event.sequence_no, event.state_digest, repo.state_digest());
    }
    const AuditEvent& produced = repo.audit().back();
    if (produced.sequence_no != event.sequence_no || produced.kind != event.kind ||
        produced.state_digest != event.state_digest) {
      throw DigestDivergence(event.sequence_no, event.state_digest, produced.state_digest);
    }
  }
  return repo;
}

std::uint64_t replay(const AuditLog& log, std::shared_ptr<const EmbeddingProvider> embedder) {
  return replay_repository(log, std::move(embedder)).state_digest();
}

}  // namespace patternkit
