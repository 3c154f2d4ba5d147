#include "patternkit/repository.hpp"

#include "patternkit/persistence.hpp"
#include "patternkit/serialize.hpp"

#include <bit>
#include <set>

namespace patternkit {

Repository::Repository(EngineConfig config, std::shared_ptr<const EmbeddingProvider> embedder)
    : config_(std::move(config)), embedder_(std::move(embedder)) {
  if (!embedder_) embedder_ = HashFeatureEmbedder::for_config(config_);
  if (embedder_->dimension() != config_.embedding_dim) {
    throw Error(ErrorCode::InvalidConfig,
                "embedding_dim " + std::to_string(config_.embedding_dim) +
                    " differs from provider dimension " + std::to_string(embedder_->dimension()));
  }
}

const Pattern& Repository::at(PatternId id) const {
  const auto it = patterns_.find(id);
  if (it == patterns_.end()) throw Error(ErrorCode::UnknownPattern, to_string(id));
  return it->second;
}

std::uint64_t Repository::state_digest() const {
  DigestWriter w;
  w.i64(kSchemaVersion);
  digest_into(w, config_);
  w.i64(tasks_completed()).i64(next_maintenance_threshold_).i64(last_maintenance_task_);
  w.u64(next_pattern_id_).u64(patterns_.size());
  for (const auto& [id, pattern] : patterns_) digest_into(w, pattern);
  w.u64(trajectory_chain_);
  return w.value();
}

PatternId Repository::insert(Pattern pattern) {
  if (!pattern.id) pattern.id = allocate_id();
  if (patterns_.contains(pattern.id)) {
    throw Error(ErrorCode::DuplicateId, to_string(pattern.id) + " already present");
  }
  validate(pattern);
  auto& e = pattern.metadata.embedding;
  if (e.size() == 0) {
    e = embed(*embedder_, retrieval_text(pattern.metadata));
  } else if (static_cast<std::size_t>(e.size()) != config_.embedding_dim) {
    throw Error(ErrorCode::InvariantViolation,
                "pattern " + to_string(pattern.id) + ": embedding has " +
                    std::to_string(e.size()) + " components, repository uses " +
                    std::to_string(config_.embedding_dim));
  } else if (!is_unit(e)) {
    throw Error(ErrorCode::InvariantViolation,
                "pattern " + to_string(pattern.id) + ": embedding is not unit norm");
  }
  if (pattern.id.value >= next_pattern_id_) next_pattern_id_ = pattern.id.value + 1;
  const PatternId id = pattern.id;
  patterns_.emplace(id, std::move(pattern));
  after_mutation(true);
  return id;
}

void Repository::erase(PatternId id) {
  if (patterns_.erase(id) == 0) throw Error(ErrorCode::UnknownPattern, to_string(id));
  after_mutation(true);
}

void Repository::add_counts(PatternId id, std::uint64_t dr, std::uint64_t du, std::uint64_t ds) {
  const auto it = patterns_.find(id);
  if (it == patterns_.end()) throw Error(ErrorCode::UnknownPattern, to_string(id));
  auto& m = it->second.metadata;
  const std::uint64_t r = m.retrieval_count + dr;
  const std::uint64_t u = m.utilization_count + du;
  const std::uint64_t s = m.success_count + ds;
  if (!(s <= u && u <= r)) {
    throw Error(ErrorCode::InvariantViolation,
                "update would break 0 <= s <= u <= r for " + to_string(id));
  }
  m.retrieval_count = r;
  m.utilization_count = u;
  m.success_count = s;
  after_mutation(false);
}

void Repository::append_trajectory(TrajectoryRecord record) {
  DigestWriter w(trajectory_chain_);
  digest_into(w, record);
  trajectory_chain_ = w.value();
  trajectories_.push_back(std::move(record));
  after_mutation(false);
}

void Repository::advance_maintenance_schedule() {
  next_maintenance_threshold_ *= 2;
  last_maintenance_task_ = tasks_completed();
  after_mutation(false);
}

void Repository::restore_counters(std::int64_t next_maintenance_threshold,
                                  std::int64_t last_maintenance_task,
                                  std::uint64_t next_pattern_id) {
  next_maintenance_threshold_ = next_maintenance_threshold;
  last_maintenance_task_ = last_maintenance_task;
  if (next_pattern_id < next_pattern_id_) {
    throw Error(ErrorCode::InvariantViolation,
                "next_pattern_id " + std::to_string(next_pattern_id) + " is not above every id");
  }
  next_pattern_id_ = next_pattern_id;
  check_invariants();
}

const AuditEvent& Repository::record(AuditEventKind kind, nlohmann::json payload) {
  AuditEvent event;
  event.sequence_no = audit_.empty() ? 1 : audit_.back().sequence_no + 1;
  event.kind = kind;
  event.payload = std::move(payload);
  event.state_digest = state_digest();
  audit_.push_back(std::move(event));
  return audit_.back();
}

const AuditEvent& Repository::snapshot() {
  return record(AuditEventKind::Snapshot, Json::parse(serialize(*this)));
}

void Repository::check_invariants() const {
  const auto fail = [](const std::string& why) {
    throw Error(ErrorCode::InvariantViolation, why);
  };
  for (const auto& [id, p] : patterns_) {
    if (id != p.id) fail("pattern key " + to_string(id) + " holds " + to_string(p.id));
    if (id.value >= next_pattern_id_) fail(to_string(id) + " is not below next_pattern_id");
    validate(p);
    if (static_cast<std::size_t>(p.metadata.embedding.size()) != config_.embedding_dim ||
        !is_unit(p.metadata.embedding)) {
      fail(to_string(id) + " embedding is not a unit vector of the configured dimension");
    }
  }
  const auto t = next_maintenance_threshold_;
  if (t < kInitialMaintenanceThreshold || t % kInitialMaintenanceThreshold != 0 ||
      !std::has_single_bit(static_cast<std::uint64_t>(t / kInitialMaintenanceThreshold))) {
    fail("next_maintenance_threshold " + std::to_string(t) + " is not 10*2^m");
  }
  if (last_maintenance_task_ < -1 || last_maintenance_task_ > tasks_completed()) {
    fail("last_maintenance_task out of range");
  }
}

void Repository::after_mutation(bool pattern_set_changed) {
  if (pattern_set_changed) lexical_ = LexicalIndex(patterns_);
#ifdef PATTERNKIT_CHECK_INVARIANTS
  check_invariants();
#endif
}

Repository new_repository(const EngineConfig& config,
                          std::shared_ptr<const EmbeddingProvider> embedder) {
  validate(config);
  return Repository(config, std::move(embedder));
}

std::size_t seed_patterns(Repository& repo, std::vector<Pattern> patterns) {
  std::set<PatternId> seen;
  for (const auto& p : patterns) {
    if (p.id && (repo.contains(p.id) || !seen.insert(p.id).second)) {
      throw Error(ErrorCode::DuplicateId, to_string(p.id) + " already present");
    }
    validate(p);
  }
  const std::size_t count = patterns.size();
  Repository staged = repo;
  Json payload = Json::array();
  for (auto& p : patterns) {
    const PatternId id = staged.insert(std::move(p));
    payload.push_back(to_json(staged.at(id)));
  }
  staged.record(AuditEventKind::Seed, Json{{"patterns", std::move(payload)}});
  repo = std::move(staged);
  return count;
}

}  // namespace patternkit
