#include "patternkit/persistence.hpp"
#include "patternkit/embedding.hpp"
#include "patternkit/error.hpp"
#include "patternkit/harness.hpp"
#include "patternkit/serialize.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace patternkit;
namespace fs = std::filesystem;

namespace {

// Recorded when the fixture was written; see tests/fixtures/.
constexpr std::uint64_t kGoldenDigest = 0xb1fd8e4e893bf4daULL;

fs::path fixture(const char* name) { return fs::path(PATTERNKIT_FIXTURE_DIR) / name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "patternkit_persistence_test";
  fs::create_directories(dir);
  return dir / name;
}

bool embeds(const EngineConfig& config, const std::string& text) {
  try {
    embed(*HashFeatureEmbedder::for_config(config), text);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Patterns plus some task history, a maintenance event and an extraction.
Repository busy_repository(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EngineConfig config;
  config.seed = seed % 5;
  config.similarity_threshold = 0.2;
  Repository repo = patternkit::testing::random_repository(seed, rng() % 30, config);
  const std::size_t tasks = rng() % 25;
  for (std::size_t i = 0; i < tasks; ++i) {
    const std::string id = "task-" + std::to_string(i + 1);
    // Two tokens can cancel into a zero embedding; draw again when they do.
    std::string text = patternkit::testing::random_text(rng, 2, 5);
    while (!embeds(config, text)) text = patternkit::testing::random_text(rng, 2, 5);
    ExecutionContext ctx = begin_task(repo, id, text);
    TrajectoryRecord t{id, ctx.task_description, {}, {}, {}, {}, rng() % 2 == 0};
    t.steps.push_back({patternkit::testing::random_text(rng, 1, 3), "ok"});
    finish_task(repo, ctx, t, TokenSubsequenceJudge{});
    if (extraction_due(repo, 10)) {
      PatternDraft d;
      d.description = "draft " + patternkit::testing::random_text(rng, 1, 3);
      d.context = patternkit::testing::random_text(rng, 2, 3);
      d.body = SkillBody::guideline("- " + patternkit::testing::random_text(rng, 2, 3));
      d.features.stateless_guidance = true;
      extract_and_install(repo, FixedExtractionProvider({d}));
    }
    if (maintenance_due(repo)) run_maintenance(repo, ScriptedMergeVerifier(0.85));
  }
  return repo;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) text.replace(at, from.size(), to);
  return text;
}

}  // namespace

TEST(Serialize, RoundTripIsDigestIdentical) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Repository repo = busy_repository(seed);
    const std::string text = serialize(repo);
    const Repository back = deserialize(text);
    ASSERT_EQ(back.state_digest(), repo.state_digest()) << "seed " << seed;
    ASSERT_EQ(serialize(back), text);
    EXPECT_EQ(back.size(), repo.size());
    EXPECT_EQ(back.tasks_completed(), repo.tasks_completed());
    EXPECT_EQ(back.next_maintenance_threshold(), repo.next_maintenance_threshold());
  }
}

TEST(Serialize, RepeatedSavesAreByteIdentical) {
  const Repository repo = busy_repository(99);
  const fs::path a = scratch("a.json"), b = scratch("b.json");
  const std::size_t n = save(repo, a);
  save(repo, b);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(n, read_file(a).size());
  EXPECT_EQ(load(a).state_digest(), repo.state_digest());
}

TEST(Serialize, LayoutConventions) {
  const std::string text = serialize(busy_repository(4));
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.find('\t'), std::string::npos);
  EXPECT_EQ(text.rfind("{\n  \"config\": {", 0), 0u);
  EXPECT_NE(text.find("\"format\": \"patternkit-repository\""), std::string::npos);
  EXPECT_NE(text.find("\"schema_version\": 1"), std::string::npos);
}

TEST(Serialize, RefusedWhileTaskOpen) {
  Repository repo = new_repository({});
  begin_task(repo, "t1", "hotel");
  try {
    serialize(repo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContextAlreadyOpen);
  }
}

TEST(Deserialize, VersionMismatchNamesBoth) {
  const std::string text =
      replace_once(serialize(busy_repository(1)), "\"schema_version\": 1", "\"schema_version\": 7");
  try {
    deserialize(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
    const std::string what = e.what();
    EXPECT_NE(what.find('7'), std::string::npos);
    EXPECT_NE(what.find('1'), std::string::npos);
  }
}

TEST(Deserialize, UtilizationAboveRetrievalNamesPattern) {
  Repository repo = new_repository({});
  seed_patterns(repo, {patternkit::testing::skill("a b", "c d", "- x", 2, 1, 0),
                       patternkit::testing::skill("e f", "g h", "- y", 2, 1, 1)});
  std::string text = serialize(repo);
  // Keys are sorted, so the second pattern's metadata follows its id.
  const auto second = text.find("\"id\": 2");
  ASSERT_NE(second, std::string::npos);
  const auto u = text.find("\"utilization_count\": 1", second);
  ASSERT_NE(u, std::string::npos);
  text.replace(u, std::string("\"utilization_count\": 1").size(), "\"utilization_count\": 5");
  try {
    deserialize(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvariantViolation);
    EXPECT_NE(std::string(e.what()).find("p2"), std::string::npos) << e.what();
  }
}

TEST(Deserialize, TruncatedFileReportsPosition) {
  const std::string text = serialize(busy_repository(2));
  try {
    deserialize(text.substr(0, text.size() / 2));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_GT(e.line(), 1u);
    EXPECT_GE(e.column(), 1u);
  }
}

TEST(Deserialize, PositionOfBadToken) {
  try {
    deserialize("{\n  \"config\": @\n}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 13u);
  }
}

TEST(Deserialize, WrongFormatTagRejected) {
  const std::string text = replace_once(serialize(busy_repository(3)), "\"patternkit-repository\"", "\"other\"");
  EXPECT_THROW(deserialize(text), Error);
}

TEST(Deserialize, TaskCountMustMatchTrajectories) {
  Repository repo = busy_repository(6);
  ASSERT_GT(repo.tasks_completed(), 0);
  const std::string count = "\"tasks_completed\": " + std::to_string(repo.tasks_completed());
  const std::string text = replace_once(serialize(repo), count, "\"tasks_completed\": 999");
  try {
    deserialize(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvariantViolation);
  }
}

TEST(Golden, FixtureLoadsToRecordedDigest) {
  const Repository repo = load(fixture("golden_repository.json"));
  EXPECT_EQ(repo.state_digest(), kGoldenDigest);
  EXPECT_EQ(repo.tasks_completed(), 20);
  // The writer still produces the fixture byte for byte.
  EXPECT_EQ(serialize(repo), read_file(fixture("golden_repository.json")));
}

TEST(Golden, AuditFixtureReplaysToRecordedDigest) {
  const AuditLog log = load_audit(fixture("golden_audit.jsonl"));
  EXPECT_EQ(replay(log), kGoldenDigest);
  EXPECT_EQ(serialize_audit(log), read_file(fixture("golden_audit.jsonl")));
  ASSERT_FALSE(log.events.empty());
  EXPECT_EQ(log.events.back().state_digest, kGoldenDigest);
}

TEST(Golden, SimulationStillProducesFixture) {
  ExperimentOptions o;
  o.seed = 3;
  o.tasks = 20;
  const ExperimentResult r = run_experiment({}, {}, o);
  EXPECT_EQ(r.final_digest, kGoldenDigest);
  EXPECT_EQ(serialize(r.repository), read_file(fixture("golden_repository.json")));
  EXPECT_EQ(serialize_audit(audit_log_of(r.repository)), read_file(fixture("golden_audit.jsonl")));
}

TEST(Io, MissingDirectoryIsIoFailure) {
  try {
    save(new_repository({}), "/nonexistent-dir/x/y.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
  try {
    load("/nonexistent-dir/none.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
}

TEST(Audit, SerializeParseRoundTrip) {
  const Repository repo = busy_repository(12);
  const AuditLog log = audit_log_of(repo);
  const std::string text = serialize_audit(log);
  const AuditLog back = parse_audit(text);
  EXPECT_EQ(back.config, log.config);
  ASSERT_EQ(back.events.size(), log.events.size());
  EXPECT_EQ(serialize_audit(back), text);
  for (std::size_t i = 0; i < back.events.size(); ++i) {
    EXPECT_EQ(back.events[i].sequence_no, i + 1);
    EXPECT_EQ(back.events[i].state_digest, log.events[i].state_digest);
  }
}

TEST(Audit, SequenceGapRejected) {
  const Repository repo = busy_repository(13);
  AuditLog log = audit_log_of(repo);
  ASSERT_GE(log.events.size(), 3u);
  log.events.erase(log.events.begin() + 1);
  EXPECT_THROW(parse_audit(serialize_audit(log)), Error);
}

TEST(Replay, EmptyLogGivesEmptyRepositoryDigest) {
  EngineConfig config;
  config.seed = 3;
  const Repository empty = new_repository(config);
  EXPECT_EQ(replay(AuditLog{config, {}}), empty.state_digest());
}

TEST(Replay, ManualHistoryReproducesDigestChain) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Repository repo = busy_repository(seed);
    const AuditLog log = parse_audit(serialize_audit(audit_log_of(repo)));
    const Repository rebuilt = replay_repository(log);
    EXPECT_EQ(rebuilt.state_digest(), repo.state_digest()) << seed;
    EXPECT_EQ(serialize(rebuilt), serialize(repo));
  }
}

TEST(Replay, SimulationLogsReproduceLiveDigest) {
  for (const bool maintenance : {true, false}) {
    for (std::uint64_t seed : {1u, 2u}) {
      Toggles t;
      t.maintenance_on = maintenance;
      ExperimentOptions o;
      o.seed = seed;
      o.tasks = 60;
      const ExperimentResult r = run_experiment({}, t, o);
      const AuditLog log = parse_audit(serialize_audit(audit_log_of(r.repository)));
      EXPECT_EQ(replay(log), r.final_digest);
    }
  }
}

TEST(Replay, TamperedPayloadDivergesAtThatEvent) {
  const Repository repo = busy_repository(21);
  AuditLog log = audit_log_of(repo);
  std::size_t target = log.events.size();
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    if (log.events[i].kind == AuditEventKind::TaskFinished) {
      target = i;
      break;
    }
  }
  ASSERT_LT(target, log.events.size());
  log.events[target].payload["trajectory"]["success"] =
      !log.events[target].payload["trajectory"]["success"].get<bool>();
  try {
    replay(log);
    FAIL();
  } catch (const DigestDivergence& e) {
    EXPECT_EQ(e.sequence_no(), log.events[target].sequence_no);
    EXPECT_EQ(e.expected(), log.events[target].state_digest);
    EXPECT_EQ(e.code(), ErrorCode::DigestDivergence);
  }
}

TEST(Replay, StartsFromLeadingSnapshot) {
  Repository repo = busy_repository(8);
  repo.snapshot();
  const std::uint64_t prefix = repo.audit().size() - 1;
  seed_patterns(repo, {patternkit::testing::skill("late arrival", "after snapshot", "- go")});
  AuditLog log = audit_log_of(repo);
  log.events.erase(log.events.begin(), log.events.begin() + static_cast<std::ptrdiff_t>(prefix));
  EXPECT_EQ(log.events.front().kind, AuditEventKind::Snapshot);
  EXPECT_EQ(replay(log), repo.state_digest());
}
