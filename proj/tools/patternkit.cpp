// patternkit command-line front end. See docs/CLI.md.

#include "patternkit/harness.hpp"
#include "patternkit/persistence.hpp"
#include "patternkit/serialize.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace patternkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalidConfig = 2;
constexpr int kExitBandViolation = 3;

fs::path audit_path(const fs::path& repo) {
  fs::path p = repo;
  p += ".audit.jsonl";
  return p;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

EngineConfig build_config(const std::string& config_file, const std::vector<std::string>& overrides) {
  Json j = to_json(EngineConfig{});
  if (!config_file.empty()) {
    const Json file = Json::parse(read_file(config_file), nullptr, false);
    if (!file.is_object()) throw Error(ErrorCode::InvalidConfig, config_file + " is not a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) j[it.key()] = it.value();
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + o + "'");
    }
    const std::string key = o.substr(0, eq);
    const std::string value = o.substr(eq + 1);
    Json parsed = Json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() ? Json(value) : parsed;
  }
  EngineConfig c;
  try {
    c = config_from_json(j);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  validate(c);
  return c;
}

void persist(const Repository& repo, const fs::path& path) {
  save(repo, path);
  save_audit(repo, audit_path(path));
}

Repository open_repository(const fs::path& path) {
  Repository repo = load(path);
  const fs::path audit = audit_path(path);
  if (fs::exists(audit)) repo.restore_audit(load_audit(audit).events);
  return repo;
}

std::vector<Pattern> read_patterns(const fs::path& path) {
  const Json j = Json::parse(read_file(path));
  const Json& list = j.is_object() && j.contains("patterns") ? j["patterns"] : j;
  if (!list.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": expected a pattern array");
  std::vector<Pattern> out;
  for (const auto& p : list) out.push_back(pattern_from_json(p));
  return out;
}

void print_pattern_table(const Repository& repo) {
  std::cout << "id\tkind\tr\tu\ts\tscore\tdescription\n";
  for (const auto& [id, p] : repo.patterns()) {
    const auto& m = p.metadata;
    std::cout << id.value << '\t' << to_string(p.kind) << '\t' << m.retrieval_count << '\t'
              << m.utilization_count << '\t' << m.success_count << '\t'
              << fmt(utility_score(m, repo.config().epsilon)) << '\t' << m.description << '\n';
  }
}

bool parse_switch(const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw Error(ErrorCode::InvalidConfig, "toggle value must be on or off, got '" + text + "'");
}

Toggles parse_toggles(const std::vector<std::string>& items) {
  Toggles t;
  const std::map<std::string, bool Toggles::*> names = {
      {"maintenance", &Toggles::maintenance_on},   {"batch_extraction", &Toggles::batch_extraction_on},
      {"subagents", &Toggles::subagents_on},       {"pruning", &Toggles::pruning_on},
      {"extraction", &Toggles::extraction_on}};
  for (const auto& item : items) {
    const auto eq = item.find('=');
    const std::string name = item.substr(0, eq);
    const auto it = names.find(name);
    if (it == names.end()) throw Error(ErrorCode::InvalidConfig, "unknown toggle '" + name + "'");
    t.*(it->second) = eq == std::string::npos ? true : parse_switch(item.substr(eq + 1));
  }
  return t;
}

void write_output(const std::string& target, const std::string& text) {
  if (target == "-") {
    std::cout << text;
  } else {
    write_file(target, text);
  }
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> values;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::InvalidConfig, "bad sweep value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patternkit: experience-pattern repository engine"};
  app.require_subcommand(1);

  std::string repo_file = "patternkit.json";
  app.add_option("-r,--repo", repo_file, "Repository file")->capture_default_str();

  std::function<int()> action;

  // init
  auto* init = app.add_subcommand("init", "Create an empty repository");
  std::string config_file;
  std::vector<std::string> overrides;
  bool overwrite = false;
  init->add_option("--config", config_file, "JSON object of config fields");
  init->add_option("--set", overrides, "Override one config field (key=value)");
  init->add_flag("--force", overwrite, "Overwrite an existing repository");
  init->callback([&] {
    action = [&] {
      const EngineConfig config = build_config(config_file, overrides);
      if (fs::exists(repo_file) && !overwrite) {
        throw Error(ErrorCode::IoFailure, repo_file + " exists (use --force)");
      }
      const Repository repo = new_repository(config);
      persist(repo, repo_file);
      std::cout << "initialized " << repo_file << '\n';
      return kExitOk;
    };
  });

  // seed
  auto* seed = app.add_subcommand("seed", "Insert patterns from a JSON file");
  std::string seed_file;
  seed->add_option("file", seed_file, "Pattern array (or {\"patterns\": [...]})")->required();
  seed->callback([&] {
    action = [&] {
      Repository repo = open_repository(repo_file);
      const std::size_t n = seed_patterns(repo, read_patterns(seed_file));
      persist(repo, repo_file);
      std::cout << "seeded " << n << " patterns\n";
      return kExitOk;
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Execute one task against the repository");
  std::string task_text, task_id, trajectory_file, drafts_file;
  run->add_option("--task", task_text, "Task description")->required();
  run->add_option("--id", task_id, "Task id (default: task-<n>)");
  run->add_option("--trajectory", trajectory_file, "Trajectory JSON produced by the agent")->required();
  run->add_option("--drafts", drafts_file, "Draft array installed if extraction falls due");
  run->callback([&] {
    action = [&] {
      Repository repo = open_repository(repo_file);
      if (task_id.empty()) task_id = "task-" + std::to_string(repo.tasks_completed() + 1);
      ExecutionContext ctx = begin_task(repo, task_id, task_text);
      Json tj = Json::parse(read_file(trajectory_file));
      tj["task_id"] = task_id;
      if (!tj.contains("task_description")) tj["task_description"] = task_text;
      for (const char* key : {"steps", "tool_calls", "subagent_calls", "injected_pattern_ids"}) {
        if (!tj.contains(key)) tj[key] = Json::array();
      }
      const UtilizationSummary summary =
          finish_task(repo, ctx, trajectory_from_json(tj), TokenSubsequenceJudge{});
      std::cout << "task " << task_id << " retrieved " << ctx.retrieved.size() << " beta_util "
                << fmt(summary.beta_util) << '\n';
      for (const auto& p : summary.patterns) {
        std::cout << "  " << to_string(p.pattern_id) << " alpha " << fmt(p.alpha)
                  << (p.utilized ? " utilized" : "") << '\n';
      }
      if (extraction_due(repo, repo.config().extraction_batch)) {
        if (drafts_file.empty()) {
          std::cout << "extraction due; no --drafts given, skipped\n";
        } else {
          std::vector<PatternDraft> drafts;
          for (const auto& d : Json::parse(read_file(drafts_file))) drafts.push_back(draft_from_json(d));
          const auto r = extract_and_install(repo, FixedExtractionProvider(std::move(drafts)));
          std::cout << "extraction installed " << r.installed.size() << " dropped " << r.dropped.size()
                    << (r.provider_failed ? " (provider failed: " + r.failure + ")" : "") << '\n';
        }
      }
      if (maintenance_due(repo)) {
        const auto report = run_maintenance(repo, ScriptedMergeVerifier(repo.config().merge_threshold));
        std::cout << "maintenance pruned " << report.pruned_ids.size() << " merged "
                  << report.merges.size() << " size " << report.size_after << '\n';
      }
      persist(repo, repo_file);
      return kExitOk;
    };
  });

  // maintain
  auto* maintain = app.add_subcommand("maintain", "Run a maintenance event");
  bool force = false, print_report = false, no_prune = false;
  maintain->add_flag("--force", force, "Run even when not due");
  maintain->add_flag("--report", print_report, "Print the maintenance report as JSON");
  maintain->add_flag("--no-prune", no_prune, "Skip the pruning step");
  maintain->callback([&] {
    action = [&] {
      Repository repo = open_repository(repo_file);
      if (!force && !maintenance_due(repo)) {
        std::cout << "maintenance not due (" << repo.tasks_completed() << " of "
                  << repo.next_maintenance_threshold() << " tasks)\n";
        return kExitOk;
      }
      const auto report = run_maintenance(repo, ScriptedMergeVerifier(repo.config().merge_threshold),
                                          {.force = force, .prune_enabled = !no_prune});
      persist(repo, repo_file);
      if (print_report) {
        std::cout << canonical_dump(to_json(report), true);
      } else {
        std::cout << "size " << report.size_before << " -> " << report.size_after << '\n';
      }
      return kExitOk;
    };
  });

  // inspect
  auto* inspect = app.add_subcommand("inspect", "List patterns or preview retrieval");
  std::string query;
  std::uint64_t inspect_id = 0;
  inspect->add_option("--query", query, "Show what a task would retrieve (no counters change)");
  inspect->add_option("--id", inspect_id, "Print one pattern as JSON");
  inspect->callback([&] {
    action = [&] {
      const Repository repo = open_repository(repo_file);
      if (inspect_id != 0) {
        std::cout << canonical_dump(to_json(repo.at(PatternId{inspect_id}), false), true);
        return kExitOk;
      }
      if (query.empty()) {
        print_pattern_table(repo);
        return kExitOk;
      }
      const TaskQuery q = prepare_query(repo, query, ScriptedQueryGenerator{});
      std::cout << "rank\tid\trelevance\tdescription\n";
      std::size_t rank = 0;
      for (const auto& pick : select_patterns(repo, q)) {
        std::cout << ++rank << '\t' << pick.pattern_id.value << '\t' << fmt(pick.relevance) << '\t'
                  << repo.at(pick.pattern_id).metadata.description << '\n';
      }
      return kExitOk;
    };
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run the synthetic-task simulation");
  std::vector<std::string> toggles;
  std::uint64_t sim_seed = 7;
  std::size_t sim_tasks = 180;
  std::string csv_out, audit_out, sim_repo_out;
  bool check = false;
  simulate->add_option("--toggle", toggles, "name=on|off; names: maintenance, batch_extraction, "
                                            "subagents, pruning, extraction");
  simulate->add_option("--seed", sim_seed, "Simulation seed")->capture_default_str();
  simulate->add_option("--tasks", sim_tasks, "Number of tasks")->capture_default_str();
  simulate->add_option("--config", config_file, "JSON object of config fields");
  simulate->add_option("--set", overrides, "Override one config field (key=value)");
  simulate->add_option("--csv", csv_out, "Write the time series CSV here ('-' for stdout)");
  simulate->add_option("--audit", audit_out, "Write the run's audit log here");
  simulate->add_option("--save", sim_repo_out, "Write the final repository here");
  simulate->add_flag("--check", check, "Check the maintenance ablation bands (exit 3 on violation)");
  simulate->callback([&] {
    action = [&] {
      const EngineConfig config = build_config(config_file, overrides);
      ExperimentOptions options;
      options.seed = sim_seed;
      options.tasks = sim_tasks;
      if (check) {
        const DynamicsCheck c = check_dynamics(config, options);
        std::cout << "size_on " << c.size_on << "\nsize_off " << c.size_off << "\nutilization_on "
                  << fmt(c.utilization_on) << "\nutilization_off " << fmt(c.utilization_off) << '\n';
        std::cout << (c.size_ok ? "PASS" : "FAIL") << " size_off >= 3 * size_on\n";
        std::cout << (c.utilization_ok ? "PASS" : "FAIL")
                  << " utilization_off <= 0.15 and utilization_on >= 0.5\n";
        return c.ok() ? kExitOk : kExitBandViolation;
      }
      const ExperimentResult r = run_experiment(config, parse_toggles(toggles), options);
      if (!csv_out.empty()) write_output(csv_out, to_csv(r.series));
      if (!audit_out.empty()) write_file(audit_out, serialize_audit(audit_log_of(r.repository)));
      if (!sim_repo_out.empty()) save(r.repository, sim_repo_out);
      if (csv_out != "-") {
        std::cout << "tasks " << r.series.rows.size() << "\nfinal_repo_size " << r.final_size
                  << "\nfinal_utilization_ratio " << fmt(r.final_utilization)
                  << "\nfinal_success_rate " << fmt(r.final_success_rate)
                  << "\noverall_success_rate " << fmt(r.overall_success_rate)
                  << "\npatterns_installed " << r.patterns_installed << "\nextraction_events "
                  << r.extraction_tasks.size() << "\nmaintenance_tasks";
        for (const auto t : r.maintenance_tasks) std::cout << ' ' << t;
        std::cout << "\ndigest " << to_hex(r.final_digest) << '\n';
      }
      return kExitOk;
    };
  });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "One simulation per parameter value");
  std::string param, values;
  std::string sweep_out = "-";
  sweep_cmd->add_option("--param", param, "K, alpha, k or theta")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--seed", sim_seed, "Simulation seed")->capture_default_str();
  sweep_cmd->add_option("--tasks", sim_tasks, "Tasks per run")->capture_default_str();
  sweep_cmd->add_option("--config", config_file, "JSON object of config fields");
  sweep_cmd->add_option("--set", overrides, "Override one config field (key=value)");
  sweep_cmd->add_option("--out", sweep_out, "CSV destination ('-' for stdout)")->capture_default_str();
  sweep_cmd->callback([&] {
    action = [&] {
      const EngineConfig config = build_config(config_file, overrides);
      const SweepParameter p = parse_sweep_parameter(param);
      ExperimentOptions options;
      options.seed = sim_seed;
      options.tasks = sim_tasks;
      write_output(sweep_out, sweep_csv(p, sweep(config, p, parse_values(values), {}, options)));
      return kExitOk;
    };
  });

  // report
  auto* report = app.add_subcommand("report", "Summaries of a stored repository");
  bool as_csv = false, as_summary = false;
  auto* csv_flag = report->add_flag("--csv", as_csv, "Per-task utilization CSV from the audit log");
  report->add_flag("--summary", as_summary, "Repository summary")->excludes(csv_flag);
  report->callback([&] {
    action = [&] {
      const Repository repo = open_repository(repo_file);
      if (as_csv) {
        std::vector<UtilizationSummary> summaries;
        for (const auto& e : repo.audit()) {
          if (e.kind != AuditEventKind::TaskFinished) continue;
          UtilizationSummary s;
          const TrajectoryRecord t = trajectory_from_json(e.payload.at("trajectory"));
          s.task_id = t.task_id;
          s.success = t.success;
          for (const auto& a : e.payload.at("alphas")) {
            PatternUtilization pu;
            pu.pattern_id = PatternId{a.at(0).get<std::uint64_t>()};
            pu.alpha = a.at(1).get<double>();
            pu.utilized = pu.alpha > repo.config().match_threshold;
            pu.success_credited = pu.utilized && s.success;
            s.patterns.push_back(pu);
          }
          summaries.push_back(std::move(s));
        }
        std::cout << utilization_csv(summaries);
        return kExitOk;
      }
      std::size_t skills = 0, subagents = 0;
      for (const auto& [id, p] : repo.patterns()) (p.kind == PatternKind::Skill ? skills : subagents)++;
      std::cout << "patterns " << repo.size() << "\nskills " << skills << "\nsubagents " << subagents
                << "\ntasks_completed " << repo.tasks_completed() << "\nnext_maintenance_at "
                << repo.next_maintenance_threshold() << "\nmean_utilization_ratio "
                << fmt(mean_utilization_ratio(repo)) << "\naudit_events " << repo.audit().size()
                << "\ndigest " << to_hex(repo.state_digest()) << '\n';
      return kExitOk;
    };
  });

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Re-execute an audit log and compare digests");
  std::string replay_file;
  replay_cmd->add_option("--audit", replay_file, "Audit log (default: <repo>.audit.jsonl)");
  replay_cmd->callback([&] {
    action = [&] {
      const fs::path log_path = replay_file.empty() ? audit_path(repo_file) : fs::path(replay_file);
      const AuditLog log = load_audit(log_path);
      const std::uint64_t digest = replay(log);
      std::cout << "replayed " << log.events.size() << " events, digest " << to_hex(digest) << '\n';
      if (replay_file.empty() && fs::exists(repo_file)) {
        const std::uint64_t stored = load(repo_file).state_digest();
        if (stored != digest) {
          std::cout << "repository digest " << to_hex(stored) << " differs\n";
          return kExitFailure;
        }
        std::cout << "matches " << repo_file << '\n';
      }
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidConfig ? kExitInvalidConfig : kExitFailure;
  }
  try {
    return action ? action() : kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidConfig ? kExitInvalidConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
