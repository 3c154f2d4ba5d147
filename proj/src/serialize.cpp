#include "patternkit/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <set>

namespace patternkit {

// -- canonical text ---------------------------------------------------------

namespace {

void format_real(double v, std::string& out) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvariantViolation, "non-finite real in document");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

bool is_scalar(const Json& v) { return !v.is_array() && !v.is_object(); }

void dump_value(const Json& v, bool pretty, int indent, std::string& out) {
  switch (v.type()) {
    case Json::value_t::null: out += "null"; return;
    case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; return;
    case Json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); return;
    case Json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); return;
    case Json::value_t::number_float: format_real(v.get<double>(), out); return;
    case Json::value_t::string: out += v.dump(); return;
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      const bool inline_array =
          !pretty || std::all_of(v.begin(), v.end(), [](const Json& e) { return is_scalar(e); });
      if (inline_array) {
        out.push_back('[');
        bool first = true;
        for (const auto& e : v) {
          if (!first) out += pretty ? ", " : ",";
          first = false;
          dump_value(e, pretty, indent, out);
        }
        out.push_back(']');
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += ",\n";
        first = false;
        out.append(static_cast<std::size_t>(indent + 2), ' ');
        dump_value(e, pretty, indent + 2, out);
      }
      out.push_back('\n');
      out.append(static_cast<std::size_t>(indent), ' ');
      out.push_back(']');
      return;
    }
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += pretty ? "{\n" : "{";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += pretty ? ",\n" : ",";
        first = false;
        if (pretty) out.append(static_cast<std::size_t>(indent + 2), ' ');
        out += Json(it.key()).dump();
        out += pretty ? ": " : ":";
        dump_value(it.value(), pretty, indent + 2, out);
      }
      if (pretty) {
        out.push_back('\n');
        out.append(static_cast<std::size_t>(indent), ' ');
      }
      out.push_back('}');
      return;
    }
    default: throw Error(ErrorCode::InvariantViolation, "unsupported JSON value in document");
  }
}

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::ParseError, what);
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) schema_error(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    schema_error(std::string("field '") + key + "': " + e.what());
  }
}

std::string str(const Json& j, const char* key) { return get<std::string>(j, key); }

std::vector<std::string> strings(const Json& j, const char* key) {
  return get<std::vector<std::string>>(j, key);
}

double real(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number()) schema_error(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

std::uint64_t unsigned_int(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    schema_error(std::string("field '") + key + "' is not a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

std::string canonical_dump(const Json& value, bool pretty) {
  std::string out;
  dump_value(value, pretty, 0, out);
  if (pretty) out.push_back('\n');
  return out;
}

// -- config -----------------------------------------------------------------

Json to_json(const EngineConfig& c) {
  return Json{{"bm25_b", c.bm25_b},
              {"bm25_k1", c.bm25_k1},
              {"embedding_dim", c.embedding_dim},
              {"epsilon", c.epsilon},
              {"extraction_batch", c.extraction_batch},
              {"hybrid_retrieval", c.hybrid_retrieval},
              {"match_threshold", c.match_threshold},
              {"merge_threshold", c.merge_threshold},
              {"mmr_enabled", c.mmr_enabled},
              {"mmr_lambda", c.mmr_lambda},
              {"mmr_pool_factor", c.mmr_pool_factor},
              {"prune_fraction", c.prune_fraction},
              {"query_count", c.query_count},
              {"retrieval_k", c.retrieval_k},
              {"rrf_constant", c.rrf_constant},
              {"seed", c.seed},
              {"similarity_threshold", c.similarity_threshold}};
}

EngineConfig config_from_json(const Json& j) {
  if (!j.is_object()) schema_error("config must be an object");
  static const std::set<std::string> known = {
      "bm25_b",       "bm25_k1",        "embedding_dim", "epsilon",        "extraction_batch",
      "hybrid_retrieval", "match_threshold", "merge_threshold", "mmr_enabled", "mmr_lambda",
      "mmr_pool_factor", "prune_fraction", "query_count",  "retrieval_k",    "rrf_constant",
      "seed",         "similarity_threshold"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) schema_error("unknown config field '" + it.key() + "'");
  }
  EngineConfig c;
  const auto opt_real = [&](const char* key, double& out) {
    if (j.contains(key)) out = real(j, key);
  };
  const auto opt_size = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = static_cast<std::size_t>(unsigned_int(j, key));
  };
  const auto opt_bool = [&](const char* key, bool& out) {
    if (j.contains(key)) out = get<bool>(j, key);
  };
  opt_real("bm25_b", c.bm25_b);
  opt_real("bm25_k1", c.bm25_k1);
  opt_size("embedding_dim", c.embedding_dim);
  opt_real("epsilon", c.epsilon);
  opt_size("extraction_batch", c.extraction_batch);
  opt_bool("hybrid_retrieval", c.hybrid_retrieval);
  opt_real("match_threshold", c.match_threshold);
  opt_real("merge_threshold", c.merge_threshold);
  opt_bool("mmr_enabled", c.mmr_enabled);
  opt_real("mmr_lambda", c.mmr_lambda);
  opt_size("mmr_pool_factor", c.mmr_pool_factor);
  opt_real("prune_fraction", c.prune_fraction);
  opt_size("query_count", c.query_count);
  opt_size("retrieval_k", c.retrieval_k);
  opt_real("rrf_constant", c.rrf_constant);
  if (j.contains("seed")) c.seed = unsigned_int(j, "seed");
  opt_real("similarity_threshold", c.similarity_threshold);
  return c;
}

// -- patterns ---------------------------------------------------------------

Json to_json(const PatternBody& body) {
  if (const auto* s = std::get_if<SkillBody>(&body)) {
    if (s->form == SkillForm::Guideline) {
      return Json{{"type", "skill"}, {"form", "guideline"}, {"guideline_text", s->guideline_text}};
    }
    return Json{{"type", "skill"},
                {"form", "code"},
                {"code_snippet", s->code_snippet},
                {"code_language_tag", s->code_language_tag},
                {"dependencies", s->dependencies},
                {"usage_hint", s->usage_hint}};
  }
  const auto& a = std::get<SubagentBody>(body);
  Json tools = Json::array();
  for (const auto& t : a.tool_declarations) tools.push_back({{"name", t.name}, {"purpose", t.purpose}});
  Json rules = Json::array();
  for (const auto& r : a.delegation_rules) rules.push_back({{"peer", r.peer}, {"condition", r.condition}});
  return Json{{"type", "subagent"},
              {"system_prompt", a.system_prompt},
              {"tool_declarations", std::move(tools)},
              {"input_contract", a.input_contract},
              {"output_contract", a.output_contract},
              {"delegation_rules", std::move(rules)}};
}

PatternBody body_from_json(const Json& j) {
  const std::string type = str(j, "type");
  if (type == "skill") {
    const std::string form = str(j, "form");
    if (form == "guideline") return SkillBody::guideline(str(j, "guideline_text"));
    if (form == "code") {
      return SkillBody::code(str(j, "code_snippet"), str(j, "code_language_tag"),
                             strings(j, "dependencies"), str(j, "usage_hint"));
    }
    schema_error("unknown skill form '" + form + "'");
  }
  if (type != "subagent") schema_error("unknown body type '" + type + "'");
  SubagentBody a;
  a.system_prompt = str(j, "system_prompt");
  for (const auto& t : field(j, "tool_declarations")) {
    a.tool_declarations.push_back({str(t, "name"), str(t, "purpose")});
  }
  a.input_contract = str(j, "input_contract");
  a.output_contract = str(j, "output_contract");
  for (const auto& r : field(j, "delegation_rules")) {
    a.delegation_rules.push_back({str(r, "peer"), str(r, "condition")});
  }
  return a;
}

Json to_json(const Pattern& p, bool include_embedding) {
  Json meta{{"description", p.metadata.description},
            {"context", p.metadata.context},
            {"retrieval_count", p.metadata.retrieval_count},
            {"utilization_count", p.metadata.utilization_count},
            {"success_count", p.metadata.success_count}};
  if (include_embedding) {
    Json e = Json::array();
    for (Eigen::Index i = 0; i < p.metadata.embedding.size(); ++i) e.push_back(p.metadata.embedding[i]);
    meta["embedding"] = std::move(e);
  }
  return Json{{"id", p.id.value},
              {"kind", to_string(p.kind)},
              {"body", to_json(p.body)},
              {"metadata", std::move(meta)},
              {"created_at_task", p.created_at_task}};
}

Pattern pattern_from_json(const Json& j) {
  Pattern p;
  p.id = PatternId{j.contains("id") ? unsigned_int(j, "id") : 0};
  try {
    p.kind = parse_kind(str(j, "kind"));
  } catch (const Error& e) {
    schema_error(e.what());
  }
  p.body = body_from_json(field(j, "body"));
  const Json& m = field(j, "metadata");
  p.metadata.description = str(m, "description");
  p.metadata.context = str(m, "context");
  p.metadata.retrieval_count = m.contains("retrieval_count") ? unsigned_int(m, "retrieval_count") : 0;
  p.metadata.utilization_count =
      m.contains("utilization_count") ? unsigned_int(m, "utilization_count") : 0;
  p.metadata.success_count = m.contains("success_count") ? unsigned_int(m, "success_count") : 0;
  if (m.contains("embedding")) {
    const Json& e = field(m, "embedding");
    if (!e.is_array()) schema_error("embedding must be an array");
    p.metadata.embedding.resize(static_cast<Eigen::Index>(e.size()));
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!e[i].is_number()) schema_error("embedding holds a non-number");
      p.metadata.embedding[static_cast<Eigen::Index>(i)] = e[i].get<double>();
    }
  }
  p.created_at_task = j.contains("created_at_task") ? get<std::int64_t>(j, "created_at_task") : 0;
  return p;
}

// -- trajectories -----------------------------------------------------------

Json to_json(const TrajectoryRecord& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back({{"action", s.action}, {"observation", s.observation}});
  Json calls = Json::array();
  for (const auto& c : t.tool_calls) calls.push_back({{"tool", c.tool}, {"args_digest", c.args_digest}});
  Json injected = Json::array();
  for (const auto id : t.injected_pattern_ids) injected.push_back(id.value);
  return Json{{"task_id", t.task_id},
              {"task_description", t.task_description},
              {"steps", std::move(steps)},
              {"tool_calls", std::move(calls)},
              {"subagent_calls", t.subagent_calls},
              {"injected_pattern_ids", std::move(injected)},
              {"success", t.success}};
}

TrajectoryRecord trajectory_from_json(const Json& j) {
  TrajectoryRecord t;
  t.task_id = str(j, "task_id");
  t.task_description = str(j, "task_description");
  for (const auto& s : field(j, "steps")) t.steps.push_back({str(s, "action"), str(s, "observation")});
  for (const auto& c : field(j, "tool_calls")) t.tool_calls.push_back({str(c, "tool"), str(c, "args_digest")});
  t.subagent_calls = strings(j, "subagent_calls");
  for (const auto& id : field(j, "injected_pattern_ids")) {
    if (!id.is_number_unsigned()) schema_error("injected_pattern_ids holds a non-id");
    t.injected_pattern_ids.push_back(PatternId{id.get<std::uint64_t>()});
  }
  t.success = get<bool>(j, "success");
  return t;
}

// -- extraction -------------------------------------------------------------

Json to_json(const ClassificationFeatures& f) {
  return Json{{"sustained_memory", f.sustained_memory},
              {"independent_reasoning", f.independent_reasoning},
              {"subtask_encapsulation", f.subtask_encapsulation},
              {"stateless_guidance", f.stateless_guidance},
              {"step_count", f.step_count},
              {"decision_points", f.decision_points},
              {"tool_count", f.tool_count},
              {"stateful", f.stateful}};
}

ClassificationFeatures features_from_json(const Json& j) {
  ClassificationFeatures f;
  f.sustained_memory = get<bool>(j, "sustained_memory");
  f.independent_reasoning = get<bool>(j, "independent_reasoning");
  f.subtask_encapsulation = get<bool>(j, "subtask_encapsulation");
  f.stateless_guidance = get<bool>(j, "stateless_guidance");
  f.step_count = static_cast<std::uint32_t>(unsigned_int(j, "step_count"));
  f.decision_points = static_cast<std::uint32_t>(unsigned_int(j, "decision_points"));
  f.tool_count = static_cast<std::uint32_t>(unsigned_int(j, "tool_count"));
  f.stateful = get<bool>(j, "stateful");
  return f;
}

Json to_json(const PatternDraft& d) {
  Json j{{"description", d.description},
         {"context", d.context},
         {"body", to_json(d.body)},
         {"features", to_json(d.features)}};
  if (d.pinned_kind) j["pinned_kind"] = to_string(*d.pinned_kind);
  return j;
}

PatternDraft draft_from_json(const Json& j) {
  PatternDraft d;
  d.description = str(j, "description");
  d.context = str(j, "context");
  d.body = body_from_json(field(j, "body"));
  d.features = features_from_json(field(j, "features"));
  if (j.contains("pinned_kind")) d.pinned_kind = parse_kind(str(j, "pinned_kind"));
  return d;
}

// -- lifecycle --------------------------------------------------------------

Json to_json(const MergeVerdict& v) {
  Json j{{"accepted", v.accepted},
         {"description", v.description},
         {"context", v.context},
         {"reason", v.reason}};
  if (v.body) j["body"] = to_json(*v.body);
  return j;
}

MergeVerdict verdict_from_json(const Json& j) {
  MergeVerdict v;
  v.accepted = get<bool>(j, "accepted");
  v.description = str(j, "description");
  v.context = str(j, "context");
  v.reason = str(j, "reason");
  if (j.contains("body")) v.body = body_from_json(field(j, "body"));
  return v;
}

Json to_json(const MaintenanceReport& r) {
  Json scored = Json::array();
  for (const auto& [id, s] : r.scored) scored.push_back(Json::array({id.value, s}));
  Json pruned = Json::array();
  for (const auto id : r.pruned_ids) pruned.push_back(id.value);
  Json merges = Json::array();
  for (const auto& m : r.merges) {
    Json absorbed = Json::array();
    for (const auto id : m.absorbed_ids) absorbed.push_back(id.value);
    merges.push_back({{"absorbed_ids", std::move(absorbed)}, {"new_id", m.new_id.value}});
  }
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"pair", Json::array({v.pair.first.value, v.pair.second.value})},
                        {"similarity", v.similarity},
                        {"verdict", to_json(v.verdict)}});
  }
  return Json{{"task_index", r.task_index},   {"scored", std::move(scored)},
              {"pruned_ids", std::move(pruned)}, {"merges", std::move(merges)},
              {"size_before", r.size_before}, {"size_after", r.size_after},
              {"verdicts", std::move(verdicts)}};
}

MaintenanceReport report_from_json(const Json& j) {
  MaintenanceReport r;
  r.task_index = get<std::int64_t>(j, "task_index");
  for (const auto& s : field(j, "scored")) {
    r.scored.emplace_back(PatternId{s.at(0).get<std::uint64_t>()}, s.at(1).get<double>());
  }
  for (const auto& id : field(j, "pruned_ids")) r.pruned_ids.push_back(PatternId{id.get<std::uint64_t>()});
  for (const auto& m : field(j, "merges")) {
    MergeRecord rec;
    for (const auto& id : field(m, "absorbed_ids")) rec.absorbed_ids.push_back(PatternId{id.get<std::uint64_t>()});
    rec.new_id = PatternId{unsigned_int(m, "new_id")};
    r.merges.push_back(std::move(rec));
  }
  r.size_before = static_cast<std::size_t>(unsigned_int(j, "size_before"));
  r.size_after = static_cast<std::size_t>(unsigned_int(j, "size_after"));
  for (const auto& v : field(j, "verdicts")) {
    const Json& pair = field(v, "pair");
    r.verdicts.push_back({{PatternId{pair.at(0).get<std::uint64_t>()},
                           PatternId{pair.at(1).get<std::uint64_t>()}},
                          real(v, "similarity"),
                          verdict_from_json(field(v, "verdict"))});
  }
  return r;
}

// -- tracking ---------------------------------------------------------------

Json to_json(const UtilizationSummary& s) {
  Json patterns = Json::array();
  for (const auto& p : s.patterns) {
    patterns.push_back({{"pattern_id", p.pattern_id.value},
                        {"alpha", p.alpha},
                        {"utilized", p.utilized},
                        {"success_credited", p.success_credited}});
  }
  return Json{{"task_id", s.task_id},
              {"task_index", s.task_index},
              {"patterns", std::move(patterns)},
              {"beta_util", s.beta_util},
              {"success", s.success}};
}

UtilizationSummary summary_from_json(const Json& j) {
  UtilizationSummary s;
  s.task_id = str(j, "task_id");
  s.task_index = get<std::int64_t>(j, "task_index");
  for (const auto& p : field(j, "patterns")) {
    s.patterns.push_back({PatternId{unsigned_int(p, "pattern_id")}, real(p, "alpha"),
                          get<bool>(p, "utilized"), get<bool>(p, "success_credited")});
  }
  s.beta_util = real(j, "beta_util");
  s.success = get<bool>(j, "success");
  return s;
}

// -- digest -----------------------------------------------------------------

DigestWriter& DigestWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (v >> (8 * i)) & 0xffU;
    state_ *= kFnvPrime;
  }
  return *this;
}

DigestWriter& DigestWriter::f64(double v) {
  if (v == 0.0) v = 0.0;  // -0.0 and 0.0 serialize alike
  return u64(std::bit_cast<std::uint64_t>(v));
}

DigestWriter& DigestWriter::str(std::string_view s) {
  u64(s.size());
  state_ = fnv1a(s, state_);
  return *this;
}

void digest_into(DigestWriter& w, const EngineConfig& c) {
  w.u64(c.retrieval_k).f64(c.similarity_threshold).f64(c.mmr_lambda).u64(c.extraction_batch);
  w.f64(c.prune_fraction).f64(c.merge_threshold).f64(c.epsilon).f64(c.match_threshold);
  w.u64(c.embedding_dim).f64(c.rrf_constant).f64(c.bm25_k1).f64(c.bm25_b).u64(c.seed);
  w.u64(c.query_count).boolean(c.hybrid_retrieval).boolean(c.mmr_enabled).u64(c.mmr_pool_factor);
}

void digest_into(DigestWriter& w, const PatternBody& body) {
  if (const auto* s = std::get_if<SkillBody>(&body)) {
    w.u64(0).u64(s->form == SkillForm::Guideline ? 0 : 1).str(s->guideline_text);
    w.str(s->code_snippet).str(s->code_language_tag).u64(s->dependencies.size());
    for (const auto& d : s->dependencies) w.str(d);
    w.str(s->usage_hint);
    return;
  }
  const auto& a = std::get<SubagentBody>(body);
  w.u64(1).str(a.system_prompt).u64(a.tool_declarations.size());
  for (const auto& t : a.tool_declarations) w.str(t.name).str(t.purpose);
  w.str(a.input_contract).str(a.output_contract).u64(a.delegation_rules.size());
  for (const auto& r : a.delegation_rules) w.str(r.peer).str(r.condition);
}

void digest_into(DigestWriter& w, const Pattern& p) {
  w.u64(p.id.value).u64(p.kind == PatternKind::Skill ? 0 : 1);
  digest_into(w, p.body);
  const auto& m = p.metadata;
  w.str(m.description).str(m.context);
  w.u64(m.retrieval_count).u64(m.utilization_count).u64(m.success_count);
  w.u64(static_cast<std::uint64_t>(m.embedding.size()));
  for (Eigen::Index i = 0; i < m.embedding.size(); ++i) w.f64(m.embedding[i]);
  w.i64(p.created_at_task);
}

void digest_into(DigestWriter& w, const TrajectoryRecord& t) {
  w.str(t.task_id).str(t.task_description).u64(t.steps.size());
  for (const auto& s : t.steps) w.str(s.action).str(s.observation);
  w.u64(t.tool_calls.size());
  for (const auto& c : t.tool_calls) w.str(c.tool).str(c.args_digest);
  w.u64(t.subagent_calls.size());
  for (const auto& c : t.subagent_calls) w.str(c);
  w.u64(t.injected_pattern_ids.size());
  for (const auto id : t.injected_pattern_ids) w.u64(id.value);
  w.boolean(t.success);
}

}  // namespace patternkit
