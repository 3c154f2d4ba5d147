#pragma once

#include "patternkit/repository.hpp"
#include "patternkit/types.hpp"

#include <random>
#include <string>
#include <vector>

namespace patternkit::testing {

inline Pattern skill(std::string description, std::string context, std::string guideline,
                     std::uint64_t r = 0, std::uint64_t u = 0, std::uint64_t s = 0) {
  Pattern p;
  p.kind = PatternKind::Skill;
  p.body = SkillBody::guideline(std::move(guideline));
  p.metadata.description = std::move(description);
  p.metadata.context = std::move(context);
  p.metadata.retrieval_count = r;
  p.metadata.utilization_count = u;
  p.metadata.success_count = s;
  return p;
}

inline Pattern code_skill(std::string description, std::string context, std::string usage) {
  Pattern p;
  p.kind = PatternKind::Skill;
  p.body = SkillBody::code("def run(x):\n    return x\n", "python", {"json"}, std::move(usage));
  p.metadata.description = std::move(description);
  p.metadata.context = std::move(context);
  return p;
}

inline Pattern subagent(std::string description, std::string context,
                        std::vector<std::string> phases) {
  Pattern p;
  p.kind = PatternKind::Subagent;
  SubagentBody body;
  body.system_prompt = "You coordinate " + description;
  for (auto& ph : phases) body.tool_declarations.push_back({std::move(ph), "phase"});
  body.input_contract = "request";
  body.output_contract = "outcome";
  p.body = std::move(body);
  p.metadata.description = std::move(description);
  p.metadata.context = std::move(context);
  return p;
}

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {
      "hotel", "flight", "budget", "museum", "train",  "visa",   "dinner", "route",
      "ticket", "city",  "beach",  "tour",   "cost",   "permit", "lunch",  "station",
      "room",  "hostel", "plan",   "day",    "guide",  "market", "bus",    "ferry"};
  return words;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
  const auto& words = word_pool();
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + words[pick(rng)];
  return out;
}

/// A pattern with random text, kind and consistent counters.
inline Pattern random_pattern(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<std::uint64_t> count(0, 40);
  Pattern p;
  const int shape = coin(rng);
  if (shape == 2) {
    p = subagent(random_text(rng, 2, 5), random_text(rng, 2, 6),
                 {"phase_" + random_text(rng, 1, 1), "phase_" + random_text(rng, 1, 1) + "_b"});
  } else if (shape == 1) {
    p = code_skill(random_text(rng, 2, 5), random_text(rng, 2, 6), random_text(rng, 1, 3));
  } else {
    p = skill(random_text(rng, 2, 5), random_text(rng, 2, 6), "- " + random_text(rng, 2, 4));
  }
  const std::uint64_t r = count(rng);
  const std::uint64_t u = r == 0 ? 0 : std::uniform_int_distribution<std::uint64_t>(0, r)(rng);
  const std::uint64_t s = u == 0 ? 0 : std::uniform_int_distribution<std::uint64_t>(0, u)(rng);
  p.metadata.retrieval_count = r;
  p.metadata.utilization_count = u;
  p.metadata.success_count = s;
  return p;
}

inline Repository random_repository(std::uint64_t seed, std::size_t n, EngineConfig config = {}) {
  std::mt19937_64 rng(seed);
  Repository repo = new_repository(config);
  std::vector<Pattern> patterns;
  for (std::size_t i = 0; i < n; ++i) patterns.push_back(random_pattern(rng));
  if (!patterns.empty()) seed_patterns(repo, std::move(patterns));
  return repo;
}

}  // namespace patternkit::testing
