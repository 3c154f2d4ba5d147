#pragma once

// JSON mapping of the domain types plus the canonical text writer and the
// binary digest encoder. See docs/FORMAT.md for the on-disk layout.

#include "patternkit/extraction.hpp"
#include "patternkit/lifecycle.hpp"
#include "patternkit/text.hpp"
#include "patternkit/tracking.hpp"
#include "patternkit/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace patternkit {

using Json = nlohmann::json;

/// Sorted keys, reals as %.17g. Pretty mode indents objects by two spaces and
/// keeps arrays of scalars on one line; compact mode emits no whitespace.
std::string canonical_dump(const Json& value, bool pretty);

Json to_json(const EngineConfig& config);
EngineConfig config_from_json(const Json& j);

Json to_json(const PatternBody& body);
PatternBody body_from_json(const Json& j);

/// `include_embedding = false` omits "embedding" (pattern seed files may too).
Json to_json(const Pattern& pattern, bool include_embedding = true);
Pattern pattern_from_json(const Json& j);

Json to_json(const TrajectoryRecord& record);
TrajectoryRecord trajectory_from_json(const Json& j);

Json to_json(const ClassificationFeatures& features);
ClassificationFeatures features_from_json(const Json& j);

Json to_json(const PatternDraft& draft);
PatternDraft draft_from_json(const Json& j);

Json to_json(const MergeVerdict& verdict);
MergeVerdict verdict_from_json(const Json& j);

Json to_json(const MaintenanceReport& report);
MaintenanceReport report_from_json(const Json& j);

Json to_json(const UtilizationSummary& summary);
UtilizationSummary summary_from_json(const Json& j);

/// FNV-1a over a length-prefixed little-endian binary encoding.
class DigestWriter {
 public:
  explicit DigestWriter(std::uint64_t state = kFnvOffset) : state_(state) {}

  DigestWriter& u64(std::uint64_t v);
  DigestWriter& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  DigestWriter& f64(double v);
  DigestWriter& boolean(bool v) { return u64(v ? 1 : 0); }
  DigestWriter& str(std::string_view s);

  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

void digest_into(DigestWriter& w, const EngineConfig& config);
void digest_into(DigestWriter& w, const PatternBody& body);
void digest_into(DigestWriter& w, const Pattern& pattern);
void digest_into(DigestWriter& w, const TrajectoryRecord& record);

}  // namespace patternkit
