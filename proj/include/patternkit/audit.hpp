#pragma once

#include <json.hpp>

#include <cstdint>
#include <string_view>
#include <vector>

namespace patternkit {

enum class AuditEventKind { Seed, TaskFinished, Extraction, Maintenance, Snapshot };

std::string_view to_string(AuditEventKind kind) noexcept;
AuditEventKind parse_audit_kind(std::string_view text);

struct AuditEvent {
  std::uint64_t sequence_no = 0;
  AuditEventKind kind = AuditEventKind::Snapshot;
  nlohmann::json payload;
  std::uint64_t state_digest = 0;  // digest of the repository after the event
};

using AuditTrail = std::vector<AuditEvent>;

}  // namespace patternkit
