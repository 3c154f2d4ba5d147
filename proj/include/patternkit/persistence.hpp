#pragma once

#include "patternkit/audit.hpp"
#include "patternkit/embedding.hpp"
#include "patternkit/repository.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace patternkit {

inline constexpr std::string_view kRepositoryFormat = "patternkit-repository";
inline constexpr std::string_view kAuditFormat = "patternkit-audit";

/// Canonical repository document; identical states give identical bytes.
std::string serialize(const Repository& repo);

/// Parses and re-validates every invariant. Throws ParseError (with line and
/// column), Error(VersionMismatch) or Error(InvariantViolation).
Repository deserialize(std::string_view text,
                       std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

/// Returns the number of bytes written. Throws Error(IoFailure).
std::size_t save(const Repository& repo, const std::filesystem::path& path);
Repository load(const std::filesystem::path& path,
                std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

/// JSON Lines: a header line with the config, then one event per line.
struct AuditLog {
  EngineConfig config;
  AuditTrail events;
};

AuditLog audit_log_of(const Repository& repo);
std::string serialize_audit(const AuditLog& log);
AuditLog parse_audit(std::string_view text);
std::size_t save_audit(const Repository& repo, const std::filesystem::path& path);
AuditLog load_audit(const std::filesystem::path& path);

/// Re-executes every event against a fresh repository (or the leading
/// snapshot) using replay doubles for the recorded provider outputs, checking
/// the digest after each one. Returns the final digest; throws
/// DigestDivergence at the first mismatching sequence number.
std::uint64_t replay(const AuditLog& log,
                     std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

/// Same as replay() but also hands back the rebuilt repository.
Repository replay_repository(const AuditLog& log,
                             std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace patternkit
