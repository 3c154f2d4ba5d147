#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace patternkit {

// Shared by the embedder, the BM25 index and the default utilization matcher:
// ASCII case-folded, split on every byte that is not [0-9A-Za-z] or >= 0x80.
std::vector<std::string> tokenize(std::string_view text);

std::string_view trim(std::string_view text) noexcept;

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = kFnvOffset) noexcept {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

std::string to_hex(std::uint64_t value);
std::uint64_t from_hex(std::string_view text);

}  // namespace patternkit
