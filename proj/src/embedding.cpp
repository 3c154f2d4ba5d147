#include "patternkit/embedding.hpp"

#include "patternkit/text.hpp"


namespace patternkit {

namespace {

std::uint64_t salted_offset(std::uint64_t salt) {
  std::uint64_t state = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    state ^= (salt >> (8 * i)) & 0xffU;
    state *= kFnvPrime;
  }
  return state;
}

}  // namespace

HashFeatureEmbedder::HashFeatureEmbedder(std::size_t dimension, std::uint64_t salt)
    : dimension_(dimension), salt_(salt) {
  if (dimension_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding_dim must be >= 1");
}

std::shared_ptr<const HashFeatureEmbedder> HashFeatureEmbedder::for_config(
    const EngineConfig& config) {
  return std::make_shared<const HashFeatureEmbedder>(config.embedding_dim, config.seed);
}

Embedding HashFeatureEmbedder::embed(std::string_view text) const {
  Embedding v = Embedding::Zero(static_cast<Eigen::Index>(dimension_));
  const std::uint64_t offset = salted_offset(salt_);
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = fnv1a(token, offset);
    const auto bucket = static_cast<Eigen::Index>(h % dimension_);
    v[bucket] += ((h >> 32) & 1U) ? -1.0 : 1.0;
  }
  const double n = v.norm();
  if (n == 0.0) {
    throw Error(ErrorCode::ZeroVector, "text hashes to the zero vector: '" + std::string(text) + "'");
  }
  return v / n;
}

Embedding embed(const EmbeddingProvider& provider, std::string_view text) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyText, "cannot embed blank text");
  Embedding v = provider.embed(text);
  if (static_cast<std::size_t>(v.size()) != provider.dimension()) {
    throw Error(ErrorCode::DimensionMismatch,
                "provider returned " + std::to_string(v.size()) + " components, declared " +
                    std::to_string(provider.dimension()));
  }
  if (!is_unit(v)) {
    throw Error(ErrorCode::InvariantViolation, "provider returned a non-unit embedding");
  }
  return v;
}

}  // namespace patternkit
