#pragma once

#include "patternkit/error.hpp"
#include "patternkit/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string_view>

namespace patternkit {

/// Text embedding contract: embed() returns a unit-L2 vector of dimension(),
/// is deterministic, and is safe to call concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Signed feature hashing over tokens: each token adds ±1 to one bucket.
class HashFeatureEmbedder final : public EmbeddingProvider {
 public:
  explicit HashFeatureEmbedder(std::size_t dimension = 64, std::uint64_t salt = 0);

  static std::shared_ptr<const HashFeatureEmbedder> for_config(const EngineConfig& config);

  std::size_t dimension() const override { return dimension_; }
  std::uint64_t salt() const noexcept { return salt_; }
  Embedding embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::uint64_t salt_;
};

/// Checked entry point: rejects blank text and verifies the provider's
/// dimension/normalization contract.
Embedding embed(const EmbeddingProvider& provider, std::string_view text);

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with sizes " +
                                                  std::to_string(a.size()) + " and " +
                                                  std::to_string(b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) {
    throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  }
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Cosine matrix between the columns of two matrices.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> cosine_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine_matrix row mismatch");
  }
  const auto na = a.colwise().norm().eval();
  const auto nb = b.colwise().norm().eval();
  if ((na.array() == 0).any() || (nb.array() == 0).any()) {
    throw Error(ErrorCode::ZeroVector, "cosine_matrix with a zero column");
  }
  auto out = (a.transpose() * b).eval();
  out.array().colwise() /= na.transpose().array();
  out.array().rowwise() /= nb.array();
  return out.cwiseMax(-1).cwiseMin(1);
}

inline constexpr double kUnitNormTolerance = 1e-9;

template <typename Derived>
bool is_unit(const Eigen::MatrixBase<Derived>& v,
             typename Derived::Scalar tolerance = kUnitNormTolerance) {
  using std::abs;
  return abs(v.norm() - typename Derived::Scalar(1)) <= tolerance;
}

}  // namespace patternkit
