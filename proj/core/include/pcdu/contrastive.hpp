#pragma once

#include <cstddef>
#include <span>

#include "pcdu/autodiff.hpp"

namespace pcdu {

inline constexpr double kDefaultTemperature = 0.5;

/// 2N projected embeddings; rows 2k and 2k+1 (0-based) are positive pair k.
struct EmbeddingBatch {
  Var z;
  double tau = kDefaultTemperature;

  std::size_t pairs() const { return z.rows() / 2; }
  /// Throws ValueError unless the row count is even and >= 2, every row has
  /// non-zero norm and tau > 0.
  void validate() const;
};

/// Partner row of `i` in the (2k, 2k+1) pairing.
constexpr std::size_t positive_partner(std::size_t i) noexcept { return i ^ std::size_t{1}; }

double cosine_similarity(std::span<const Real> a, std::span<const Real> b);

/// exp(s_ij) / Σ_{k≠i} exp(s_ik) without temperature. Diagnostic only.
double pair_probability(const Tensor& z, std::size_t i, std::size_t j);

/// NT-Xent: mean over all 2N anchors of
/// −log[ exp(s_{i,p(i)}/τ) / Σ_{k≠i} exp(s_{i,k}/τ) ].
Var ntxent_loss(const EmbeddingBatch& batch);
double ntxent_loss(const Tensor& z, double tau = kDefaultTemperature);

}  // namespace pcdu
