#include "pcdu/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pcdu/errors.hpp"

namespace pcdu {

void EmbeddingBatch::validate() const {
  if (!z.defined() || z.shape().size() != 2) throw ValueError("embedding batch: expected a 2N x dz matrix");
  if (z.rows() < 2 || z.rows() % 2 != 0) {
    throw ValueError("embedding batch: row count must be even and >= 2, got " + std::to_string(z.rows()));
  }
  if (!(tau > 0.0)) throw ValueError("embedding batch: temperature must be positive");
  for (std::size_t r = 0; r < z.rows(); ++r) {
    bool nonzero = false;
    for (Real v : z.value().row(r)) nonzero = nonzero || v != Real(0);
    if (!nonzero) throw ValueError("embedding batch: row " + std::to_string(r) + " has zero norm");
  }
}

double cosine_similarity(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity", "z_j", std::to_string(b.size()) + " vs " + std::to_string(a.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw ValueError("cosine_similarity: zero-norm input");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double pair_probability(const Tensor& z, std::size_t i, std::size_t j) {
  const std::size_t rows = z.rows();
  if (i >= rows || j >= rows) throw ValueError("pair_probability: row index out of range");
  if (i == j) throw ValueError("pair_probability: i and j must differ");
  std::vector<double> s(rows);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < rows; ++k) {
    if (k == i) continue;
    s[k] = cosine_similarity(z.row(i), z.row(k));
    m = std::max(m, s[k]);
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (k != i) denom += std::exp(s[k] - m);
  }
  return std::exp(s[j] - m) / denom;
}

Var ntxent_loss(const EmbeddingBatch& batch) {
  batch.validate();
  const std::size_t rows = batch.z.rows();
  Var unit = ops::row_normalize(batch.z);
  Var logits = ops::scale(ops::matmul_nt(unit, unit), static_cast<Real>(1.0 / batch.tau));
  Var log_prob = ops::log_softmax_rows(logits, /*exclude_diagonal=*/true);
  std::vector<std::size_t> partner(rows);
  for (std::size_t i = 0; i < rows; ++i) partner[i] = positive_partner(i);
  return ops::scale(ops::mean_pick(log_prob, partner), Real(-1));
}

double ntxent_loss(const Tensor& z, double tau) { return ntxent_loss(EmbeddingBatch{Var(z), tau}).item(); }

}  // namespace pcdu
