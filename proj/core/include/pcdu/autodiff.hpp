#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcdu/tensor.hpp"

namespace pcdu {

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};
}  // namespace detail

/// Handle to a value on the recorded computation.
///
/// Leaves created with `parameter()` accumulate gradients across `backward`
/// calls until `zero_grad()`. Interior nodes keep their gradient only for the
/// duration of one backward sweep.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Mutable access for in-place parameter updates; never use on interior nodes.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool is_leaf() const noexcept { return node_ && node_->leaf; }
  /// Gradient of the last backward sweep(s); zeros when never touched.
  const Tensor& grad() const;
  void zero_grad();

  /// Scalar value of a one-element node.
  Real item() const;

  // Used by op implementations.
  static Var make(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);
  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse sweep from a one-element loss. Leaf gradients accumulate.
void backward(const Var& loss);

namespace ops {

/// x (r×k) · w (k×c).
Var matmul(const Var& x, const Var& w);
/// a (r×k) · bᵀ where b is (s×k).
Var matmul_nt(const Var& a, const Var& b);
/// Adds a length-c bias to every row of an r×c matrix.
Var add_bias(const Var& x, const Var& bias);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, Real factor);
/// ELU with α = 1.
Var elu(const Var& x);

struct SegmentMax {
  Var values;                        // segments × c
  std::vector<std::size_t> argmax;   // segments × c row indices into the input
};
/// Column-wise maximum over row ranges [offsets[s], offsets[s+1]).
/// Ties resolve to the lowest row index.
SegmentMax segment_max(const Var& x, std::span<const std::size_t> offsets);
/// Equal-size segments of `group` consecutive rows.
SegmentMax segment_max(const Var& x, std::size_t group);

Var gather_rows(const Var& x, std::span<const std::size_t> indices);
/// Each output row r is Σ_j weights[r*per_row+j] · x[indices[r*per_row+j]].
Var weighted_gather(const Var& x, std::span<const std::size_t> indices,
                    std::span<const Real> weights, std::size_t per_row);
Var concat_cols(const std::vector<Var>& parts);
/// Stacks matrices with equal column counts on top of each other.
Var concat_rows(const std::vector<Var>& parts);
/// Repeats row i of x `times` times consecutively.
Var repeat_rows(const Var& x, std::size_t times);

/// Divides each row by its Euclidean norm. Zero rows are rejected.
Var row_normalize(const Var& x);
/// Row-wise log-softmax. With `exclude_diagonal`, entry (i,i) is left out of
/// the normaliser and its output is set to 0 with no gradient.
Var log_softmax_rows(const Var& x, bool exclude_diagonal = false);
/// Mean over rows of x[r, columns[r]].
Var mean_pick(const Var& x, std::span<const std::size_t> columns);

Var sum(const Var& x);
Var mean(const Var& x);
Var sum_squares(const Var& x);

}  // namespace ops

}  // namespace pcdu
