#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdu/layers.hpp"
#include "pcdu/model_config.hpp"

namespace pcdu {

/// Supervised head over frozen representations: linear stages for
/// classification ("head.cls.fcN"), per-point convolutions for segmentation
/// ("head.seg.convN"). bn + ELU on every stage except the output.
class DownstreamHead {
 public:
  DownstreamHead(Task task, std::size_t input_width, const std::vector<std::size_t>& hidden_widths,
                 std::size_t classes, std::uint64_t seed);
  DownstreamHead(const DownstreamHead&) = delete;
  DownstreamHead& operator=(const DownstreamHead&) = delete;
  DownstreamHead(DownstreamHead&&) = default;

  static DownstreamHead for_model(const ModelConfig& config, std::uint64_t seed);

  Task task() const { return task_; }
  std::size_t input_width() const { return mlp_.in_width(); }
  std::size_t classes() const { return mlp_.out_width(); }

  Var forward(const Var& x, Mode mode);
  std::vector<NamedParam> parameters();
  std::vector<NamedBuffer> buffers();

 private:
  Task task_;
  Mlp mlp_;
};

/// B × 2h concatenated pooled representations → B × a logits.
Var classify(const Var& h_concat, DownstreamHead& head, Mode mode);
/// (Σn) × 4h concatenated per-point representations → (Σn) × m logits.
Var segment(const Var& per_point_concat, DownstreamHead& head, Mode mode);

/// Mean over rows of −log softmax(logits)[label].
Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels);

Tensor softmax_rows(const Tensor& logits);
std::vector<std::int32_t> argmax_rows(const Tensor& logits);

}  // namespace pcdu
