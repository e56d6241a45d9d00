#include "pcdu/downstream.hpp"

#include <cmath>

#include "pcdu/errors.hpp"

namespace pcdu {

namespace {
Mlp build_head(std::size_t in, std::vector<std::size_t> widths, std::size_t classes, std::uint64_t seed, Task task) {
  widths.push_back(classes);
  RngStream rng(seed, task == Task::Classification ? "init.head.cls" : "init.head.seg");
  return Mlp(in, widths, true, rng);
}
}  // namespace

DownstreamHead::DownstreamHead(Task task, std::size_t input_width, const std::vector<std::size_t>& hidden_widths,
                               std::size_t classes, std::uint64_t seed)
    : task_(task), mlp_(build_head(input_width, hidden_widths, classes, seed, task)) {
  if (classes < 2) throw ConfigError("downstream head: at least two classes are required");
}

DownstreamHead DownstreamHead::for_model(const ModelConfig& config, std::uint64_t seed) {
  return DownstreamHead(config.task, config.head_input_width(), config.head_hidden_widths, config.num_classes, seed);
}

Var DownstreamHead::forward(const Var& x, Mode mode) {
  if (x.shape().size() != 2 || x.cols() != input_width()) {
    throw DimensionError(task_ == Task::Classification ? "classify" : "segment", "input",
                         shape_string(x.shape()) + " does not match head input width " +
                             std::to_string(input_width()));
  }
  return mlp_.forward(x, mode);
}

std::vector<NamedParam> DownstreamHead::parameters() {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
  const bool cls = task_ == Task::Classification;
  mlp_.collect(cls ? "head.cls" : "head.seg", cls ? "fc" : "conv", params, buffers);
  return params;
}

std::vector<NamedBuffer> DownstreamHead::buffers() {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
  const bool cls = task_ == Task::Classification;
  mlp_.collect(cls ? "head.cls" : "head.seg", cls ? "fc" : "conv", params, buffers);
  return buffers;
}

Var classify(const Var& h_concat, DownstreamHead& head, Mode mode) {
  if (head.task() != Task::Classification) throw ValueError("classify: head was built for segmentation");
  return head.forward(h_concat, mode);
}

Var segment(const Var& per_point_concat, DownstreamHead& head, Mode mode) {
  if (head.task() != Task::Segmentation) throw ValueError("segment: head was built for classification");
  return head.forward(per_point_concat, mode);
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> labels) {
  if (labels.size() != logits.rows()) {
    throw DimensionError("cross_entropy", "labels",
                         std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows()) + " rows");
  }
  std::vector<std::size_t> picks(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols()) {
      throw ValueError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
    picks[i] = static_cast<std::size_t>(labels[i]);
  }
  return ops::scale(ops::mean_pick(ops::log_softmax_rows(logits), picks), Real(-1));
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    Real m = row[0];
    for (Real v : row) m = std::max(m, v);
    Real total = 0;
    for (Real& v : row) {
      v = std::exp(v - m);
      total += v;
    }
    for (Real& v : row) v /= total;
  }
  return out;
}

std::vector<std::int32_t> argmax_rows(const Tensor& logits) {
  std::vector<std::int32_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[r] = static_cast<std::int32_t>(best);
  }
  return out;
}

}  // namespace pcdu
