#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcdu/autodiff.hpp"
#include "pcdu/rng.hpp"

namespace pcdu {

enum class Mode { Train, Eval };
enum class Activation { None, Elu };

struct NamedParam {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Per-channel batch normalisation over the row dimension.
struct BatchNorm {
  Var gamma;
  Var beta;
  Tensor running_mean;
  Tensor running_var;
  Real momentum = Real(0.1);
  Real epsilon = Real(1e-5);

  explicit BatchNorm(std::size_t channels);
  std::size_t channels() const { return gamma.value().size(); }
};

/// Train mode normalises with batch statistics and updates the running
/// estimates (unbiased variance). A single-row batch has no usable variance,
/// so it is normalised with the running statistics and leaves them untouched.
/// Eval mode is a fixed affine map.
Var batch_norm(const Var& x, BatchNorm& bn, Mode mode);

/// Affine map applied independently to every row, optionally followed by
/// batch normalisation and ELU. Kernel-1 convolutions and fully connected
/// layers are both this.
struct Dense {
  Var weight;  // in × out
  Var bias;    // out
  std::optional<BatchNorm> bn;
  Activation activation = Activation::Elu;

  Dense(std::size_t in, std::size_t out, bool with_bn, Activation act, RngStream& init);
  Dense(Var weight, Var bias, std::optional<BatchNorm> bn, Activation act);

  std::size_t in_width() const { return weight.shape()[0]; }
  std::size_t out_width() const { return weight.shape()[1]; }

  Var forward(const Var& x, Mode mode);
  void collect(const std::string& prefix, std::vector<NamedParam>& params,
               std::vector<NamedBuffer>& buffers);
};

/// Shared per-point (kernel size 1) convolution.
Var pointwise_conv(const Var& x, Dense& layer, Mode mode);
/// Fully connected layer over batch rows.
Var linear(const Var& x, Dense& layer, Mode mode);

/// Stack of Dense layers. Hidden layers carry bn + ELU; the last one does too
/// unless `plain_output` is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool plain_output, RngStream& init);

  Var forward(const Var& x, Mode mode);
  std::size_t in_width() const;
  std::size_t out_width() const;
  std::size_t depth() const { return layers_.size(); }
  Dense& layer(std::size_t i) { return layers_.at(i); }

  /// Names layers "<prefix>.<stem><i>" for i = 1..depth.
  void collect(const std::string& prefix, const std::string& stem, std::vector<NamedParam>& params,
               std::vector<NamedBuffer>& buffers);

 private:
  std::vector<Dense> layers_;
};

/// Max relative error between the recorded gradient and central differences:
/// max over coordinates of |analytic − numeric| / max(1, |numeric|).
/// `loss` must rebuild the graph from the current parameter values on every call.
double grad_check(const std::function<Var()>& loss, const std::vector<Var>& params, double step = 1e-5);

}  // namespace pcdu
