#include "pcdu/layers.hpp"

#include <cmath>

#include "pcdu/errors.hpp"

namespace pcdu {

using detail::Node;

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Var::parameter(Tensor({channels}, Real(1)))),
      beta(Var::parameter(Tensor({channels}, Real(0)))),
      running_mean({channels}, Real(0)),
      running_var({channels}, Real(1)) {}

namespace {

Var batch_norm_fixed(const Var& x, const BatchNorm& bn) {
  const std::size_t rows = x.rows();
  const std::size_t c = x.cols();
  std::vector<Real> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = Real(1) / std::sqrt(bn.running_var[j] + bn.epsilon);
  Tensor xhat({rows, c});
  Tensor out({rows, c});
  const Real* g = bn.gamma.value().data();
  const Real* b = bn.beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real h = (x.value()(r, j) - bn.running_mean[j]) * inv_std[j];
      xhat(r, j) = h;
      out(r, j) = g[j] * h + b[j];
    }
  }
  return Var::make(std::move(out), {x, bn.gamma, bn.beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     Node& xs = *self.inputs[0];
                     Node& gs = *self.inputs[1];
                     Node& bs = *self.inputs[2];
                     const std::size_t rows = self.grad.rows();
                     const std::size_t c = self.grad.cols();
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (std::size_t j = 0; j < c; ++j) {
                         const Real dy = self.grad(r, j);
                         if (xs.requires_grad) xs.grad_buffer()(r, j) += dy * gs.value[j] * inv_std[j];
                         if (gs.requires_grad) gs.grad_buffer()[j] += dy * xhat(r, j);
                         if (bs.requires_grad) bs.grad_buffer()[j] += dy;
                       }
                     }
                   });
}

}  // namespace

Var batch_norm(const Var& x, BatchNorm& bn, Mode mode) {
  if (x.shape().size() != 2 || x.cols() != bn.channels()) {
    throw DimensionError("batch_norm", "x",
                         shape_string(x.shape()) + " for " + std::to_string(bn.channels()) + " channels");
  }
  const std::size_t rows = x.rows();
  if (mode == Mode::Eval || rows < 2) return batch_norm_fixed(x, bn);

  const std::size_t c = x.cols();
  std::vector<Real> mean(c, Real(0));
  std::vector<Real> var(c, Real(0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) mean[j] += x.value()(r, j);
  }
  for (auto& m : mean) m /= static_cast<Real>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real d = x.value()(r, j) - mean[j];
      var[j] += d * d;
    }
  }
  std::vector<Real> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) {
    const Real biased = var[j] / static_cast<Real>(rows);
    const Real unbiased = var[j] / static_cast<Real>(rows - 1);
    inv_std[j] = Real(1) / std::sqrt(biased + bn.epsilon);
    bn.running_mean[j] = (Real(1) - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
    bn.running_var[j] = (Real(1) - bn.momentum) * bn.running_var[j] + bn.momentum * unbiased;
  }

  Tensor xhat({rows, c});
  Tensor out({rows, c});
  const Real* g = bn.gamma.value().data();
  const Real* b = bn.beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real h = (x.value()(r, j) - mean[j]) * inv_std[j];
      xhat(r, j) = h;
      out(r, j) = g[j] * h + b[j];
    }
  }
  return Var::make(std::move(out), {x, bn.gamma, bn.beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     Node& xs = *self.inputs[0];
                     Node& gs = *self.inputs[1];
                     Node& bs = *self.inputs[2];
                     const std::size_t rows = self.grad.rows();
                     const std::size_t c = self.grad.cols();
                     std::vector<Real> sum_dy(c, Real(0));
                     std::vector<Real> sum_dy_xhat(c, Real(0));
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (std::size_t j = 0; j < c; ++j) {
                         sum_dy[j] += self.grad(r, j);
                         sum_dy_xhat[j] += self.grad(r, j) * xhat(r, j);
                       }
                     }
                     if (gs.requires_grad) {
                       for (std::size_t j = 0; j < c; ++j) gs.grad_buffer()[j] += sum_dy_xhat[j];
                     }
                     if (bs.requires_grad) {
                       for (std::size_t j = 0; j < c; ++j) bs.grad_buffer()[j] += sum_dy[j];
                     }
                     if (xs.requires_grad) {
                       Tensor& gx = xs.grad_buffer();
                       const Real n = static_cast<Real>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < c; ++j) {
                           gx(r, j) += gs.value[j] * inv_std[j] *
                                       (self.grad(r, j) - sum_dy[j] / n - xhat(r, j) * sum_dy_xhat[j] / n);
                         }
                       }
                     }
                   });
}

Dense::Dense(std::size_t in, std::size_t out, bool with_bn, Activation act, RngStream& init)
    : activation(act) {
  if (in == 0 || out == 0) throw DimensionError("Dense", "widths", "zero-width layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w({in, out});
  for (auto& v : w.values()) v = static_cast<Real>(init.uniform(-bound, bound));
  Tensor b({out});
  for (auto& v : b.values()) v = static_cast<Real>(init.uniform(-bound, bound));
  weight = Var::parameter(std::move(w));
  bias = Var::parameter(std::move(b));
  if (with_bn) bn.emplace(out);
}

Dense::Dense(Var w, Var b, std::optional<BatchNorm> norm, Activation act)
    : weight(std::move(w)), bias(std::move(b)), bn(std::move(norm)), activation(act) {
  if (weight.shape().size() != 2) throw DimensionError("Dense", "weights", "expected a matrix");
  if (bias.value().size() != weight.shape()[1]) throw DimensionError("Dense", "bias", "width mismatch");
  if (bn && bn->channels() != weight.shape()[1]) throw DimensionError("Dense", "bn", "width mismatch");
}

Var Dense::forward(const Var& x, Mode mode) {
  if (x.shape().size() != 2 || x.cols() != in_width()) {
    throw DimensionError("dense", "x",
                         shape_string(x.shape()) + " does not feed " + std::to_string(in_width()) + " inputs");
  }
  Var y = ops::add_bias(ops::matmul(x, weight), bias);
  if (bn) y = batch_norm(y, *bn, mode);
  if (activation == Activation::Elu) y = ops::elu(y);
  return y;
}

void Dense::collect(const std::string& prefix, std::vector<NamedParam>& params,
                    std::vector<NamedBuffer>& buffers) {
  params.push_back({prefix + ".weight", weight});
  params.push_back({prefix + ".bias", bias});
  if (bn) {
    params.push_back({prefix + ".gamma", bn->gamma});
    params.push_back({prefix + ".beta", bn->beta});
    buffers.push_back({prefix + ".running_mean", &bn->running_mean});
    buffers.push_back({prefix + ".running_var", &bn->running_var});
  }
}

Var pointwise_conv(const Var& x, Dense& layer, Mode mode) { return layer.forward(x, mode); }
Var linear(const Var& x, Dense& layer, Mode mode) { return layer.forward(x, mode); }

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& widths, bool plain_output, RngStream& init) {
  if (widths.empty()) throw DimensionError("Mlp", "widths", "no layers");
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    const bool plain = last && plain_output;
    layers_.emplace_back(prev, widths[i], !plain, plain ? Activation::None : Activation::Elu, init);
    prev = widths[i];
  }
}

Var Mlp::forward(const Var& x, Mode mode) {
  Var y = x;
  for (auto& layer : layers_) y = layer.forward(y, mode);
  return y;
}

std::size_t Mlp::in_width() const { return layers_.empty() ? 0 : layers_.front().in_width(); }
std::size_t Mlp::out_width() const { return layers_.empty() ? 0 : layers_.back().out_width(); }

void Mlp::collect(const std::string& prefix, const std::string& stem, std::vector<NamedParam>& params,
                  std::vector<NamedBuffer>& buffers) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + "." + stem + std::to_string(i + 1), params, buffers);
  }
}

double grad_check(const std::function<Var()>& loss, const std::vector<Var>& params, double step) {
  for (auto p : params) p.zero_grad();
  Var l = loss();
  if (!std::isfinite(static_cast<double>(l.item()))) throw ValueError("grad_check: non-finite loss");
  backward(l);

  double worst = 0.0;
  for (auto p : params) {
    const Tensor analytic = p.grad();
    Tensor& values = p.mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = static_cast<Real>(saved + step);
      const double up = loss().item();
      values[i] = static_cast<Real>(saved - step);
      const double down = loss().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw ValueError("grad_check: non-finite loss");
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(static_cast<double>(analytic[i]) - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace pcdu
