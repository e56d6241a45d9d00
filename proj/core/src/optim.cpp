#include "pcdu/optim.hpp"

#include <cmath>

#include "pcdu/errors.hpp"

namespace pcdu {

void adam_step(const std::vector<NamedParam>& params, AdamState& state, double lr) {
  for (const auto& p : params) {
    if (!all_finite(p.var.grad())) throw ValueError("adam_step: non-finite gradient for '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& p : params) {
    Var var = p.var;
    Tensor& theta = var.mutable_value();
    const Tensor& grad = var.grad();
    auto [m_it, m_new] = state.first_moment.try_emplace(p.name, theta.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(p.name, theta.shape());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (m.shape() != theta.shape() || v.shape() != theta.shape()) {
      throw DimensionError("adam_step", p.name, "optimizer state does not match parameter shape");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double g = grad[i];
      if (!state.decoupled) g += state.weight_decay * theta[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      double updated = theta[i] - lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
      if (state.decoupled) updated -= lr * state.weight_decay * theta[i];
      theta[i] = static_cast<Real>(updated);
    }
  }
}

double lr_at(std::size_t epoch, double base_lr) {
  return std::ldexp(base_lr, -static_cast<int>(epoch / 10));
}

void zero_grads(const std::vector<NamedParam>& params) {
  for (auto p : params) p.var.zero_grad();
}

}  // namespace pcdu
