#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcdu/layers.hpp"

namespace pcdu {

/// Adam with L2 weight decay. Coupled decay adds λθ to the gradient before
/// the moment updates; decoupled decay shrinks θ by lr·λ·θ after the step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  bool decoupled = false;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// One update of every parameter from its accumulated gradient. Throws
/// ValueError naming the parameter when a gradient is not finite.
void adam_step(const std::vector<NamedParam>& params, AdamState& state, double lr);

/// base_lr × 0.5^⌊epoch/10⌋.
double lr_at(std::size_t epoch, double base_lr = 1e-3);

void zero_grads(const std::vector<NamedParam>& params);

}  // namespace pcdu
