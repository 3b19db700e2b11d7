#pragma once

#include <cstdint>
#include <vector>

#include "rlinrl/tensor.hpp"

namespace rlinrl {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adaptive-moment optimizer over a fixed set of parameters. Deterministic:
// identical grads and state give identical updates.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);

  void step();       // applies p.grad to trainable params
  void zero_grad();
  std::int64_t step_count() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  std::vector<Param*> params_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t t_ = 0;
  AdamConfig cfg_;
};

// Scales grads in place so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
float clip_grad_norm(const std::vector<Param*>& params, float max_norm);

}  // namespace rlinrl
