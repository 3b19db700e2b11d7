#include "rlinrl/optim.hpp"

#include <cmath>

#include "rlinrl/kernels.hpp"

namespace rlinrl {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.v.size(), 0.0f);
    v_.emplace_back(p->value.v.size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
  const float lr_t = cfg_.lr * std::sqrt(bc2) / bc1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    if (!p->trainable) continue;
    kern::adam_step(p->value.data(), p->grad.data(), m_[i].data(), v_[i].data(),
                    p->value.v.size(), lr_t, cfg_.beta1, cfg_.beta2, cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

float clip_grad_norm(const std::vector<Param*>& params, float max_norm) {
  double sq = 0.0;
  for (const Param* p : params) {
    if (!p->trainable) continue;
    sq += kern::dot(p->grad.data(), p->grad.data(), p->grad.v.size());
  }
  float norm = static_cast<float>(std::sqrt(sq));
  if (norm > max_norm && norm > 0.0f) {
    float s = max_norm / norm;
    for (Param* p : params) {
      if (!p->trainable) continue;
      kern::scale(s, p->grad.data(), p->grad.v.size());
    }
  }
  return norm;
}

}  // namespace rlinrl
