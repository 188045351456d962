#include "a2mae/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace a2mae::nn {

void AdamW::step(std::span<Parameter* const> params, double lr) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("AdamW: parameter list changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    if (p->grad.shape() != p->value.shape() || m_[k].shape() != p->value.shape()) {
      throw std::invalid_argument("AdamW: shape mismatch for parameter " + p->name);
    }
    for (double g : p->grad.data()) {
      if (!std::isfinite(g)) throw std::domain_error("AdamW: non-finite gradient in parameter " + p->name);
    }
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    const double decay = p->decay ? lr * cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->value[i] -= decay * p->value[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      p->value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, std::size_t warmup_steps) {
  if (warmup_steps >= total_steps) {
    throw std::invalid_argument("cosine_lr: warmup_steps must be smaller than total_steps");
  }
  if (step > total_steps) {
    throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total_steps) + "]");
  }
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace a2mae::nn
