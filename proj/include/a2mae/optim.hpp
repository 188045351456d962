#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "a2mae/autodiff.hpp"

namespace a2mae::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled-weight-decay Adam. Moments are allocated on the first step and
// must keep matching the parameter shapes afterwards.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update using each parameter's accumulated grad. Decay applies
  // only to parameters flagged `decay`. Throws std::domain_error on a
  // non-finite gradient, leaving every parameter untouched.
  void step(std::span<Parameter* const> params, double lr);
  void step(std::span<Parameter* const> params) { step(params, cfg_.lr); }

  std::size_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Linear warmup to base_lr, then half-cycle cosine decay to 0 at total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, std::size_t warmup_steps);

}  // namespace a2mae::nn
