#pragma once

#include <cstdint>
#include <vector>

#include "dialbench/tape.hpp"

namespace dialbench {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter Adam moments and a shared step counter. One state instance
/// belongs to one Parameters instance; shapes are fixed at construction.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const Parameters& params, AdamConfig cfg = {});

  /// Standard bias-corrected Adam update. Validates every gradient before
  /// touching anything, so a non-finite gradient leaves params unchanged.
  void step(Parameters& params, const std::vector<Tensor>& grads, double lr);

  std::uint64_t step_count() const { return step_; }
  const Tensor& first_moment(int slot) const { return m_[slot]; }
  const Tensor& second_moment(int slot) const { return v_[slot]; }
  const AdamConfig& config() const { return cfg_; }

  Tensor& mutable_first_moment(int slot) { return m_[slot]; }
  Tensor& mutable_second_moment(int slot) { return v_[slot]; }
  void set_step_count(std::uint64_t t) { step_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_ = 0;
};

}  // namespace dialbench
