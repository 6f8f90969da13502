#pragma once

#include <vector>

#include "dialbench/tensor.hpp"

namespace dialbench {

/// One dialogue turn as seen by a learner: belief state, the summary action
/// taken, the immediate reward, and the successor belief. `head_mask` marks
/// which bootstrap heads train on this transition (empty means all of them).
struct Transition {
  Tensor belief;
  int action = 0;
  double reward = 0.0;
  Tensor next_belief;
  bool terminal = false;
  std::vector<double> head_mask;
};

/// A minibatch of transitions. Loss functions require a validated batch.
struct Batch {
  std::vector<Transition> items;

  int size() const { return static_cast<int>(items.size()); }

  /// Throws ConfigError/ShapeError/NumericError unless the batch is usable:
  /// non-empty, consistent belief dimensions, finite rewards, in-range
  /// actions, and (when heads > 1) 0/1 masks of length `heads`.
  void validate(int num_actions, int heads = 1) const;
};

/// Beliefs stacked into a (batch x dim) matrix, in batch order.
Tensor stack_beliefs(const Batch& batch);
Tensor stack_next_beliefs(const Batch& batch);
std::vector<int> actions_of(const Batch& batch);

}  // namespace dialbench
