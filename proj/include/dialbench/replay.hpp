#pragma once

#include <deque>

#include "dialbench/rng.hpp"
#include "dialbench/transition.hpp"

namespace dialbench {

/// Ring buffer of transitions shared by all agents. For multi-head agents
/// each push draws a head-inclusion mask (each head kept independently with
/// probability mask_prob); mask_prob = 1 is the shared-data case.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity, int heads = 1, double mask_prob = 1.0);

  void push(Transition t, Rng& rng);
  bool ready(int batch_size) const { return size() >= batch_size; }

  /// Uniform sample without replacement within the batch.
  /// Throws ProtocolError when fewer than batch_size items are stored.
  Batch sample(int batch_size, Rng& rng) const;

  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return items_.at(i); }
  void clear() { items_.clear(); }

 private:
  int capacity_;
  int heads_;
  double mask_prob_;
  std::deque<Transition> items_;
};

}  // namespace dialbench
