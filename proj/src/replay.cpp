#include "dialbench/replay.hpp"

#include <numeric>

#include "dialbench/errors.hpp"

namespace dialbench {

ReplayBuffer::ReplayBuffer(int capacity, int heads, double mask_prob)
    : capacity_(capacity), heads_(heads), mask_prob_(mask_prob) {
  if (capacity < 1) throw ConfigError("replay capacity must be positive");
  if (heads < 1) throw ConfigError("replay needs at least one head");
  if (mask_prob < 0.0 || mask_prob > 1.0) {
    throw ConfigError("head mask probability must lie in [0, 1]");
  }
}

void ReplayBuffer::push(Transition t, Rng& rng) {
  if (heads_ > 1) {
    t.head_mask.resize(heads_);
    for (int k = 0; k < heads_; ++k) {
      t.head_mask[k] = rng.uniform() < mask_prob_ ? 1.0 : 0.0;
    }
  }
  if (size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!ready(batch_size)) {
    throw ProtocolError("replay buffer holds fewer transitions than one batch");
  }
  // Partial Fisher-Yates over the index range: first batch_size entries are
  // a uniform sample without replacement.
  std::vector<int> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  Batch batch;
  batch.items.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(idx.size()) - i);
    std::swap(idx[i], idx[j]);
    batch.items.push_back(items_[idx[i]]);
  }
  return batch;
}

}  // namespace dialbench
