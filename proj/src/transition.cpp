#include "dialbench/transition.hpp"

#include <cmath>
#include <string>

#include "dialbench/errors.hpp"

namespace dialbench {

void Batch::validate(int num_actions, int heads) const {
  if (items.empty()) throw ConfigError("batch must be non-empty");
  const auto dim = items.front().belief.size();
  for (const Transition& t : items) {
    if (t.belief.rank() != 1 || t.next_belief.rank() != 1) {
      throw ShapeError("transition beliefs must be rank-1 tensors");
    }
    if (t.belief.size() != dim || t.next_belief.size() != dim) {
      throw ShapeError("transition belief dimensions disagree across the batch");
    }
    if (!std::isfinite(t.reward)) throw NumericError("non-finite reward in batch");
    check_finite(t.belief, "batch belief");
    check_finite(t.next_belief, "batch next belief");
    if (t.action < 0 || t.action >= num_actions) {
      throw ConfigError("transition action " + std::to_string(t.action) +
                        " outside [0, " + std::to_string(num_actions) + ")");
    }
    if (heads > 1 && !t.head_mask.empty()) {
      if (static_cast<int>(t.head_mask.size()) != heads) {
        throw ShapeError("head mask length must equal the head count");
      }
      for (double m : t.head_mask) {
        if (m != 0.0 && m != 1.0) throw ConfigError("head masks must be 0 or 1");
      }
    }
  }
}

namespace {

Tensor stack(const Batch& batch, bool next) {
  const int b = batch.size();
  const int d = static_cast<int>(batch.items.front().belief.size());
  Tensor out = Tensor::zeros({b, d});
  for (int i = 0; i < b; ++i) {
    const Tensor& src = next ? batch.items[i].next_belief : batch.items[i].belief;
    for (int j = 0; j < d; ++j) out.at(i, j) = src[j];
  }
  return out;
}

}  // namespace

Tensor stack_beliefs(const Batch& batch) { return stack(batch, false); }
Tensor stack_next_beliefs(const Batch& batch) { return stack(batch, true); }

std::vector<int> actions_of(const Batch& batch) {
  std::vector<int> idx;
  idx.reserve(batch.items.size());
  for (const Transition& t : batch.items) idx.push_back(t.action);
  return idx;
}

}  // namespace dialbench
