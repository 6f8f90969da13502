#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dialbench/tensor.hpp"

namespace dialbench {

/// Named parameter tensors plus a revision counter. Any mutation must bump
/// the revision; tapes recorded against an older revision refuse to replay.
class Parameters {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  int add(std::string name, Tensor value);
  int find(const std::string& name) const;  // -1 when absent

  Tensor& value(int slot) { return entries_[slot].value; }
  const Tensor& value(int slot) const { return entries_[slot].value; }
  const std::string& name(int slot) const { return entries_[slot].name; }

  int count() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::uint64_t revision() const { return revision_; }
  void bump() { ++revision_; }

 private:
  std::vector<Entry> entries_;
  std::uint64_t revision_ = 0;
};

using NodeId = int;

/// Record of one forward pass: primitive ops in execution order, each holding
/// its output value. Node inputs always have smaller ids, so a reverse index
/// sweep is a reverse topological sweep and visits each op exactly once.
class Tape {
 public:
  explicit Tape(const Parameters& params)
      : params_(&params), revision_(params.revision()) {}

  NodeId param(int slot);
  NodeId constant(Tensor v);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// (m x n) plus a length-n row vector, added to every row. The only
  /// broadcast in the op set, and it is explicit.
  NodeId add_row(NodeId a, NodeId row);
  NodeId relu(NodeId a);
  NodeId softplus(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  /// Replicate a single-element tensor into `shape`; gradient sums back.
  NodeId broadcast(NodeId a, std::vector<int> shape);
  /// Pick one column per row of an (m x n) input: out[i] = a[i, idx[i]].
  NodeId gather_cols(NodeId a, std::vector<int> idx);
  NodeId sum(NodeId a);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  double scalar(NodeId id) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

  /// Reverse sweep seeded with `seed` at `root`. Returns one gradient tensor
  /// per parameter slot, zero-filled for parameters off the recorded path.
  std::vector<Tensor> backward(NodeId root, const Tensor& seed) const;

  /// backward() with a scalar root and unit seed.
  std::vector<Tensor> gradients(NodeId root) const;

  /// Parameter slots that actually feed `root`.
  std::vector<int> touched_params(NodeId root) const;

 private:
  enum class Op {
    kParam,
    kConst,
    kMatmul,
    kAdd,
    kSub,
    kMul,
    kAddRow,
    kRelu,
    kSoftplus,
    kSigmoid,
    kExp,
    kLog,
    kSquare,
    kNeg,
    kScale,
    kAddScalar,
    kBroadcast,
    kGatherCols,
    kSum,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor value;
    double c = 0.0;
    std::vector<int> idx;
    int slot = -1;
  };

  NodeId push(Node node, const char* what);
  std::vector<char> reachable(NodeId root) const;

  const Parameters* params_;
  std::uint64_t revision_;
  std::vector<Node> nodes_;
};

/// Builds a scalar loss on a fresh tape from the current parameter values.
/// Must be deterministic; freeze any noise before constructing one.
using LossBuilder = std::function<NodeId(Tape&)>;

/// Max over parameter elements of |analytic - numeric| / (|numeric| + 1e-12),
/// with numeric gradients from central differences of step h.
double finite_diff_check(Parameters& params, const LossBuilder& loss,
                         double h = 1e-5);

}  // namespace dialbench
