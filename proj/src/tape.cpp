#include "dialbench/tape.hpp"

#include <cmath>
#include <cstring>

namespace dialbench {

int Parameters::add(std::string name, Tensor value) {
  if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), std::move(value)});
  return static_cast<int>(entries_.size()) - 1;
}

int Parameters::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

// C(m x n) += A(m x k) @ B(k x n)
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA(m x k) += dC(m x n) @ B(k x n)^T
void matmul_acc_bt(const double* dc, const double* b, double* da, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* dcrow = dc + static_cast<std::size_t>(i) * n;
    double* darow = da + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* brow = b + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

double stable_softplus(double x) {
  // log1p(exp(-|x|)) + max(x, 0); exact asymptotes, no overflow.
  return std::log1p(std::exp(-std::fabs(x))) + (x > 0.0 ? x : 0.0);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeId Tape::push(Node node, const char* what) {
  check_finite(node.value, what);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::param(int slot) {
  if (slot < 0 || slot >= params_->count())
    throw ConfigError("parameter slot out of range");
  Node n;
  n.op = Op::kParam;
  n.slot = slot;
  n.value = params_->value(slot);
  return push(std::move(n), "param");
}

NodeId Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.rank() != 2 || tb.rank() != 2)
    throw ShapeError("matmul expects rank-2 tensors");
  if (ta.cols() != tb.rows())
    throw ShapeError("matmul inner dims disagree: " + ta.shape_str() + " @ " +
                     tb.shape_str());
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.value = Tensor::zeros({ta.rows(), tb.cols()});
  matmul_acc(ta.data(), tb.data(), n.value.data(), ta.rows(), ta.cols(), tb.cols());
  return push(std::move(n), "matmul");
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] += tb[i];
  return push(std::move(n), "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] -= tb[i];
  return push(std::move(n), "sub");
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  check_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] *= tb[i];
  return push(std::move(n), "mul");
}

NodeId Tape::add_row(NodeId a, NodeId row) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tr = nodes_[row].value;
  if (ta.rank() != 2 || tr.rank() != 1 || ta.cols() != tr.cols())
    throw ShapeError("add_row expects (m x n) + (n), got " + ta.shape_str() +
                     " + " + tr.shape_str());
  Node n;
  n.op = Op::kAddRow;
  n.a = a;
  n.b = row;
  n.value = ta;
  for (int i = 0; i < ta.rows(); ++i)
    for (int j = 0; j < ta.cols(); ++j) n.value.at(i, j) += tr[j];
  return push(std::move(n), "add_row");
}

NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    if (n.value[i] < 0.0) n.value[i] = 0.0;
  return push(std::move(n), "relu");
}

NodeId Tape::softplus(NodeId a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value[i] = stable_softplus(n.value[i]);
  return push(std::move(n), "softplus");
}

NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value[i] = stable_sigmoid(n.value[i]);
  return push(std::move(n), "sigmoid");
}

NodeId Tape::exp(NodeId a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value[i] = std::exp(n.value[i]);
  return push(std::move(n), "exp");
}

NodeId Tape::log(NodeId a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value[i] = std::log(n.value[i]);
  return push(std::move(n), "log");
}

NodeId Tape::square(NodeId a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value[i] *= n.value[i];
  return push(std::move(n), "square");
}

NodeId Tape::neg(NodeId a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = -n.value[i];
  return push(std::move(n), "neg");
}

NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.c = c;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
  return push(std::move(n), "scale");
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a;
  n.c = c;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += c;
  return push(std::move(n), "add_scalar");
}

NodeId Tape::broadcast(NodeId a, std::vector<int> shape) {
  const Tensor& ta = nodes_[a].value;
  if (ta.size() != 1) throw ShapeError("broadcast source must have one element");
  Node n;
  n.op = Op::kBroadcast;
  n.a = a;
  n.value = Tensor::full(std::move(shape), ta[0]);
  return push(std::move(n), "broadcast");
}

NodeId Tape::gather_cols(NodeId a, std::vector<int> idx) {
  const Tensor& ta = nodes_[a].value;
  if (ta.rank() != 2) throw ShapeError("gather_cols expects a rank-2 input");
  if (static_cast<int>(idx.size()) != ta.rows())
    throw ShapeError("gather_cols index count must equal row count");
  Node n;
  n.op = Op::kGatherCols;
  n.a = a;
  n.value = Tensor::zeros({ta.rows()});
  for (int i = 0; i < ta.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= ta.cols())
      throw ShapeError("gather_cols index out of range");
    n.value[i] = ta.at(i, idx[i]);
  }
  n.idx = std::move(idx);
  return push(std::move(n), "gather_cols");
}

NodeId Tape::sum(NodeId a) {
  const Tensor& ta = nodes_[a].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) acc += ta[i];
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.value = Tensor::vector({acc});
  return push(std::move(n), "sum");
}

double Tape::scalar(NodeId id) const {
  const Tensor& t = nodes_[id].value;
  if (t.size() != 1) throw ShapeError("scalar() on tensor " + t.shape_str());
  return t[0];
}

std::vector<char> Tape::reachable(NodeId root) const {
  std::vector<char> mark(nodes_.size(), 0);
  mark[root] = 1;
  for (int i = root; i >= 0; --i) {
    if (!mark[i]) continue;
    const Node& n = nodes_[i];
    if (n.a >= 0) mark[n.a] = 1;
    if (n.b >= 0) mark[n.b] = 1;
  }
  return mark;
}

std::vector<Tensor> Tape::backward(NodeId root, const Tensor& seed) const {
  if (params_->revision() != revision_)
    throw StaleTapeError("parameters changed since this tape was recorded");
  if (root < 0 || root >= node_count()) throw ConfigError("bad root node");
  check_same_shape(nodes_[root].value, seed, "backward seed");
  check_finite(seed, "backward seed");

  std::vector<char> mark = reachable(root);
  std::vector<Tensor> grad(nodes_.size());
  grad[root] = seed;

  for (int i = root; i >= 0; --i) {
    if (!mark[i] || grad[i].size() == 0) continue;
    const Node& n = nodes_[i];
    const Tensor& g = grad[i];
    auto acc = [&](int target, std::size_t count) -> Tensor& {
      Tensor& t = grad[target];
      if (t.size() == 0) t = Tensor::zeros(nodes_[target].value.shape());
      (void)count;
      return t;
    };
    switch (n.op) {
      case Op::kParam:
      case Op::kConst:
        break;
      case Op::kMatmul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        Tensor& da = acc(n.a, ta.size());
        Tensor& db = acc(n.b, tb.size());
        matmul_acc_bt(g.data(), tb.data(), da.data(), ta.rows(), ta.cols(), tb.cols());
        // dB += A^T @ dC, accumulated row by row of A.
        for (int r = 0; r < ta.rows(); ++r) {
          const double* arow = ta.data() + static_cast<std::size_t>(r) * ta.cols();
          const double* grow = g.data() + static_cast<std::size_t>(r) * tb.cols();
          for (int p = 0; p < ta.cols(); ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            double* dbrow = db.data() + static_cast<std::size_t>(p) * tb.cols();
            for (int j = 0; j < tb.cols(); ++j) dbrow[j] += av * grow[j];
          }
        }
        break;
      }
      case Op::kAdd: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j];
        Tensor& db = acc(n.b, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) db[j] += g[j];
        break;
      }
      case Op::kSub: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j];
        Tensor& db = acc(n.b, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) db[j] -= g[j];
        break;
      }
      case Op::kMul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j] * tb[j];
        Tensor& db = acc(n.b, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) db[j] += g[j] * ta[j];
        break;
      }
      case Op::kAddRow: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j];
        Tensor& dr = acc(n.b, 0);
        for (int r = 0; r < ta.rows(); ++r)
          for (int j = 0; j < ta.cols(); ++j) dr[j] += g.at(r, j);
        break;
      }
      case Op::kRelu: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j)
          if (ta[j] > 0.0) da[j] += g[j];
        break;
      }
      case Op::kSoftplus: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j)
          da[j] += g[j] * stable_sigmoid(ta[j]);
        break;
      }
      case Op::kSigmoid: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) {
          double s = n.value[j];
          da[j] += g[j] * s * (1.0 - s);
        }
        break;
      }
      case Op::kExp: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j] * n.value[j];
        break;
      }
      case Op::kLog: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j] / ta[j];
        break;
      }
      case Op::kSquare: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += 2.0 * g[j] * ta[j];
        break;
      }
      case Op::kNeg: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] -= g[j];
        break;
      }
      case Op::kScale: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j] * n.c;
        break;
      }
      case Op::kAddScalar: {
        Tensor& da = acc(n.a, g.size());
        for (std::size_t j = 0; j < g.size(); ++j) da[j] += g[j];
        break;
      }
      case Op::kBroadcast: {
        Tensor& da = acc(n.a, 1);
        double s = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) s += g[j];
        da[0] += s;
        break;
      }
      case Op::kGatherCols: {
        const Tensor& ta = nodes_[n.a].value;
        Tensor& da = acc(n.a, ta.size());
        for (int r = 0; r < ta.rows(); ++r) da.at(r, n.idx[r]) += g[r];
        break;
      }
      case Op::kSum: {
        Tensor& da = acc(n.a, 0);
        for (std::size_t j = 0; j < da.size(); ++j) da[j] += g[0];
        break;
      }
    }
  }

  std::vector<Tensor> out(params_->count());
  for (int i = 0; i < params_->count(); ++i)
    out[i] = Tensor::zeros(params_->value(i).shape());
  for (int i = 0; i <= root; ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::kParam && grad[i].size() != 0) {
      Tensor& dst = out[n.slot];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += grad[i][j];
    }
  }
  for (const Tensor& t : out) check_finite(t, "parameter gradient");
  return out;
}

std::vector<Tensor> Tape::gradients(NodeId root) const {
  if (nodes_[root].value.size() != 1)
    throw ShapeError("gradients() requires a scalar root");
  Tensor seed = Tensor::full(nodes_[root].value.shape(), 1.0);
  return backward(root, seed);
}

std::vector<int> Tape::touched_params(NodeId root) const {
  std::vector<char> mark = reachable(root);
  std::vector<char> seen(params_->count(), 0);
  std::vector<int> slots;
  for (int i = 0; i <= root; ++i) {
    const Node& n = nodes_[i];
    if (mark[i] && n.op == Op::kParam && !seen[n.slot]) {
      seen[n.slot] = 1;
      slots.push_back(n.slot);
    }
  }
  return slots;
}

double finite_diff_check(Parameters& params, const LossBuilder& loss, double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape(params);
    NodeId root = loss(tape);
    analytic = tape.gradients(root);
  }
  auto eval = [&]() {
    Tape tape(params);
    return tape.scalar(loss(tape));
  };
  double worst = 0.0;
  for (int s = 0; s < params.count(); ++s) {
    Tensor& theta = params.value(s);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double keep = theta[j];
      theta[j] = keep + h;
      params.bump();
      double up = eval();
      theta[j] = keep - h;
      params.bump();
      double down = eval();
      theta[j] = keep;
      params.bump();
      double numeric = (up - down) / (2.0 * h);
      double err = std::fabs(analytic[s][j] - numeric) / (std::fabs(numeric) + 1e-12);
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace dialbench
