#include "dialbench/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dialbench/errors.hpp"

namespace dialbench {
namespace {

constexpr double kUniformClamp = 1e-7;

Tensor he_uniform(int fan_in, std::vector<int> shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (int i = 0, n = static_cast<int>(t.size()); i < n; ++i) {
    t[i] = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return t;
}

std::string layer_prefix(bool head, int index) {
  return (head ? "h" : "l") + std::to_string(index);
}

}  // namespace

QNetwork::QNetwork(NetworkConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  if (cfg_.input_dim <= 0 || cfg_.num_actions <= 0) {
    throw ConfigError("network needs positive input_dim and num_actions");
  }
  if (cfg_.heads < 1) throw ConfigError("network needs at least one head");
  for (int width : cfg_.hidden) {
    if (width <= 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (cfg_.dropout != DropoutKind::kNone &&
      (cfg_.dropout_rate <= 0.0 || cfg_.dropout_rate >= 1.0)) {
    throw ConfigError("dropout rate must lie strictly between 0 and 1");
  }

  auto add_layer = [&](int in, int out, bool head, int index) {
    LayerSlots layer;
    layer.in = in;
    layer.out = out;
    const std::string p = layer_prefix(head, index);
    if (cfg_.weights == WeightKind::kDeterministic) {
      layer.w = params_.add(p + ".w", he_uniform(in, {in, out}, init_rng));
      layer.b = params_.add(p + ".b", Tensor::zeros({out}));
    } else {
      layer.w_mu = params_.add(p + ".w_mu", he_uniform(in, {in, out}, init_rng));
      layer.w_rho = params_.add(p + ".w_rho", Tensor::full({in, out}, cfg_.rho_init));
      layer.b_mu = params_.add(p + ".b_mu", Tensor::zeros({out}));
      layer.b_rho = params_.add(p + ".b_rho", Tensor::full({out}, cfg_.rho_init));
    }
    return layer;
  };

  int in = cfg_.input_dim;
  for (int i = 0; i < static_cast<int>(cfg_.hidden.size()); ++i) {
    hidden_.push_back(add_layer(in, cfg_.hidden[i], false, i));
    in = cfg_.hidden[i];
  }
  for (int k = 0; k < cfg_.heads; ++k) {
    heads_.push_back(add_layer(in, cfg_.num_actions, true, k));
  }
  if (cfg_.dropout == DropoutKind::kConcrete) {
    const double init = logit(cfg_.dropout_rate);
    for (int i = 0; i < static_cast<int>(cfg_.hidden.size()); ++i) {
      drop_logit_.push_back(params_.add("drop" + std::to_string(i) + ".logit",
                                        Tensor::full({1}, init)));
    }
  }
}

Tensor QNetwork::site_noise(const std::string& key, std::vector<int> shape,
                            const ForwardSpec& spec, bool normal) const {
  if (spec.replay != nullptr) {
    if (const Tensor* t = spec.replay->find(key)) {
      if (t->shape() != shape) {
        throw ShapeError("replayed noise for " + key + " is " + t->shape_str() +
                         ", expected " + Tensor::zeros(shape).shape_str());
      }
      if (spec.record != nullptr) spec.record->sites[key] = *t;
      return *t;
    }
  }
  if (spec.rng == nullptr) {
    throw ProtocolError("stochastic forward needs an rng or replayed noise (site " +
                        key + ")");
  }
  Tensor t = normal ? spec.rng->normal_tensor(shape)
                    : spec.rng->uniform_open_tensor(shape);
  if (spec.record != nullptr) spec.record->sites[key] = t;
  return t;
}

NodeId QNetwork::weight_node(Tape& tape, const LayerSlots& layer,
                             const std::string& site, const ForwardSpec& spec,
                             bool bias) const {
  if (cfg_.weights == WeightKind::kDeterministic) {
    return tape.param(bias ? layer.b : layer.w);
  }
  const int mu_slot = bias ? layer.b_mu : layer.w_mu;
  const int rho_slot = bias ? layer.b_rho : layer.w_rho;
  NodeId mu = tape.param(mu_slot);
  if (!spec.stochastic) return mu;  // deterministic pass uses the posterior mean
  const std::string key =
      spec.noise_prefix + site + (bias ? ".eps_b" : ".eps_w");
  Tensor eps = site_noise(key, params_.value(mu_slot).shape(), spec, true);
  NodeId sigma = tape.softplus(tape.param(rho_slot));
  return tape.add(mu, tape.mul(sigma, tape.constant(std::move(eps))));
}

NodeId QNetwork::apply_dropout(Tape& tape, NodeId h, int site, int rows,
                               int width, const ForwardSpec& spec) const {
  if (cfg_.dropout == DropoutKind::kNone || !spec.stochastic) return h;
  const std::string base = "drop" + std::to_string(site);

  if (cfg_.dropout == DropoutKind::kBernoulli) {
    const std::string key = spec.noise_prefix + base + ".mask";
    Tensor mask;
    if (const Tensor* t = spec.replay ? spec.replay->find(key) : nullptr) {
      check_same_shape(*t, Tensor::zeros({rows, width}), ("replayed " + key).c_str());
      mask = *t;
    } else {
      if (spec.rng == nullptr) {
        throw ProtocolError("stochastic forward needs an rng (site " + key + ")");
      }
      mask = dropout_mask({cfg_.dropout_rate, cfg_.concrete_temperature},
                          {rows, width}, *spec.rng);
    }
    if (spec.record != nullptr) spec.record->sites[key] = mask;
    return tape.mul(h, tape.constant(std::move(mask)));
  }

  // Concrete relaxation: the drop indicator z is a function of the trainable
  // rate logit p, so it is built on-tape; the uniform draw enters as data.
  //   z = sigmoid((p + log u - log(1-u)) / t),  keep gate 1 - z,
  //   inverted scaling 1/(1 - sigmoid(p)) = 1 + exp(p).
  const std::string key = spec.noise_prefix + base + ".u";
  Tensor u = site_noise(key, {rows, width}, spec, false);
  Tensor lu = Tensor::zeros({rows, width});
  for (int i = 0, n = static_cast<int>(u.size()); i < n; ++i) {
    double v = u[i];
    if (v < kUniformClamp) v = kUniformClamp;
    if (v > 1.0 - kUniformClamp) v = 1.0 - kUniformClamp;
    lu[i] = std::log(v) - std::log1p(-v);
  }
  NodeId p = tape.param(drop_logit_[site]);
  NodeId pb = tape.broadcast(p, {rows, width});
  NodeId z = tape.sigmoid(tape.scale(tape.add(pb, tape.constant(std::move(lu))),
                                     1.0 / cfg_.concrete_temperature));
  NodeId keep = tape.add_scalar(tape.neg(z), 1.0);
  NodeId rescale = tape.broadcast(tape.add_scalar(tape.exp(p), 1.0), {rows, width});
  return tape.mul(tape.mul(h, keep), rescale);
}

NodeId QNetwork::trunk(Tape& tape, const Tensor& input,
                       const ForwardSpec& spec) const {
  if (input.rank() != 2 || input.cols() != cfg_.input_dim) {
    throw ShapeError("network input must be rows x " +
                     std::to_string(cfg_.input_dim) + ", got " + input.shape_str());
  }
  if (spec.stochastic && !has_stochastic_mode()) {
    throw ProtocolError("network has no noise sources; stochastic pass is undefined");
  }
  const int rows = input.rows();
  NodeId x = tape.constant(input);
  for (int i = 0; i < static_cast<int>(hidden_.size()); ++i) {
    const std::string site = layer_prefix(false, i);
    NodeId w = weight_node(tape, hidden_[i], site, spec, false);
    NodeId b = weight_node(tape, hidden_[i], site, spec, true);
    NodeId a = tape.relu(tape.add_row(tape.matmul(x, w), b));
    x = apply_dropout(tape, a, i, rows, hidden_[i].out, spec);
  }
  return x;
}

NodeId QNetwork::head_output(Tape& tape, NodeId trunk_out, int head,
                             const ForwardSpec& spec) const {
  const std::string site = layer_prefix(true, head);
  NodeId w = weight_node(tape, heads_[head], site, spec, false);
  NodeId b = weight_node(tape, heads_[head], site, spec, true);
  return tape.add_row(tape.matmul(trunk_out, w), b);
}

NodeId QNetwork::forward(Tape& tape, const Tensor& input,
                         const ForwardSpec& spec) const {
  if (spec.head >= cfg_.heads) {
    throw ProtocolError("head " + std::to_string(spec.head) + " out of range for " +
                        std::to_string(cfg_.heads) + " heads");
  }
  NodeId t = trunk(tape, input, spec);
  if (spec.head >= 0 || cfg_.heads == 1) {
    return head_output(tape, t, spec.head >= 0 ? spec.head : 0, spec);
  }
  NodeId acc = head_output(tape, t, 0, spec);
  for (int k = 1; k < cfg_.heads; ++k) {
    acc = tape.add(acc, head_output(tape, t, k, spec));
  }
  return tape.scale(acc, 1.0 / static_cast<double>(cfg_.heads));
}

std::vector<NodeId> QNetwork::forward_all_heads(Tape& tape, const Tensor& input,
                                                const ForwardSpec& spec) const {
  NodeId t = trunk(tape, input, spec);
  std::vector<NodeId> out;
  out.reserve(heads_.size());
  for (int k = 0; k < cfg_.heads; ++k) out.push_back(head_output(tape, t, k, spec));
  return out;
}

Tensor QNetwork::forward_values(const Tensor& input, const ForwardSpec& spec) const {
  Tape tape(params_);
  return tape.value(forward(tape, input, spec));
}

void QNetwork::kl_terms(Tape& tape, const LayerSlots& layer,
                        std::vector<NodeId>& terms) const {
  const double s0 = cfg_.prior.stddev;
  const double m0 = cfg_.prior.mean;
  for (bool bias : {false, true}) {
    const int mu_slot = bias ? layer.b_mu : layer.w_mu;
    const int rho_slot = bias ? layer.b_rho : layer.w_rho;
    NodeId mu = tape.param(mu_slot);
    NodeId sigma = tape.softplus(tape.param(rho_slot));
    NodeId t1 = tape.neg(tape.log(sigma));
    NodeId diff = m0 == 0.0 ? mu : tape.add_scalar(mu, -m0);
    NodeId t2 = tape.scale(tape.add(tape.square(sigma), tape.square(diff)),
                           1.0 / (2.0 * s0 * s0));
    NodeId s = tape.sum(tape.add(t1, t2));
    const double n = static_cast<double>(params_.value(mu_slot).size());
    terms.push_back(tape.add_scalar(s, n * (std::log(s0) - 0.5)));
  }
}

NodeId QNetwork::kl_to_prior(Tape& tape) const {
  // Without variational tensors the sum is empty: a constant zero.
  if (cfg_.weights != WeightKind::kVariational) {
    return tape.constant(Tensor::vector({0.0}));
  }
  std::vector<NodeId> terms;
  for (const LayerSlots& layer : hidden_) kl_terms(tape, layer, terms);
  for (const LayerSlots& layer : heads_) kl_terms(tape, layer, terms);
  NodeId acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return acc;
}

double QNetwork::kl_to_prior_value() const {
  if (cfg_.weights != WeightKind::kVariational) return 0.0;
  double total = 0.0;
  auto accumulate = [&](const LayerSlots& layer) {
    total += kl_diag_gaussian(
        {params_.value(layer.w_mu), params_.value(layer.w_rho)}, cfg_.prior);
    total += kl_diag_gaussian(
        {params_.value(layer.b_mu), params_.value(layer.b_rho)}, cfg_.prior);
  };
  for (const LayerSlots& layer : hidden_) accumulate(layer);
  for (const LayerSlots& layer : heads_) accumulate(layer);
  return total;
}

NoiseDraws QNetwork::draw_noise(Rng& rng, int batch_rows,
                                const std::string& prefix) const {
  // Run a throwaway pass with recording on, so site order and keys are the
  // ones a real pass uses by construction.
  NoiseDraws draws;
  ForwardSpec spec;
  spec.stochastic = true;
  spec.rng = &rng;
  spec.record = &draws;
  spec.noise_prefix = prefix;
  forward_values(Tensor::zeros({batch_rows, cfg_.input_dim}), spec);
  return draws;
}

bool QNetwork::has_stochastic_mode() const {
  return cfg_.weights == WeightKind::kVariational ||
         cfg_.dropout != DropoutKind::kNone;
}

double QNetwork::dropout_rate_value(int site) const {
  if (cfg_.dropout == DropoutKind::kNone) return 0.0;
  if (cfg_.dropout == DropoutKind::kBernoulli) return cfg_.dropout_rate;
  return sigmoid(params_.value(drop_logit_.at(site))[0]);
}

void QNetwork::copy_params_from(const QNetwork& other) {
  if (params_.count() != other.params_.count()) {
    throw ShapeError("cannot copy parameters between different architectures");
  }
  for (int i = 0; i < params_.count(); ++i) {
    if (params_.name(i) != other.params_.name(i)) {
      throw ShapeError("parameter layout mismatch at slot " + std::to_string(i) +
                       ": " + params_.name(i) + " vs " + other.params_.name(i));
    }
    check_same_shape(params_.value(i), other.params_.value(i),
                     ("copy of " + params_.name(i)).c_str());
    params_.value(i) = other.params_.value(i);
  }
  params_.bump();
}

}  // namespace dialbench
