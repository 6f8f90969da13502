#include "dialbench/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dialbench/errors.hpp"

namespace dialbench {
namespace {

std::string mc_prefix(int i) { return "mc" + std::to_string(i) + "."; }

/// Q-values of the taken actions under one forward pass: a {B} node.
NodeId taken_q(Tape& tape, const QNetwork& net, const Tensor& inputs,
               const std::vector<int>& actions, const QNetwork::ForwardSpec& spec) {
  return tape.gather_cols(net.forward(tape, inputs, spec), actions);
}

LossValue finish(const Tape& tape, NodeId root, double data, double kl) {
  LossValue out;
  out.value = tape.scalar(root);
  out.grads = tape.gradients(root);
  out.data_term = data;
  out.kl_term = kl;
  return out;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
  if (kl_weight < 0.0) throw ConfigError("kl_weight must be non-negative");
  if (mc_samples < 1) throw ConfigError("mc_samples must be at least 1");
  if (sigma_lik <= 0.0) throw ConfigError("sigma_lik must be positive");
}

Tensor td_targets(const Batch& batch, const QNetwork& target, double gamma,
                  int head) {
  batch.validate(target.config().num_actions, target.num_heads());
  QNetwork::ForwardSpec spec;
  spec.head = head;
  const Tensor q = target.forward_values(stack_next_beliefs(batch), spec);
  const int b = batch.size();
  Tensor y = Tensor::zeros({b});
  for (int i = 0; i < b; ++i) {
    if (batch.items[i].terminal) {
      y[i] = batch.items[i].reward;
      continue;
    }
    double best = q.at(i, 0);
    for (int a = 1; a < q.cols(); ++a) best = std::max(best, q.at(i, a));
    y[i] = batch.items[i].reward + gamma * best;
  }
  check_finite(y, "td targets");
  return y;
}

LossValue td_loss(const Batch& batch, const QNetwork& net, const Tensor& y,
                  const QNetwork::ForwardSpec& spec) {
  batch.validate(net.config().num_actions, net.num_heads());
  const int b = batch.size();
  if (y.rank() != 1 || static_cast<int>(y.size()) != b) {
    throw ShapeError("targets must be one scalar per transition");
  }
  Tape tape(net.params());
  NodeId qa = taken_q(tape, net, stack_beliefs(batch), actions_of(batch), spec);
  NodeId res = tape.sub(tape.constant(y), qa);
  NodeId root = tape.scale(tape.sum(tape.square(res)), 1.0 / b);
  return finish(tape, root, tape.scalar(root), 0.0);
}

LossValue bootstrap_td_loss(const Batch& batch, const QNetwork& net,
                            const std::vector<Tensor>& per_head_y) {
  const int heads = net.num_heads();
  batch.validate(net.config().num_actions, heads);
  if (static_cast<int>(per_head_y.size()) != heads) {
    throw ShapeError("bootstrap loss needs one target vector per head");
  }
  const int b = batch.size();

  double active = 0.0;
  std::vector<Tensor> masks(heads, Tensor::zeros({b}));
  for (int k = 0; k < heads; ++k) {
    for (int i = 0; i < b; ++i) {
      const auto& m = batch.items[i].head_mask;
      const double bit = m.empty() ? 1.0 : m[k];
      masks[k][i] = bit;
      active += bit;
    }
  }
  if (active == 0.0) {
    LossValue out;
    out.grads.reserve(net.params().count());
    for (int s = 0; s < net.params().count(); ++s) {
      out.grads.push_back(Tensor::zeros(net.params().value(s).shape()));
    }
    return out;
  }

  Tape tape(net.params());
  const Tensor inputs = stack_beliefs(batch);
  const std::vector<int> actions = actions_of(batch);
  const std::vector<NodeId> outs = net.forward_all_heads(tape, inputs, {});
  NodeId total = -1;
  for (int k = 0; k < heads; ++k) {
    if (per_head_y[k].rank() != 1 || static_cast<int>(per_head_y[k].size()) != b) {
      throw ShapeError("per-head targets must be one scalar per transition");
    }
    NodeId qa = tape.gather_cols(outs[k], actions);
    NodeId res = tape.sub(tape.constant(per_head_y[k]), qa);
    NodeId sq = tape.mul(tape.square(res), tape.constant(masks[k]));
    NodeId s = tape.sum(sq);
    total = total < 0 ? s : tape.add(total, s);
  }
  NodeId root = tape.scale(total, 1.0 / active);
  return finish(tape, root, tape.scalar(root), 0.0);
}

LossValue free_energy(const Batch& batch, const QNetwork& net, const Tensor& y,
                      const ObjectiveConfig& cfg, const NoiseDraws& noise) {
  cfg.validate();
  batch.validate(net.config().num_actions, net.num_heads());
  const int b = batch.size();
  if (y.rank() != 1 || static_cast<int>(y.size()) != b) {
    throw ShapeError("targets must be one scalar per transition");
  }

  Tape tape(net.params());
  const Tensor inputs = stack_beliefs(batch);
  const std::vector<int> actions = actions_of(batch);
  const Tensor y_const = y;

  NodeId acc = -1;
  for (int i = 0; i < cfg.mc_samples; ++i) {
    QNetwork::ForwardSpec spec;
    spec.stochastic = true;
    spec.replay = &noise;
    spec.noise_prefix = mc_prefix(i);
    NodeId qa = taken_q(tape, net, inputs, actions, spec);
    NodeId s = tape.sum(tape.square(tape.sub(tape.constant(y_const), qa)));
    acc = acc < 0 ? s : tape.add(acc, s);
  }
  const double denom =
      static_cast<double>(cfg.mc_samples) * b * 2.0 * cfg.sigma_lik * cfg.sigma_lik;
  NodeId data = tape.scale(acc, 1.0 / denom);
  NodeId kl = net.kl_to_prior(tape);
  NodeId root = tape.add(data, tape.scale(kl, cfg.kl_weight));
  return finish(tape, root, tape.scalar(data), tape.scalar(kl));
}

LossValue bb_alpha_energy(const Batch& batch, const QNetwork& net,
                          const Tensor& y, const ObjectiveConfig& cfg,
                          const NoiseDraws& noise) {
  cfg.validate();
  if (cfg.alpha <= 0.0) {
    throw ConfigError("alpha-energy needs alpha > 0; use free_energy at alpha=0");
  }
  batch.validate(net.config().num_actions, net.num_heads());
  const int b = batch.size();
  const int k = cfg.mc_samples;
  if (y.rank() != 1 || static_cast<int>(y.size()) != b) {
    throw ShapeError("targets must be one scalar per transition");
  }

  Tape tape(net.params());
  const Tensor inputs = stack_beliefs(batch);
  const std::vector<int> actions = actions_of(batch);

  // e_i[n] = alpha * l_{n,i} (or l_{n,i} in the paper-literal variant) with
  // l the unnormalized Gaussian log-likelihood of the TD residual.
  const double lik_scale = -1.0 / (2.0 * cfg.sigma_lik * cfg.sigma_lik);
  const double exponent = cfg.alpha_paper_literal ? 1.0 : cfg.alpha;
  std::vector<NodeId> e;
  e.reserve(k);
  for (int i = 0; i < k; ++i) {
    QNetwork::ForwardSpec spec;
    spec.stochastic = true;
    spec.replay = &noise;
    spec.noise_prefix = mc_prefix(i);
    NodeId qa = taken_q(tape, net, inputs, actions, spec);
    NodeId sq = tape.square(tape.sub(tape.constant(y), qa));
    e.push_back(tape.scale(sq, lik_scale * exponent));
  }

  // Per-datapoint log-mean-exp with a value-level max shift. The shift is a
  // constant, so gradients are exact while exp never sees a positive argument.
  Tensor shift = Tensor::zeros({b});
  for (int n = 0; n < b; ++n) {
    double m = tape.value(e[0])[n];
    for (int i = 1; i < k; ++i) m = std::max(m, tape.value(e[i])[n]);
    shift[n] = m;
  }
  NodeId shift_node = tape.constant(shift);
  NodeId acc = -1;
  for (int i = 0; i < k; ++i) {
    NodeId ex = tape.exp(tape.sub(e[i], shift_node));
    acc = acc < 0 ? ex : tape.add(acc, ex);
  }
  NodeId lme = tape.add(tape.log(tape.scale(acc, 1.0 / k)), tape.constant(shift));
  NodeId data = tape.scale(tape.sum(lme), -1.0 / (cfg.alpha * b));
  NodeId kl = net.kl_to_prior(tape);
  NodeId root = tape.add(data, tape.scale(kl, cfg.kl_weight));
  return finish(tape, root, tape.scalar(data), tape.scalar(kl));
}

NoiseDraws draw_mc_noise(const QNetwork& net, int batch_rows, int mc_samples,
                         Rng& rng) {
  NoiseDraws all;
  for (int i = 0; i < mc_samples; ++i) {
    NoiseDraws one = net.draw_noise(rng, batch_rows, mc_prefix(i));
    for (auto& [key, value] : one.sites) all.sites[key] = std::move(value);
  }
  return all;
}

LossValue free_energy(const Batch& batch, const QNetwork& net, const Tensor& y,
                      const ObjectiveConfig& cfg, Rng& rng) {
  return free_energy(batch, net, y, cfg,
                     draw_mc_noise(net, batch.size(), cfg.mc_samples, rng));
}

LossValue bb_alpha_energy(const Batch& batch, const QNetwork& net,
                          const Tensor& y, const ObjectiveConfig& cfg, Rng& rng) {
  return bb_alpha_energy(batch, net, y, cfg,
                         draw_mc_noise(net, batch.size(), cfg.mc_samples, rng));
}

}  // namespace dialbench
