#pragma once

#include <vector>

#include "dialbench/network.hpp"
#include "dialbench/transition.hpp"

namespace dialbench {

struct ObjectiveConfig {
  double gamma = 0.99;
  double kl_weight = 0.0;   // typically 1/M with M minibatches per epoch
  int mc_samples = 1;       // K, the Monte Carlo sample count
  double alpha = 0.5;       // divergence parameter of the alpha-energy
  double sigma_lik = 1.0;   // Gaussian likelihood scale of the TD residual
  bool alpha_paper_literal = false;  // evaluate the published defective form

  void validate() const;
};

/// A differentiated objective: value, per-parameter-slot gradients, and the
/// value split into data-fit and (unweighted) KL components for logging.
struct LossValue {
  double value = 0.0;
  std::vector<Tensor> grads;
  double data_term = 0.0;
  double kl_term = 0.0;
};

/// Bootstrap targets y_t = r_t (terminal) or r_t + gamma * max_a' Q(b', a'),
/// from a deterministic pass through `target` (posterior mean for variational
/// nets; `head` selects one bootstrap head, -1 averages). No gradient flows.
Tensor td_targets(const Batch& batch, const QNetwork& target, double gamma,
                  int head = -1);

/// Mean squared TD error over the batch; only the taken action's Q-value
/// contributes per transition. `spec` controls the forward pass, so dropout
/// agents can train with live masks while plain DQN passes the default.
LossValue td_loss(const Batch& batch, const QNetwork& net, const Tensor& y,
                  const QNetwork::ForwardSpec& spec = {});

/// Per-head TD loss for the bootstrapped agent: head k sees transition n only
/// when its mask bit is set; normalized by the number of active (n, k) pairs.
LossValue bootstrap_td_loss(const Batch& batch, const QNetwork& net,
                            const std::vector<Tensor>& per_head_y);

/// Variational free energy:
///   kl_weight * KL[q || prior] + (1/K) sum_i MSE(w_i) / (2 sigma_lik^2)
/// with w_i reparameterized from the frozen draws in `noise` (sites prefixed
/// "mc{i}."). MSE is the batch-mean squared TD residual.
LossValue free_energy(const Batch& batch, const QNetwork& net, const Tensor& y,
                      const ObjectiveConfig& cfg, const NoiseDraws& noise);

/// Black-box alpha-divergence energy with batch-mean normalization:
///   kl_weight * KL[q || prior]
///     - 1/(alpha B) * sum_n log( (1/K) sum_i exp(alpha * l_{n,i}) )
/// where l_{n,i} = -residual^2 / (2 sigma_lik^2) is the Gaussian log-likelihood
/// of transition n under sample w_i (additive constant dropped so the alpha->0
/// limit matches free_energy exactly). Stabilized by a per-datapoint max shift.
/// With `alpha_paper_literal`, the exponent alpha inside the mean is replaced
/// by 1, reproducing the published expression (which has no alpha->0 limit).
LossValue bb_alpha_energy(const Batch& batch, const QNetwork& net,
                          const Tensor& y, const ObjectiveConfig& cfg,
                          const NoiseDraws& noise);

/// Draws every noise site for K stochastic passes over `batch_rows` rows,
/// prefixing sample i's sites with "mc{i}.".
NoiseDraws draw_mc_noise(const QNetwork& net, int batch_rows, int mc_samples,
                         Rng& rng);

/// Convenience overloads drawing fresh noise from `rng`.
LossValue free_energy(const Batch& batch, const QNetwork& net, const Tensor& y,
                      const ObjectiveConfig& cfg, Rng& rng);
LossValue bb_alpha_energy(const Batch& batch, const QNetwork& net,
                          const Tensor& y, const ObjectiveConfig& cfg, Rng& rng);

}  // namespace dialbench
