#pragma once

#include <map>
#include <string>
#include <vector>

#include "dialbench/adam.hpp"
#include "dialbench/bayes.hpp"
#include "dialbench/rng.hpp"
#include "dialbench/tape.hpp"

namespace dialbench {

enum class WeightKind { kDeterministic, kVariational };
enum class DropoutKind { kNone, kBernoulli, kConcrete };

struct NetworkConfig {
  int input_dim = 0;
  int num_actions = 0;
  std::vector<int> hidden = {130, 50};
  WeightKind weights = WeightKind::kDeterministic;
  DropoutKind dropout = DropoutKind::kNone;
  double dropout_rate = 0.1;
  double concrete_temperature = 0.1;
  int heads = 1;
  GaussianPrior prior;
  double rho_init = -3.0;
};

/// Noise drawn during a stochastic forward pass, keyed by site name. Feeding
/// the same draws back in reproduces the pass exactly, which is what the
/// finite-difference checks and per-episode Thompson sampling rely on.
struct NoiseDraws {
  std::map<std::string, Tensor> sites;

  const Tensor* find(const std::string& key) const {
    auto it = sites.find(key);
    return it == sites.end() ? nullptr : &it->second;
  }
};

/// MLP mapping a belief row-batch (m x input_dim) to Q-values (m x actions).
/// Hidden layers share one trunk; the final layer is replicated per head.
/// Weights are plain tensors or mean-field Gaussians depending on config;
/// dropout (Bernoulli or concrete) applies to hidden activations only.
class QNetwork {
 public:
  struct ForwardSpec {
    bool stochastic = false;
    Rng* rng = nullptr;               // noise source when stochastic
    const NoiseDraws* replay = nullptr;  // overrides rng per recorded site
    NoiseDraws* record = nullptr;     // captures the draws actually used
    int head = -1;                    // -1 = average over heads
    std::string noise_prefix;         // disambiguates sites across MC samples
  };

  QNetwork(NetworkConfig cfg, Rng& init_rng);

  /// Records the network on `tape` and returns the Q-value node (m x actions).
  NodeId forward(Tape& tape, const Tensor& input, const ForwardSpec& spec) const;

  /// One output node per head over a shared trunk (for the bootstrapped loss).
  std::vector<NodeId> forward_all_heads(Tape& tape, const Tensor& input,
                                        const ForwardSpec& spec) const;

  /// Convenience: forward on a throwaway tape, returning values only.
  Tensor forward_values(const Tensor& input, const ForwardSpec& spec) const;

  /// Closed-form KL[q || prior] summed over every variational tensor, as a
  /// tape node; the empty sum (no variational weights) is zero.
  NodeId kl_to_prior(Tape& tape) const;

  /// Same KL evaluated directly (no tape).
  double kl_to_prior_value() const;

  /// Pre-draws every noise site for a stochastic pass over `batch_rows` rows.
  NoiseDraws draw_noise(Rng& rng, int batch_rows,
                        const std::string& prefix = "") const;

  bool has_stochastic_mode() const;
  double dropout_rate_value(int site) const;  // current rate (trained or fixed)

  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }
  const NetworkConfig& config() const { return cfg_; }
  int num_heads() const { return cfg_.heads; }

  void copy_params_from(const QNetwork& other);

 private:
  struct LayerSlots {
    int w = -1, b = -1;              // deterministic
    int w_mu = -1, w_rho = -1, b_mu = -1, b_rho = -1;  // variational
    int in = 0, out = 0;
  };

  NodeId weight_node(Tape& tape, const LayerSlots& layer, const std::string& site,
                     const ForwardSpec& spec, bool bias) const;
  NodeId apply_dropout(Tape& tape, NodeId h, int site, int rows, int width,
                       const ForwardSpec& spec) const;
  Tensor site_noise(const std::string& key, std::vector<int> shape,
                    const ForwardSpec& spec, bool normal) const;
  NodeId trunk(Tape& tape, const Tensor& input, const ForwardSpec& spec) const;
  NodeId head_output(Tape& tape, NodeId trunk_out, int head,
                     const ForwardSpec& spec) const;
  void kl_terms(Tape& tape, const LayerSlots& layer, std::vector<NodeId>& terms) const;

  NetworkConfig cfg_;
  Parameters params_;
  std::vector<LayerSlots> hidden_;
  std::vector<LayerSlots> heads_;
  std::vector<int> drop_logit_;  // concrete: one trainable logit per hidden site
};

}  // namespace dialbench
