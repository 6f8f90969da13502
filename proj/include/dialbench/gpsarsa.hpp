#pragma once

#include <utility>
#include <vector>

#include "dialbench/agents.hpp"
#include "dialbench/rng.hpp"
#include "dialbench/tensor.hpp"

namespace dialbench {

/// Linear belief kernel times an action Kronecker delta.
/// Throws ShapeError on belief length mismatch.
double linear_delta_kernel(const Tensor& b, int a, const Tensor& b2, int a2);

struct GpConfig {
  int num_actions = 0;
  double gamma = 0.99;
  double sigma_obs = 5.0;     // observation noise std dev
  double prior_scale = 1.0;   // GP prior covariance = prior_scale * kernel
  double nu = -1.0;           // admission threshold; < 0: 0.1 x running mean k(x,x)
  int dictionary_cap = 1500;  // hard growth bound

  void validate() const;
};

/// Online sparse GP-SARSA. The Q-function has a zero-mean GP prior with
/// covariance prior_scale * kernel; each transition contributes the linear
/// observation r = Q(x) - gamma Q(x') + eps with independent noise
/// sigma_obs^2 (the gamma term dropped at terminals). The posterior is kept
/// over a sparse dictionary with cached inverse Gram; derivation notes in
/// docs/gpsarsa-derivation.md. All updates cost O(k^2) in dictionary size k.
/// Because the action delta zeroes every cross-action kernel entry, per-action
/// row lists keep prediction proportional to the same-action dictionary rows.
class GpSarsa {
 public:
  explicit GpSarsa(GpConfig cfg);

  struct Admission {
    bool admitted = false;
    double residual = 0.0;
  };

  /// Tries to add (b, a) as a representative point: computes the squared
  /// kernel-space residual against the dictionary span and admits when it
  /// exceeds the threshold (and the cap allows). Always feeds the running
  /// self-similarity mean used by the automatic threshold.
  Admission admit(const Tensor& b, int a);

  /// One SARSA observation. Candidate points are admitted first; a
  /// non-finite innovation variance skips the update with a warning.
  void update(const Tensor& b, int a, double reward, const Tensor& b2, int a2,
              bool terminal);

  /// Predictive (mean, variance) at one state-action; variance clamped at 0
  /// (warning when roundoff drives it slightly negative). Throws ConfigError
  /// when the action lies outside the configured set.
  std::pair<double, double> predict(const Tensor& b, int a) const;

  /// Thompson draw: q_a ~ N(mean_a, var_a) independently, argmax (ties low).
  int select_action(const Tensor& b, Rng& rng) const;
  /// Greedy on posterior means (ties low) — the evaluation rule.
  int greedy_action(const Tensor& b) const;

  int dictionary_size() const { return static_cast<int>(dict_belief_.size()); }
  double threshold_now() const;
  const GpConfig& config() const { return cfg_; }

  std::string serialize() const;
  static GpSarsa deserialize(const std::string& text);

 private:
  double effective_kernel(const Tensor& b, int a, int dict_index) const;
  double predict_mean(const Tensor& b, int a) const;
  std::vector<double> kernel_vector(const Tensor& b, int a) const;
  std::vector<double> projection(const std::vector<double>& kvec) const;
  void grow_inverse_gram(const std::vector<double>& coeffs, double residual);
  void rebuild_inverse_gram();

  GpConfig cfg_;
  std::vector<Tensor> dict_belief_;
  std::vector<int> dict_action_;
  std::vector<std::vector<int>> action_rows_;  // dictionary rows per action
  std::vector<double> kinv_;   // k x k inverse Gram, row-major
  std::vector<double> alpha_;  // posterior mean coefficients
  std::vector<double> cmat_;   // k x k posterior precision-like matrix
  double self_sim_sum_ = 0.0;
  long long self_sim_count_ = 0;
};

/// Environment-facing wrapper implementing the Agent interface. Acting in
/// training mode samples from the posterior and, once the successor action
/// is known, applies the pending SARSA update; terminal updates happen in
/// observe(). Evaluation is greedy on means and mutates nothing.
class GpSarsaAgent : public Agent {
 public:
  explicit GpSarsaAgent(AgentConfig cfg);

  void begin_episode(bool training, Rng& rng) override;
  int act(const Tensor& belief, bool training, Rng& rng) override;
  void observe(const Transition& t, Rng& rng) override;
  void end_episode(bool training) override;

  const AgentConfig& config() const override { return cfg_; }
  std::string checkpoint() const override;
  void restore(const std::string& text) override;

  const GpSarsa& model() const { return gp_; }
  int dialogues_trained() const { return dialogues_; }

 private:
  AgentConfig cfg_;
  GpSarsa gp_;
  bool pending_valid_ = false;
  Tensor pending_belief_;
  int pending_action_ = 0;
  double pending_reward_ = 0.0;
  int dialogues_ = 0;
};

}  // namespace dialbench
