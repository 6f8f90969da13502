#pragma once

#include <memory>
#include <string>

#include "dialbench/adam.hpp"
#include "dialbench/env.hpp"
#include "dialbench/network.hpp"
#include "dialbench/objectives.hpp"
#include "dialbench/replay.hpp"

namespace dialbench {

enum class AgentKind {
  kDqn,
  kBbqn,
  kAlphaBbqn,
  kDropout,
  kConcreteDropout,
  kBootstrapped,
  kGpSarsa,
};

std::string agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(const std::string& name);

struct AgentConfig {
  AgentKind kind = AgentKind::kDqn;
  int input_dim = 0;
  int num_actions = 0;
  std::vector<int> hidden = {130, 50};
  double gamma = 0.99;
  double learning_rate = 0.001;
  AdamConfig adam;
  int batch_size = 64;
  int replay_capacity = 10000;
  int train_every = 1;       // gradient steps per observed turn
  bool frozen_target = true; // false: bootstrap from the online network
  int target_update_every = 100;  // optimizer steps between target syncs
  double eps_start = 0.3;    // epsilon-greedy schedule (DQN only)
  double eps_end = 0.0;
  int training_budget = 4000;  // dialogues; drives the epsilon decay
  int mc_samples = 1;
  double alpha = 0.5;
  // Likelihood noise scale. The variational data term is a batch mean while
  // the KL carries the 1/M minibatch weight, so a scale of 1/sqrt(batch)
  // restores the classical sum-over-batch balance between the two.
  double sigma_lik = 0.125;
  GaussianPrior prior;
  double rho_init = -3.0;
  double dropout_rate = 0.1;
  double concrete_temperature = 0.1;
  int heads = 5;               // bootstrapped-agent head count
  double head_mask_prob = 1.0;
  bool thompson_per_episode = false;
  bool alpha_paper_literal = false;
  // GPSARSA
  double gp_sigma_obs = 5.0;
  double gp_prior_scale = 1.0;
  double gp_nu = -1.0;         // < 0: auto, 0.1 x running mean self-similarity
  int gp_dictionary_cap = 1500;

  void validate() const;
};

/// Greedy with probability 1-eps (ties to the lowest index), else uniform.
int select_egreedy(const Tensor& q, double eps, Rng& rng);
/// Argmax of one stochastic forward pass (weight sample or dropout mask).
/// `frozen` replays pre-drawn noise for per-episode sampling.
/// Throws ProtocolError when the network has no stochastic mode.
int select_thompson(const QNetwork& net, const Tensor& belief, Rng& rng,
                    const NoiseDraws* frozen = nullptr);
/// Greedy under a single bootstrap head.
int select_bootstrap(const QNetwork& net, const Tensor& belief, int head);

struct EpisodeLog {
  int turns = 0;
  bool success = false;
  double total_reward = 0.0;
  double mean_loss = 0.0;  // mean train-step objective during the episode
  int train_steps = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode(bool training, Rng& rng) = 0;
  virtual int act(const Tensor& belief, bool training, Rng& rng) = 0;
  /// Training-mode bookkeeping: store the transition and (when due) take one
  /// gradient / posterior update. Never called during evaluation.
  virtual void observe(const Transition& t, Rng& rng) = 0;
  virtual void end_episode(bool training) = 0;

  virtual const AgentConfig& config() const = 0;
  virtual double last_mean_loss() const { return 0.0; }
  virtual int last_train_steps() const { return 0; }

  /// Versioned JSON checkpoint of everything needed to resume or evaluate.
  virtual std::string checkpoint() const = 0;
  virtual void restore(const std::string& text) = 0;
};

/// Builds the agent for `cfg.kind`, seeding initialization deterministically.
std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, std::uint64_t seed);

/// One dialogue: alternate action selection and env.step, in training mode
/// feeding transitions to the agent. Evaluation acts greedily and leaves all
/// agent state untouched.
EpisodeLog run_episode(Agent& agent, DialogueEnv& env, bool training, Rng& rng);

/// The DQN family (plain, variational, alpha, dropout, concrete, bootstrap).
class DqnFamilyAgent : public Agent {
 public:
  DqnFamilyAgent(AgentConfig cfg, std::uint64_t seed);

  void begin_episode(bool training, Rng& rng) override;
  int act(const Tensor& belief, bool training, Rng& rng) override;
  void observe(const Transition& t, Rng& rng) override;
  void end_episode(bool training) override;

  const AgentConfig& config() const override { return cfg_; }
  double last_mean_loss() const override { return last_mean_loss_; }
  int last_train_steps() const override { return last_train_steps_; }

  std::string checkpoint() const override;
  void restore(const std::string& text) override;

  double epsilon_now() const;
  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int update_count() const { return updates_; }
  int dialogues_trained() const { return dialogues_; }
  int episode_head() const { return episode_head_; }

  /// One gradient step on a sampled batch (exposed for the fixed-point tests).
  double train_step(Rng& rng);

  /// The network architecture an agent config induces.
  static NetworkConfig network_config(const AgentConfig& cfg);

 private:
  AgentConfig cfg_;
  QNetwork online_;
  QNetwork target_;
  AdamState adam_;
  ReplayBuffer buffer_;
  int updates_ = 0;
  int dialogues_ = 0;
  int turn_counter_ = 0;
  int episode_head_ = 0;
  NoiseDraws episode_noise_;
  bool episode_training_ = false;
  double episode_loss_sum_ = 0.0;
  int episode_steps_ = 0;
  double last_mean_loss_ = 0.0;
  int last_train_steps_ = 0;
};

}  // namespace dialbench
