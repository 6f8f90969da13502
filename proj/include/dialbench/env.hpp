#pragma once

#include <string>
#include <vector>

#include "dialbench/dialogue.hpp"
#include "dialbench/tensor.hpp"

namespace dialbench {

/// Belief over the dialogue state. Each informable slot has a block
/// [unknown, dontcare, v_0, ..., v_{m-1}] that stays normalized; requestable
/// slots carry a marginal request probability.
struct BeliefState {
  std::vector<std::vector<double>> slots;
  std::vector<double> request_prob;
  int last_summary = -1;  // last system summary action taken, -1 before any
  int turn = 0;

  static BeliefState uniform(const Ontology& ont);

  /// Top bin of a slot block. `include_unknown=false` restricts to
  /// [dontcare, values...]; ties break to the lower bin index.
  int top_bin(int slot, bool include_unknown) const;
  double top_prob(int slot, bool include_unknown) const;
};

/// Bin indices within a slot block.
constexpr int kBinUnknown = 0;
constexpr int kBinDontcare = 1;
constexpr int kBinFirstValue = 2;
int bin_of_value(int value);  // kDontcare -> 1, real value v -> 2 + v
int value_of_bin(int bin);    // inverse; kBinUnknown has no value

/// Focus update from an N-best list. Per slot, evidence mass E(v) is the
/// total confidence of hypotheses asserting slot=v (informs, negates with a
/// corrective value, and affirms resolved against `last_system_act` when it
/// was a confirm); the block becomes E(v) + (1 - sum E) * old. Request
/// probabilities combine request evidence by noisy-or and decay by 0.9 on
/// silence. The turn counter and one-hot features are handled by the env.
void belief_update(BeliefState& belief, const NBestList& nbest,
                   const DialogueAct& last_system_act, const Ontology& ont);

/// Summary action space: request/confirm/select per informable slot, then
/// inform (offer by belief constraints), inform-alternatives, repeat,
/// request-more, bye. 3 slots -> 14 actions.
int num_summary_actions(const Ontology& ont);
std::string summary_action_name(const Ontology& ont, int action);
int summary_request(const Ontology& ont, int slot);
int summary_confirm(const Ontology& ont, int slot);
int summary_select(const Ontology& ont, int slot);
int summary_inform(const Ontology& ont);
int summary_inform_alternatives(const Ontology& ont);
int summary_repeat(const Ontology& ont);
int summary_reqmore(const Ontology& ont);
int summary_bye(const Ontology& ont);

/// Length of the vectorized belief consumed by the agents:
/// slot blocks + request probabilities + one-hot last summary action + turn.
int belief_dim(const Ontology& ont);
Tensor vectorize_belief(const BeliefState& belief, const Ontology& ont,
                        int max_turns);

struct EnvConfig {
  ChannelConfig channel;
  double reward_success = 20.0;
  double reward_per_turn = -1.0;
  int max_turns = 25;
};

struct StepResult {
  Tensor belief;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  int turn = 0;
};

/// Goal-driven slot-filling dialogue environment. One episode: reset() draws
/// a user goal; step() takes a summary action, expands it against the belief
/// and database, runs the user and the error channel, and updates the belief.
/// Reward is reward_per_turn each step plus reward_success when the episode
/// ends successfully (a goal-satisfying entity was offered and every goal
/// request answered). Episodes end on either side saying bye or at max_turns.
class DialogueEnv {
 public:
  DialogueEnv(Ontology ont, EnvConfig cfg);

  Tensor reset(Rng& rng);
  /// Deterministic-goal reset for scripted traces.
  Tensor reset_with_goal(const UserGoal& goal);
  StepResult step(int summary_action, Rng& rng);

  bool done() const { return done_; }
  bool success() const { return success_; }
  int turn() const { return turn_; }
  int num_actions() const { return num_summary_actions(ont_); }
  int observation_dim() const { return belief_dim(ont_); }
  const Ontology& ontology() const { return ont_; }
  const EnvConfig& config() const { return cfg_; }
  const UserGoal& goal() const { return goal_; }
  const BeliefState& belief() const { return belief_; }
  const UserState& user() const { return user_; }

  /// The full system act a summary action expands to in the current state.
  DialogueAct expand_summary(int action) const;

 private:
  DialogueAct offer_act(bool alternatives) const;
  void note_offer(const DialogueAct& act);
  bool goal_reached() const;
  StepResult finish(double reward);

  Ontology ont_;
  EnvConfig cfg_;
  BeliefState belief_;
  UserGoal goal_;
  UserState user_;
  DialogueAct last_system_{ActType::kHello};
  int last_offered_ = kNoEntity;
  int turn_ = 0;
  bool done_ = true;
  bool success_ = false;
};

/// Hand-written rule policy used as the environment's solvability ceiling:
/// request the first ungrounded slot (top non-unknown probability < 0.7),
/// otherwise offer by constraints. Never says bye; the user closes.
int oracle_policy_action(const Ontology& ont, const BeliefState& belief);

}  // namespace dialbench
