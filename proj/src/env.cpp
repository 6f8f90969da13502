#include "dialbench/env.hpp"

#include <algorithm>
#include <cmath>

#include "dialbench/errors.hpp"

namespace dialbench {

BeliefState BeliefState::uniform(const Ontology& ont) {
  BeliefState b;
  for (const auto& slot : ont.informable) {
    const int bins = kBinFirstValue + static_cast<int>(slot.values.size());
    b.slots.push_back(std::vector<double>(bins, 1.0 / bins));
  }
  b.request_prob.assign(ont.num_requestable(), 0.0);
  return b;
}

int BeliefState::top_bin(int slot, bool include_unknown) const {
  const auto& block = slots.at(slot);
  int best = include_unknown ? 0 : kBinDontcare;
  for (int i = best + 1; i < static_cast<int>(block.size()); ++i) {
    if (block[i] > block[best]) best = i;
  }
  return best;
}

double BeliefState::top_prob(int slot, bool include_unknown) const {
  return slots.at(slot)[top_bin(slot, include_unknown)];
}

int bin_of_value(int value) {
  if (value == kDontcare) return kBinDontcare;
  if (value < 0) throw ConfigError("no belief bin for this value sentinel");
  return kBinFirstValue + value;
}

int value_of_bin(int bin) {
  if (bin == kBinDontcare) return kDontcare;
  if (bin < kBinFirstValue) throw ConfigError("bin has no associated value");
  return bin - kBinFirstValue;
}

void belief_update(BeliefState& belief, const NBestList& nbest,
                   const DialogueAct& last_system_act, const Ontology& ont) {
  const int num_slots = ont.num_informable();
  // Per-slot evidence over bins, plus per-requestable request evidence.
  std::vector<std::vector<double>> evidence;
  for (int s = 0; s < num_slots; ++s) {
    evidence.push_back(std::vector<double>(belief.slots[s].size(), 0.0));
  }
  std::vector<double> request_evidence(ont.num_requestable(), 0.0);

  for (const ScoredAct& h : nbest) {
    const DialogueAct& a = h.act;
    switch (a.type) {
      case ActType::kInform:
      case ActType::kNegate:
        if (a.slot >= 0 && a.slot < num_slots && a.value != kNoValue) {
          evidence[a.slot][bin_of_value(a.value)] += h.confidence;
        }
        break;
      case ActType::kAffirm:
        if (last_system_act.type == ActType::kConfirm &&
            last_system_act.slot >= 0 && last_system_act.value != kNoValue) {
          evidence[last_system_act.slot][bin_of_value(last_system_act.value)] +=
              h.confidence;
        }
        break;
      case ActType::kRequest:
        if (a.requestable >= 0 && a.requestable < ont.num_requestable()) {
          request_evidence[a.requestable] += h.confidence;
        }
        break;
      default:
        break;
    }
  }

  for (int s = 0; s < num_slots; ++s) {
    double total = 0.0;
    for (double e : evidence[s]) total += e;
    if (total > 1.0) {  // defensive: confidences sum to <= 1 by construction
      for (double& e : evidence[s]) e /= total;
      total = 1.0;
    }
    auto& block = belief.slots[s];
    for (int b = 0; b < static_cast<int>(block.size()); ++b) {
      block[b] = evidence[s][b] + (1.0 - total) * block[b];
    }
  }
  for (int r = 0; r < ont.num_requestable(); ++r) {
    double& p = belief.request_prob[r];
    const double c = std::min(request_evidence[r], 1.0);
    p = c > 0.0 ? 1.0 - (1.0 - p) * (1.0 - c) : 0.9 * p;
  }
}

int num_summary_actions(const Ontology& ont) { return 3 * ont.num_informable() + 5; }
int summary_request(const Ontology&, int slot) { return slot; }
int summary_confirm(const Ontology& ont, int slot) {
  return ont.num_informable() + slot;
}
int summary_select(const Ontology& ont, int slot) {
  return 2 * ont.num_informable() + slot;
}
int summary_inform(const Ontology& ont) { return 3 * ont.num_informable(); }
int summary_inform_alternatives(const Ontology& ont) {
  return 3 * ont.num_informable() + 1;
}
int summary_repeat(const Ontology& ont) { return 3 * ont.num_informable() + 2; }
int summary_reqmore(const Ontology& ont) { return 3 * ont.num_informable() + 3; }
int summary_bye(const Ontology& ont) { return 3 * ont.num_informable() + 4; }

std::string summary_action_name(const Ontology& ont, int action) {
  const int n = ont.num_informable();
  if (action < 0 || action >= num_summary_actions(ont)) {
    throw ConfigError("summary action index out of range");
  }
  if (action < n) return "request_" + ont.informable[action].name;
  if (action < 2 * n) return "confirm_" + ont.informable[action - n].name;
  if (action < 3 * n) return "select_" + ont.informable[action - 2 * n].name;
  switch (action - 3 * n) {
    case 0: return "inform";
    case 1: return "inform_alternatives";
    case 2: return "repeat";
    case 3: return "reqmore";
    default: return "bye";
  }
}

int belief_dim(const Ontology& ont) {
  int dim = 0;
  for (const auto& slot : ont.informable) {
    dim += kBinFirstValue + static_cast<int>(slot.values.size());
  }
  return dim + ont.num_requestable() + num_summary_actions(ont) + 1;
}

Tensor vectorize_belief(const BeliefState& belief, const Ontology& ont,
                        int max_turns) {
  Tensor v = Tensor::zeros({belief_dim(ont)});
  int i = 0;
  for (const auto& block : belief.slots) {
    for (double p : block) v[i++] = p;
  }
  for (double p : belief.request_prob) v[i++] = p;
  const int base = i;
  if (belief.last_summary >= 0) v[base + belief.last_summary] = 1.0;
  i += num_summary_actions(ont);
  v[i] = static_cast<double>(belief.turn) / max_turns;
  return v;
}

DialogueEnv::DialogueEnv(Ontology ont, EnvConfig cfg)
    : ont_(std::move(ont)), cfg_(cfg) {
  ont_.validate();
  if (cfg_.max_turns < 1) throw ConfigError("max_turns must be positive");
}

Tensor DialogueEnv::reset(Rng& rng) {
  return reset_with_goal(sample_goal(ont_, rng));
}

Tensor DialogueEnv::reset_with_goal(const UserGoal& goal) {
  if (ont_.matching_entities(goal.constraints).empty()) {
    throw ConfigError("reset goal is unsatisfiable in this database");
  }
  goal_ = goal;
  belief_ = BeliefState::uniform(ont_);
  user_ = UserState{};
  last_system_ = DialogueAct{ActType::kHello};
  last_offered_ = kNoEntity;
  turn_ = 0;
  done_ = false;
  success_ = false;
  return vectorize_belief(belief_, ont_, cfg_.max_turns);
}

DialogueAct DialogueEnv::offer_act(bool alternatives) const {
  // Constraints read off the belief mode; unknown and dontcare are wildcards.
  std::map<int, int> constraints;
  for (int s = 0; s < ont_.num_informable(); ++s) {
    const int bin = belief_.top_bin(s, true);
    if (bin >= kBinFirstValue) constraints[s] = value_of_bin(bin);
  }
  const std::vector<int> matches = ont_.matching_entities(constraints);
  DialogueAct act{ActType::kInform};
  if (matches.empty()) return act;  // entity == kNoEntity: nothing fits
  act.entity = matches.front();
  if (alternatives) {
    for (int e : matches) {
      if (e != last_offered_) {
        act.entity = e;
        break;
      }
    }
  }
  return act;
}

DialogueAct DialogueEnv::expand_summary(int action) const {
  const int n = ont_.num_informable();
  if (action < 0 || action >= num_summary_actions(ont_)) {
    throw ProtocolError("summary action index out of range");
  }
  if (action < n) {
    DialogueAct act{ActType::kRequest};
    act.slot = action;
    return act;
  }
  if (action < 2 * n) {
    DialogueAct act{ActType::kConfirm};
    act.slot = action - n;
    act.value = value_of_bin(belief_.top_bin(act.slot, false));
    return act;
  }
  if (action < 3 * n) {
    // Select: present the runner-up among the slot's concrete values.
    DialogueAct act{ActType::kSelect};
    act.slot = action - 2 * n;
    const auto& block = belief_.slots[act.slot];
    int best = kBinFirstValue;
    int second = kBinFirstValue + 1;
    for (int b = kBinFirstValue; b < static_cast<int>(block.size()); ++b) {
      if (block[b] > block[best]) best = b;
    }
    if (second == best) second = kBinFirstValue;
    for (int b = kBinFirstValue; b < static_cast<int>(block.size()); ++b) {
      if (b != best && block[b] > block[second]) second = b;
    }
    act.value = value_of_bin(second);
    return act;
  }
  switch (action - 3 * n) {
    case 0: return offer_act(false);
    case 1: return offer_act(true);
    case 2: return turn_ == 0 ? DialogueAct{ActType::kHello} : last_system_;
    case 3: return DialogueAct{ActType::kHello};
    default: return DialogueAct{ActType::kBye};
  }
}

void DialogueEnv::note_offer(const DialogueAct& act) {
  if (act.type != ActType::kInform || act.entity == kNoEntity) return;
  last_offered_ = act.entity;
  if (!ont_.entity_matches(act.entity, goal_.constraints)) return;
  user_.offered_ok = true;
  user_.offered_entity = act.entity;
  // The offer utterance carries values for every requestable slot the belief
  // says the user asked about; those requests are then settled.
  for (int r = 0; r < ont_.num_requestable(); ++r) {
    if (belief_.request_prob[r] > 0.5) {
      user_.answered.insert(r);
      belief_.request_prob[r] = 0.0;
    }
  }
}

bool DialogueEnv::goal_reached() const {
  if (!user_.offered_ok) return false;
  if (!ont_.entity_matches(user_.offered_entity, goal_.constraints)) return false;
  for (int r : goal_.requests) {
    if (user_.answered.count(r) == 0) return false;
  }
  return true;
}

StepResult DialogueEnv::finish(double reward) {
  done_ = true;
  success_ = goal_reached();
  StepResult out;
  out.belief = vectorize_belief(belief_, ont_, cfg_.max_turns);
  out.reward = reward + (success_ ? cfg_.reward_success : 0.0);
  out.done = true;
  out.success = success_;
  out.turn = turn_;
  return out;
}

StepResult DialogueEnv::step(int summary_action, Rng& rng) {
  if (done_) throw ProtocolError("step() on a finished episode; call reset()");
  ++turn_;
  const DialogueAct system = expand_summary(summary_action);
  belief_.last_summary = summary_action;
  belief_.turn = turn_;
  if (summary_action != summary_repeat(ont_)) last_system_ = system;

  if (system.type == ActType::kBye) return finish(cfg_.reward_per_turn);

  note_offer(system);
  const DialogueAct user = user_respond(goal_, ont_, system, user_, rng);
  if (user.type == ActType::kBye) return finish(cfg_.reward_per_turn);

  const NBestList nbest = confuse(user, cfg_.channel, ont_, rng);
  belief_update(belief_, nbest, system, ont_);

  if (turn_ >= cfg_.max_turns) return finish(cfg_.reward_per_turn);

  StepResult out;
  out.belief = vectorize_belief(belief_, ont_, cfg_.max_turns);
  out.reward = cfg_.reward_per_turn;
  out.done = false;
  out.success = false;
  out.turn = turn_;
  return out;
}

int oracle_policy_action(const Ontology& ont, const BeliefState& belief) {
  for (int s = 0; s < ont.num_informable(); ++s) {
    if (belief.top_prob(s, false) < 0.7) return summary_request(ont, s);
  }
  return summary_inform(ont);
}

}  // namespace dialbench
