#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dialbench/rng.hpp"

namespace dialbench {

enum class ActType {
  kInform,
  kRequest,
  kConfirm,
  kNegate,
  kAffirm,
  kHello,
  kBye,
  kSelect,
  kRepeat,
};

std::string act_type_name(ActType t);

constexpr int kNoSlot = -1;
constexpr int kNoValue = -1;
/// Sentinel value index: the user does not care about this slot.
constexpr int kDontcare = -2;
constexpr int kNoEntity = -1;

/// One dialogue act at the semantic level. `slot`/`value` address an
/// informable slot; `requestable` addresses a requestable slot (user requests
/// and their confusions); `entity` marks a system offer. A system inform with
/// entity == kNoEntity and no slot is "no matching entity".
struct DialogueAct {
  ActType type = ActType::kHello;
  int slot = kNoSlot;
  int value = kNoValue;
  int requestable = kNoSlot;
  int entity = kNoEntity;

  bool operator==(const DialogueAct&) const = default;
};

struct Ontology {
  struct Slot {
    std::string name;
    std::vector<std::string> values;
  };
  struct Entity {
    std::vector<int> values;                 // one value index per informable slot
    std::vector<std::string> requestables;   // one string per requestable slot
  };

  std::vector<Slot> informable;
  std::vector<std::string> requestable;
  std::vector<Entity> entities;

  int num_informable() const { return static_cast<int>(informable.size()); }
  int num_requestable() const { return static_cast<int>(requestable.size()); }
  int num_entities() const { return static_cast<int>(entities.size()); }

  /// Constraints are slot -> value index; kDontcare entries match anything.
  bool entity_matches(int entity, const std::map<int, int>& constraints) const;
  std::vector<int> matching_entities(const std::map<int, int>& constraints) const;

  /// Throws ConfigError unless well-formed: named slots with >= 2 values,
  /// >= 1 entity, every entity value within its slot's range, requestable
  /// strings per entity.
  void validate() const;
};

/// The built-in benchmark domain: 3 informable slots (6, 5 and 4 values),
/// 2 requestable slots, 30 entities covering every individual value.
Ontology default_ontology();

/// JSON round-trip for the documented ontology schema:
///   {"informable": [{"name":..., "values":[...]}, ...],
///    "requestable": [...],
///    "entities": [{"values": {slot:value,...}, "requestables": {slot:text}}]}
Ontology ontology_from_json(const std::string& text);
std::string ontology_to_json(const Ontology& ont);

struct UserGoal {
  std::map<int, int> constraints;  // informable slot -> concrete value index
  std::set<int> requests;          // requestable slot indices

  bool operator==(const UserGoal&) const = default;
};

/// Constraints over a random subset of slots (each kept w.p. 2/3, resampled
/// if empty), values uniform, rejection-sampled until some entity satisfies
/// them; each requestable slot requested w.p. 1/2. Throws ConfigError after
/// 100 failed satisfiability attempts.
UserGoal sample_goal(const Ontology& ont, Rng& rng);

/// What the user remembers across turns.
struct UserState {
  bool offered_ok = false;  // a goal-satisfying entity has been offered
  int offered_entity = kNoEntity;
  std::set<int> answered;      // requestable slots answered (for the right entity)
  std::set<int> communicated;  // constraint slots the user has stated
  DialogueAct last_user_act{ActType::kHello};
};

/// Deterministic rule-based user. Answers requests/selects from the goal
/// (dontcare for unconstrained slots), affirms or corrects confirms, reacts
/// to offers by requesting unanswered goal requests or closing with bye, and
/// treats hello as an open prompt (state a missing constraint, then missing
/// requests, then bye). `state` must be updated by the environment with
/// offer/answer bookkeeping before the call.
DialogueAct user_respond(const UserGoal& goal, const Ontology& ont,
                         const DialogueAct& system_act, UserState& state,
                         Rng& rng);

struct ScoredAct {
  DialogueAct act;
  double confidence = 0.0;
};
using NBestList = std::vector<ScoredAct>;

struct ChannelConfig {
  double error_rate = 0.0;      // probability the top hypothesis is confused
  int n_best_max = 2;
  double value_sub_prob = 0.7;  // within a confusion: value vs act-type swap
  double keep_true_prob = 0.7;  // chance the true act survives at rank 2
};

/// Semantic-error channel. With probability 1 - error_rate the true act is
/// the single hypothesis at confidence 0.9 + 0.1u. Otherwise a confused act
/// (value substituted within the slot w.p. value_sub_prob when the act
/// carries a value, else act-type substituted) ranks first at 0.5 + 0.45u,
/// and the true act survives at rank 2 w.p. keep_true_prob with confidence
/// (1 - c1)(0.3 + 0.6u). Confidences therefore sum to <= 1 in rank order.
NBestList confuse(const DialogueAct& act, const ChannelConfig& cfg,
                  const Ontology& ont, Rng& rng);

}  // namespace dialbench
