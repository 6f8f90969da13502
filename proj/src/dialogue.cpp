#include "dialbench/dialogue.hpp"

#include <algorithm>
#include <cstdio>

#include "dialbench/errors.hpp"
#include "json.hpp"

namespace dialbench {

std::string act_type_name(ActType t) {
  switch (t) {
    case ActType::kInform: return "inform";
    case ActType::kRequest: return "request";
    case ActType::kConfirm: return "confirm";
    case ActType::kNegate: return "negate";
    case ActType::kAffirm: return "affirm";
    case ActType::kHello: return "hello";
    case ActType::kBye: return "bye";
    case ActType::kSelect: return "select";
    case ActType::kRepeat: return "repeat";
  }
  return "unknown";
}

bool Ontology::entity_matches(int entity,
                              const std::map<int, int>& constraints) const {
  const Entity& e = entities.at(entity);
  for (const auto& [slot, value] : constraints) {
    if (value == kDontcare) continue;
    if (e.values.at(slot) != value) return false;
  }
  return true;
}

std::vector<int> Ontology::matching_entities(
    const std::map<int, int>& constraints) const {
  std::vector<int> out;
  for (int i = 0; i < num_entities(); ++i) {
    if (entity_matches(i, constraints)) out.push_back(i);
  }
  return out;
}

void Ontology::validate() const {
  if (informable.empty()) throw ConfigError("ontology needs informable slots");
  if (entities.empty()) throw ConfigError("ontology needs at least one entity");
  for (const Slot& s : informable) {
    if (s.name.empty()) throw ConfigError("informable slot without a name");
    if (s.values.size() < 2) {
      throw ConfigError("slot " + s.name + " needs at least two values");
    }
  }
  for (const Entity& e : entities) {
    if (static_cast<int>(e.values.size()) != num_informable()) {
      throw ConfigError("entity with wrong number of slot values");
    }
    for (int s = 0; s < num_informable(); ++s) {
      if (e.values[s] < 0 ||
          e.values[s] >= static_cast<int>(informable[s].values.size())) {
        throw ConfigError("entity value outside slot " + informable[s].name);
      }
    }
    if (static_cast<int>(e.requestables.size()) != num_requestable()) {
      throw ConfigError("entity with wrong number of requestable values");
    }
  }
}

Ontology default_ontology() {
  Ontology ont;
  ont.informable = {
      {"food", {"british", "chinese", "french", "indian", "italian", "thai"}},
      {"area", {"centre", "east", "north", "south", "west"}},
      {"pricerange", {"cheap", "moderate", "expensive", "luxury"}},
  };
  ont.requestable = {"phone", "postcode"};
  // (i mod 6, i mod 5, i mod 4) are pairwise distinct for i < lcm(6,5,4) = 60
  // and cycle through every value of every slot within the first 30 rows.
  for (int i = 0; i < 30; ++i) {
    char phone[16];
    char postcode[16];
    std::snprintf(phone, sizeof(phone), "555-01%02d", i);
    std::snprintf(postcode, sizeof(postcode), "PC%02d", i);
    ont.entities.push_back({{i % 6, i % 5, i % 4}, {phone, postcode}});
  }
  ont.validate();
  return ont;
}

Ontology ontology_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ontology JSON parse failure: ") + e.what());
  }
  Ontology ont;
  try {
    for (const auto& s : j.at("informable")) {
      Ontology::Slot slot;
      slot.name = s.at("name").get<std::string>();
      for (const auto& v : s.at("values")) slot.values.push_back(v.get<std::string>());
      ont.informable.push_back(std::move(slot));
    }
    for (const auto& r : j.at("requestable")) {
      ont.requestable.push_back(r.get<std::string>());
    }
    auto slot_index = [&](const std::string& name) {
      for (int i = 0; i < ont.num_informable(); ++i) {
        if (ont.informable[i].name == name) return i;
      }
      throw ConfigError("entity references unknown slot " + name);
    };
    auto value_index = [&](int slot, const std::string& value) {
      const auto& vals = ont.informable[slot].values;
      auto it = std::find(vals.begin(), vals.end(), value);
      if (it == vals.end()) {
        throw ConfigError("entity value " + value + " not in slot " +
                          ont.informable[slot].name);
      }
      return static_cast<int>(it - vals.begin());
    };
    for (const auto& e : j.at("entities")) {
      Ontology::Entity ent;
      ent.values.assign(ont.num_informable(), 0);
      for (const auto& [name, value] : e.at("values").items()) {
        const int s = slot_index(name);
        ent.values[s] = value_index(s, value.get<std::string>());
      }
      ent.requestables.assign(ont.num_requestable(), "");
      if (e.contains("requestables")) {
        for (const auto& [name, value] : e.at("requestables").items()) {
          auto it = std::find(ont.requestable.begin(), ont.requestable.end(), name);
          if (it == ont.requestable.end()) {
            throw ConfigError("entity references unknown requestable " + name);
          }
          ent.requestables[it - ont.requestable.begin()] = value.get<std::string>();
        }
      }
      ont.entities.push_back(std::move(ent));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ontology JSON schema violation: ") + e.what());
  }
  ont.validate();
  return ont;
}

std::string ontology_to_json(const Ontology& ont) {
  nlohmann::json j;
  j["informable"] = nlohmann::json::array();
  for (const auto& s : ont.informable) {
    j["informable"].push_back({{"name", s.name}, {"values", s.values}});
  }
  j["requestable"] = ont.requestable;
  j["entities"] = nlohmann::json::array();
  for (const auto& e : ont.entities) {
    nlohmann::json values = nlohmann::json::object();
    for (int s = 0; s < ont.num_informable(); ++s) {
      values[ont.informable[s].name] = ont.informable[s].values[e.values[s]];
    }
    nlohmann::json req = nlohmann::json::object();
    for (int r = 0; r < ont.num_requestable(); ++r) {
      req[ont.requestable[r]] = e.requestables[r];
    }
    j["entities"].push_back({{"values", values}, {"requestables", req}});
  }
  return j.dump(2);
}

UserGoal sample_goal(const Ontology& ont, Rng& rng) {
  UserGoal goal;
  bool satisfiable = false;
  for (int attempt = 0; attempt < 100 && !satisfiable; ++attempt) {
    goal.constraints.clear();
    while (goal.constraints.empty()) {
      for (int s = 0; s < ont.num_informable(); ++s) {
        if (rng.uniform() < 2.0 / 3.0) {
          goal.constraints[s] =
              rng.uniform_int(static_cast<int>(ont.informable[s].values.size()));
        }
      }
    }
    satisfiable = !ont.matching_entities(goal.constraints).empty();
  }
  if (!satisfiable) {
    throw ConfigError("no satisfiable goal found in 100 attempts; "
                      "ontology database is too sparse");
  }
  for (int r = 0; r < ont.num_requestable(); ++r) {
    if (rng.uniform() < 0.5) goal.requests.insert(r);
  }
  return goal;
}

namespace {

/// The user's true value for a slot: the constraint if any, else dontcare.
int goal_truth(const UserGoal& goal, int slot) {
  auto it = goal.constraints.find(slot);
  return it == goal.constraints.end() ? kDontcare : it->second;
}

DialogueAct inform_truth(const UserGoal& goal, UserState& state, int slot) {
  DialogueAct act{ActType::kInform};
  act.slot = slot;
  act.value = goal_truth(goal, slot);
  if (goal.constraints.count(slot) > 0) state.communicated.insert(slot);
  return act;
}

int first_uncommunicated(const UserGoal& goal, const UserState& state) {
  for (const auto& [slot, value] : goal.constraints) {
    if (state.communicated.count(slot) == 0) return slot;
  }
  return kNoSlot;
}

int first_unanswered(const UserGoal& goal, const UserState& state) {
  for (int r : goal.requests) {
    if (state.answered.count(r) == 0) return r;
  }
  return kNoSlot;
}

/// User's move on an open prompt: ground a missing constraint, then chase
/// missing requests once a good entity is on the table, then wrap up.
DialogueAct open_prompt(const UserGoal& goal, UserState& state) {
  const int slot = first_uncommunicated(goal, state);
  if (slot != kNoSlot) return inform_truth(goal, state, slot);
  if (state.offered_ok) {
    const int req = first_unanswered(goal, state);
    if (req == kNoSlot) return DialogueAct{ActType::kBye};
    DialogueAct act{ActType::kRequest};
    act.requestable = req;
    return act;
  }
  if (!goal.constraints.empty()) {
    return inform_truth(goal, state, goal.constraints.begin()->first);
  }
  return DialogueAct{ActType::kHello};
}

}  // namespace

DialogueAct user_respond(const UserGoal& goal, const Ontology& ont,
                         const DialogueAct& system_act, UserState& state,
                         Rng& rng) {
  (void)rng;  // the rule user is deterministic; rng kept for interface parity
  DialogueAct act;
  switch (system_act.type) {
    case ActType::kRequest:
    case ActType::kSelect:
      act = inform_truth(goal, state, system_act.slot);
      break;
    case ActType::kConfirm: {
      const int truth = goal_truth(goal, system_act.slot);
      if (truth == system_act.value) {
        act = DialogueAct{ActType::kAffirm};
        if (truth != kDontcare) state.communicated.insert(system_act.slot);
      } else {
        act = DialogueAct{ActType::kNegate};
        act.slot = system_act.slot;
        act.value = truth;
        if (goal.constraints.count(system_act.slot) > 0) {
          state.communicated.insert(system_act.slot);
        }
      }
      break;
    }
    case ActType::kInform: {
      const bool good = system_act.entity != kNoEntity &&
                        ont.entity_matches(system_act.entity, goal.constraints);
      if (good) {
        const int req = first_unanswered(goal, state);
        if (req == kNoSlot) {
          act = DialogueAct{ActType::kBye};
        } else {
          act = DialogueAct{ActType::kRequest};
          act.requestable = req;
        }
      } else {
        // Wrong entity (or none found): the user rejects without volunteering
        // the violated constraint, so offers cannot substitute for actually
        // gathering the user's constraints.
        act = DialogueAct{ActType::kNegate};
      }
      break;
    }
    case ActType::kHello:
      act = open_prompt(goal, state);
      break;
    case ActType::kRepeat:
      return state.last_user_act;
    case ActType::kNegate:
    case ActType::kAffirm:
    case ActType::kBye:
      act = open_prompt(goal, state);
      break;
  }
  state.last_user_act = act;
  return act;
}

namespace {

DialogueAct substitute_value(const DialogueAct& act, const Ontology& ont,
                             Rng& rng) {
  const auto& values = ont.informable.at(act.slot).values;
  // Candidate pool: the slot's other values plus dontcare.
  std::vector<int> pool;
  for (int v = 0; v < static_cast<int>(values.size()); ++v) {
    if (v != act.value) pool.push_back(v);
  }
  if (act.value != kDontcare) pool.push_back(kDontcare);
  DialogueAct out = act;
  out.value = pool[rng.uniform_int(static_cast<int>(pool.size()))];
  return out;
}

DialogueAct substitute_type(const DialogueAct& act, const Ontology& ont,
                            Rng& rng) {
  static constexpr ActType kPool[] = {ActType::kInform, ActType::kRequest,
                                      ActType::kAffirm, ActType::kNegate,
                                      ActType::kHello};
  std::vector<ActType> candidates;
  for (ActType t : kPool) {
    if (t != act.type) candidates.push_back(t);
  }
  const ActType pick = candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
  DialogueAct out;
  out.type = pick;
  switch (pick) {
    case ActType::kInform:
    case ActType::kNegate: {
      out.slot = act.slot != kNoSlot ? act.slot
                                     : rng.uniform_int(ont.num_informable());
      out.value = act.value != kNoValue
                      ? act.value
                      : rng.uniform_int(
                            static_cast<int>(ont.informable[out.slot].values.size()));
      break;
    }
    case ActType::kRequest:
      out.requestable = act.requestable != kNoSlot
                            ? act.requestable
                            : rng.uniform_int(ont.num_requestable());
      break;
    default:
      break;  // affirm / hello carry no arguments
  }
  return out;
}

}  // namespace

NBestList confuse(const DialogueAct& act, const ChannelConfig& cfg,
                  const Ontology& ont, Rng& rng) {
  if (cfg.error_rate < 0.0 || cfg.error_rate >= 1.0) {
    throw ConfigError("channel error rate must lie in [0, 1)");
  }
  if (cfg.n_best_max < 1) throw ConfigError("n_best_max must be at least 1");

  NBestList out;
  if (rng.uniform() >= cfg.error_rate) {
    out.push_back({act, 0.9 + 0.1 * rng.uniform()});
    return out;
  }

  const bool can_sub_value = act.slot != kNoSlot && act.value != kNoValue;
  DialogueAct confused;
  if (can_sub_value && rng.uniform() < cfg.value_sub_prob) {
    confused = substitute_value(act, ont, rng);
  } else {
    confused = substitute_type(act, ont, rng);
  }
  const double c1 = 0.5 + 0.45 * rng.uniform();
  out.push_back({confused, c1});
  if (rng.uniform() < cfg.keep_true_prob) {
    out.push_back({act, (1.0 - c1) * (0.3 + 0.6 * rng.uniform())});
  }
  while (static_cast<int>(out.size()) > cfg.n_best_max) out.pop_back();
  return out;
}

}  // namespace dialbench
