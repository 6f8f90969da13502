#include <cmath>
#include <vector>

#include "dialbench/env.hpp"
#include "dialbench/errors.hpp"
#include "doctest.h"

using namespace dialbench;

namespace {

NBestList single(DialogueAct act, double conf) { return {{act, conf}}; }

double block_sum(const BeliefState& b, int slot) {
  double s = 0.0;
  for (double p : b.slots[slot]) s += p;
  return s;
}

}  // namespace

TEST_CASE("the initial belief is uniform and normalized") {
  const Ontology ont = default_ontology();
  const BeliefState b = BeliefState::uniform(ont);
  REQUIRE(b.slots.size() == 3);
  for (int s = 0; s < 3; ++s) {
    const std::size_t bins = ont.informable[s].values.size() + 2;
    REQUIRE(b.slots[s].size() == bins);
    for (double p : b.slots[s])
      CHECK(p == doctest::Approx(1.0 / bins).epsilon(1e-12));
  }
  for (double p : b.request_prob) CHECK(p == 0.0);
  CHECK(b.turn == 0);
  CHECK(b.last_summary == -1);
}

TEST_CASE("bin arithmetic round-trips values and dontcare") {
  CHECK(bin_of_value(kDontcare) == kBinDontcare);
  CHECK(bin_of_value(0) == kBinFirstValue);
  CHECK(bin_of_value(3) == kBinFirstValue + 3);
  CHECK(value_of_bin(kBinDontcare) == kDontcare);
  CHECK(value_of_bin(kBinFirstValue + 3) == 3);
}

TEST_CASE("an empty n-best list leaves a fresh belief unchanged") {
  const Ontology ont = default_ontology();
  BeliefState b = BeliefState::uniform(ont);
  const BeliefState before = b;
  belief_update(b, {}, DialogueAct{ActType::kHello}, ont);
  CHECK(b.slots == before.slots);
  CHECK(b.request_prob == before.request_prob);
}

TEST_CASE("a fully confident inform concentrates the whole block") {
  const Ontology ont = default_ontology();
  BeliefState b = BeliefState::uniform(ont);
  DialogueAct inform{ActType::kInform, 0, 2};
  belief_update(b, single(inform, 1.0), DialogueAct{ActType::kHello}, ont);
  // E(v2) = 1, so p' = E + (1 - 1) * old: all mass on the value bin.
  CHECK(b.slots[0][bin_of_value(2)] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t bin = 0; bin < b.slots[0].size(); ++bin) {
    if (bin != static_cast<std::size_t>(bin_of_value(2)))
      CHECK(b.slots[0][bin] == doctest::Approx(0.0).epsilon(1e-12));
  }
  // Other slots untouched.
  CHECK(b.slots[1] == BeliefState::uniform(ont).slots[1]);
}

TEST_CASE("two contradictory informs follow the focus recurrence exactly") {
  const Ontology ont = default_ontology();
  BeliefState b = BeliefState::uniform(ont);
  const int bins = static_cast<int>(b.slots[0].size());  // 8 for the 6-value slot
  const double u = 1.0 / bins;

  belief_update(b, single({ActType::kInform, 0, 0}, 0.6),
                DialogueAct{ActType::kHello}, ont);
  // p1(v0) = 0.6 + 0.4 * u, everything else 0.4 * u.
  CHECK(b.slots[0][bin_of_value(0)] ==
        doctest::Approx(0.6 + 0.4 * u).epsilon(1e-12));
  CHECK(b.slots[0][kBinUnknown] == doctest::Approx(0.4 * u).epsilon(1e-12));

  belief_update(b, single({ActType::kInform, 0, 1}, 0.6),
                DialogueAct{ActType::kHello}, ont);
  // p2(v1) = 0.6 + 0.4 * (0.4 u); p2(v0) = 0.4 * (0.6 + 0.4 u).
  CHECK(b.slots[0][bin_of_value(1)] ==
        doctest::Approx(0.6 + 0.4 * 0.4 * u).epsilon(1e-12));
  CHECK(b.slots[0][bin_of_value(0)] ==
        doctest::Approx(0.4 * (0.6 + 0.4 * u)).epsilon(1e-12));
  CHECK(block_sum(b, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("an affirm resolves against the system's pending confirm") {
  const Ontology ont = default_ontology();
  BeliefState b = BeliefState::uniform(ont);
  DialogueAct confirm{ActType::kConfirm, 1, 3};
  belief_update(b, single(DialogueAct{ActType::kAffirm}, 0.8), confirm, ont);
  const double u = 1.0 / static_cast<double>(b.slots[1].size());
  CHECK(b.slots[1][bin_of_value(3)] ==
        doctest::Approx(0.8 + 0.2 * u).epsilon(1e-12));
}

TEST_CASE("request evidence accumulates by noisy-or and decays on silence") {
  const Ontology ont = default_ontology();
  BeliefState b = BeliefState::uniform(ont);
  DialogueAct req{ActType::kRequest};
  req.requestable = 0;
  belief_update(b, single(req, 0.5), DialogueAct{ActType::kHello}, ont);
  CHECK(b.request_prob[0] == doctest::Approx(0.5).epsilon(1e-12));
  belief_update(b, single(req, 0.5), DialogueAct{ActType::kHello}, ont);
  CHECK(b.request_prob[0] == doctest::Approx(0.75).epsilon(1e-12));
  // A turn with no request evidence decays the marginal.
  belief_update(b, single({ActType::kInform, 0, 1}, 0.3),
                DialogueAct{ActType::kHello}, ont);
  CHECK(b.request_prob[0] == doctest::Approx(0.675).epsilon(1e-12));
}

TEST_CASE("the summary action space is laid out as documented") {
  const Ontology ont = default_ontology();
  CHECK(num_summary_actions(ont) == 14);
  CHECK(summary_request(ont, 0) == 0);
  CHECK(summary_confirm(ont, 0) == 3);
  CHECK(summary_select(ont, 0) == 6);
  CHECK(summary_inform(ont) == 9);
  CHECK(summary_inform_alternatives(ont) == 10);
  CHECK(summary_repeat(ont) == 11);
  CHECK(summary_reqmore(ont) == 12);
  CHECK(summary_bye(ont) == 13);
  CHECK(summary_action_name(ont, 0) == "request_food");
  CHECK(summary_action_name(ont, 13) == "bye");
}

TEST_CASE("the observation vector has the documented layout and dimension") {
  const Ontology ont = default_ontology();
  // Blocks 8+7+6 = 21, requests 2, one-hot action 14, turn 1 -> 38.
  CHECK(belief_dim(ont) == 38);
  BeliefState b = BeliefState::uniform(ont);
  b.request_prob[1] = 0.5;
  b.last_summary = 3;
  b.turn = 5;
  const Tensor v = vectorize_belief(b, ont, 25);
  REQUIRE(static_cast<int>(v.size()) == 38);
  CHECK(v[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(v[22] == 0.5);                         // request marginal block
  CHECK(v[23 + 3] == 1.0);                     // one-hot of last action
  CHECK(v[37] == doctest::Approx(5.0 / 25.0).epsilon(1e-12));
}

TEST_CASE("reset draws satisfiable goals and returns a normalized belief") {
  DialogueEnv env(default_ontology(), {});
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const Tensor obs = env.reset(rng);
    CHECK(static_cast<int>(obs.size()) == env.observation_dim());
    CHECK_FALSE(env.ontology().matching_entities(env.goal().constraints).empty());
    for (int s = 0; s < 3; ++s)
      CHECK(block_sum(env.belief(), s) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("an immediate bye fails with a single turn penalty") {
  DialogueEnv env(default_ontology(), {});
  Rng rng(22);
  env.reset(rng);
  const StepResult r = env.step(summary_bye(env.ontology()), rng);
  CHECK(r.done);
  CHECK_FALSE(r.success);
  CHECK(r.reward == -1.0);
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(0, rng), ProtocolError);
}

TEST_CASE("stepping before reset is a protocol error") {
  DialogueEnv env(default_ontology(), {});
  Rng rng(23);
  CHECK_THROWS_AS(env.step(0, rng), ProtocolError);
}

TEST_CASE("a scripted optimal dialogue nets reward 15 in five turns") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.0;
  DialogueEnv env(ont, cfg);

  UserGoal goal;
  goal.constraints = {{0, 1}, {1, 2}, {2, 3}};
  goal.requests = {0};
  REQUIRE_FALSE(ont.matching_entities(goal.constraints).empty());
  env.reset_with_goal(goal);

  Rng rng(24);
  double total = 0.0;
  // Ground each slot, then offer; the user asks for the phone; answer it.
  for (int action : {summary_request(ont, 0), summary_request(ont, 1),
                     summary_request(ont, 2), summary_inform(ont)}) {
    const StepResult r = env.step(action, rng);
    total += r.reward;
    CHECK_FALSE(r.done);
  }
  const StepResult last = env.step(summary_inform(ont), rng);
  total += last.reward;
  CHECK(last.done);
  CHECK(last.success);
  CHECK(last.turn == 5);
  CHECK(total == doctest::Approx(-5.0 + 20.0).epsilon(1e-12));
}

TEST_CASE("never saying bye runs into the turn cap and fails") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.0;
  DialogueEnv env(ont, cfg);
  Rng rng(25);
  env.reset(rng);
  int turns = 0;
  while (!env.done()) {
    const StepResult r = env.step(summary_request(ont, 0), rng);
    turns = r.turn;
    REQUIRE(turns <= cfg.max_turns);
  }
  CHECK(turns == cfg.max_turns);
  CHECK_FALSE(env.success());
}

TEST_CASE("belief blocks stay normalized along random trajectories") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.3;
  DialogueEnv env(ont, cfg);
  Rng rng(26);
  for (int ep = 0; ep < 30; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      env.step(static_cast<int>(rng.uniform_int(env.num_actions())), rng);
      for (int s = 0; s < 3; ++s)
        CHECK(block_sum(env.belief(), s) == doctest::Approx(1.0).epsilon(1e-9));
      for (double p : env.belief().request_prob) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
}

TEST_CASE("episodes are reproducible under a fixed seed") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.3;
  const auto run = [&](std::uint64_t seed) {
    DialogueEnv env(ont, cfg);
    Rng rng(seed);
    std::vector<double> trace;
    for (int ep = 0; ep < 5; ++ep) {
      Tensor obs = env.reset(rng);
      while (!env.done()) {
        const int a = static_cast<int>(rng.uniform_int(env.num_actions()));
        const StepResult r = env.step(a, rng);
        trace.push_back(r.reward);
        for (std::size_t i = 0; i < r.belief.size(); ++i)
          trace.push_back(r.belief[i]);
      }
    }
    return trace;
  };
  CHECK(run(99) == run(99));
}

TEST_CASE("expand_summary grounds actions against the current belief") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.0;
  DialogueEnv env(ont, cfg);
  UserGoal goal;
  goal.constraints = {{0, 1}};
  env.reset_with_goal(goal);

  const DialogueAct req = env.expand_summary(summary_request(ont, 2));
  CHECK(req.type == ActType::kRequest);
  CHECK(req.slot == 2);

  Rng rng(27);
  env.step(summary_request(ont, 0), rng);  // user informs slot 0 = value 1
  const DialogueAct confirm = env.expand_summary(summary_confirm(ont, 0));
  CHECK(confirm.type == ActType::kConfirm);
  CHECK(confirm.slot == 0);
  CHECK(confirm.value == 1);  // the belief's top value for the slot

  const DialogueAct offer = env.expand_summary(summary_inform(ont));
  CHECK(offer.type == ActType::kInform);
  CHECK(offer.entity != kNoEntity);
  CHECK(ont.entity_matches(offer.entity, {{0, 1}}));

  const DialogueAct bye = env.expand_summary(summary_bye(ont));
  CHECK(bye.type == ActType::kBye);
}

TEST_CASE("the oracle policy solves a clean channel at least 95 percent") {
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.0;
  DialogueEnv env(ont, cfg);
  Rng rng(28);
  int wins = 0;
  const int n = 200;
  for (int ep = 0; ep < n; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      env.step(oracle_policy_action(ont, env.belief()), rng);
    }
    if (env.success()) ++wins;
  }
  CHECK(wins >= static_cast<int>(0.95 * n));
}

TEST_CASE("a uniform-random policy stays under the pinned domain floor") {
  // The cooperative user makes blind play land around 0.30 success on this
  // domain (measured once over 10k episodes); pinned at 0.4 with headroom so
  // the floor stays far below both the rule policy and any trained agent.
  const Ontology ont = default_ontology();
  EnvConfig cfg;
  cfg.channel.error_rate = 0.0;
  DialogueEnv env(ont, cfg);
  Rng rng(29);
  int wins = 0;
  const int n = 1000;
  for (int ep = 0; ep < n; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      env.step(static_cast<int>(rng.uniform_int(env.num_actions())), rng);
    }
    if (env.success()) ++wins;
  }
  CHECK(wins < static_cast<int>(0.4 * n));
}

TEST_CASE("out-of-range summary actions are rejected") {
  DialogueEnv env(default_ontology(), {});
  Rng rng(30);
  env.reset(rng);
  CHECK_THROWS_AS(env.step(-1, rng), ProtocolError);
  CHECK_THROWS_AS(env.step(env.num_actions(), rng), ProtocolError);
}

TEST_CASE("environment configuration is validated") {
  EnvConfig cfg;
  cfg.max_turns = 0;
  CHECK_THROWS_AS(DialogueEnv(default_ontology(), cfg), ConfigError);
}
