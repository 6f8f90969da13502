#include "dialbench/agents.hpp"

#include <algorithm>
#include <cmath>

#include "dialbench/checkpoint.hpp"
#include "dialbench/errors.hpp"
#include "dialbench/gpsarsa.hpp"

namespace dialbench {

std::string agent_kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kBbqn: return "bbqn";
    case AgentKind::kAlphaBbqn: return "alpha-bbqn";
    case AgentKind::kDropout: return "dropout";
    case AgentKind::kConcreteDropout: return "concrete";
    case AgentKind::kBootstrapped: return "bootstrapped";
    case AgentKind::kGpSarsa: return "gpsarsa";
  }
  throw ConfigError("unknown agent kind");
}

AgentKind agent_kind_from_name(const std::string& name) {
  for (AgentKind k :
       {AgentKind::kDqn, AgentKind::kBbqn, AgentKind::kAlphaBbqn,
        AgentKind::kDropout, AgentKind::kConcreteDropout,
        AgentKind::kBootstrapped, AgentKind::kGpSarsa}) {
    if (agent_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown agent '" + name +
                    "' (expected dqn, bbqn, alpha-bbqn, dropout, concrete, "
                    "bootstrapped or gpsarsa)");
}

void AgentConfig::validate() const {
  if (input_dim <= 0 || num_actions <= 0) {
    throw ConfigError("agent needs positive input_dim and num_actions");
  }
  for (int w : hidden) {
    if (w <= 0) throw ConfigError("hidden widths must be positive");
  }
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (replay_capacity < batch_size) {
    throw ConfigError("replay capacity must hold at least one batch");
  }
  if (train_every < 1) throw ConfigError("train_every must be positive");
  if (target_update_every < 1) {
    throw ConfigError("target_update_every must be positive");
  }
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
  if (training_budget < 1) throw ConfigError("training budget must be positive");
  if (mc_samples < 1) throw ConfigError("mc_samples must be at least 1");
  if (sigma_lik <= 0.0) throw ConfigError("sigma_lik must be positive");
  if (heads < 1) throw ConfigError("head count must be positive");
  if (head_mask_prob < 0.0 || head_mask_prob > 1.0) {
    throw ConfigError("head_mask_prob must lie in [0, 1]");
  }
  if (kind == AgentKind::kAlphaBbqn && alpha <= 0.0) {
    throw ConfigError("alpha-bbqn requires alpha > 0");
  }
  if (kind == AgentKind::kDropout || kind == AgentKind::kConcreteDropout) {
    if (dropout_rate <= 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("dropout rate must lie strictly between 0 and 1");
    }
  }
  if (kind == AgentKind::kGpSarsa) {
    if (gp_sigma_obs <= 0.0) throw ConfigError("gp_sigma_obs must be positive");
    if (gp_prior_scale <= 0.0) throw ConfigError("gp_prior_scale must be positive");
    if (gp_dictionary_cap < 1) throw ConfigError("gp_dictionary_cap must be positive");
  }
}

namespace {

int argmax_lowest(const double* q, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

Tensor as_row(const Tensor& belief) {
  if (belief.rank() != 1) throw ShapeError("belief must be a rank-1 tensor");
  Tensor row = Tensor::zeros({1, static_cast<int>(belief.size())});
  for (std::size_t i = 0; i < belief.size(); ++i) row[i] = belief[i];
  return row;
}

}  // namespace

int select_egreedy(const Tensor& q, double eps, Rng& rng) {
  if (eps < 0.0 || eps > 1.0) throw ConfigError("epsilon must lie in [0, 1]");
  if (q.size() == 0) throw ShapeError("empty Q-vector");
  const int n = static_cast<int>(q.size());
  if (eps > 0.0 && rng.uniform() < eps) {
    return static_cast<int>(rng.uniform_int(n));
  }
  return argmax_lowest(q.data(), n);
}

int select_thompson(const QNetwork& net, const Tensor& belief, Rng& rng,
                    const NoiseDraws* frozen) {
  if (!net.has_stochastic_mode()) {
    throw ProtocolError(
        "Thompson selection needs a stochastic network "
        "(variational weights or dropout)");
  }
  QNetwork::ForwardSpec spec;
  spec.stochastic = true;
  spec.rng = &rng;
  spec.replay = frozen;
  const Tensor q = net.forward_values(as_row(belief), spec);
  return argmax_lowest(q.data(), static_cast<int>(q.size()));
}

int select_bootstrap(const QNetwork& net, const Tensor& belief, int head) {
  QNetwork::ForwardSpec spec;
  spec.head = head;
  const Tensor q = net.forward_values(as_row(belief), spec);
  return argmax_lowest(q.data(), static_cast<int>(q.size()));
}

NetworkConfig DqnFamilyAgent::network_config(const AgentConfig& cfg) {
  NetworkConfig net;
  net.input_dim = cfg.input_dim;
  net.num_actions = cfg.num_actions;
  net.hidden = cfg.hidden;
  net.prior = cfg.prior;
  net.rho_init = cfg.rho_init;
  net.dropout_rate = cfg.dropout_rate;
  net.concrete_temperature = cfg.concrete_temperature;
  switch (cfg.kind) {
    case AgentKind::kBbqn:
    case AgentKind::kAlphaBbqn:
      net.weights = WeightKind::kVariational;
      break;
    case AgentKind::kDropout:
      net.dropout = DropoutKind::kBernoulli;
      break;
    case AgentKind::kConcreteDropout:
      net.dropout = DropoutKind::kConcrete;
      break;
    case AgentKind::kBootstrapped:
      net.heads = cfg.heads;
      break;
    case AgentKind::kDqn:
      break;
    case AgentKind::kGpSarsa:
      throw ConfigError("gpsarsa has no Q-network");
  }
  return net;
}

namespace {

QNetwork make_network(const AgentConfig& cfg, std::uint64_t seed,
                      std::uint64_t stream) {
  Rng rng = Rng::derive(seed, stream);
  return QNetwork(DqnFamilyAgent::network_config(cfg), rng);
}

}  // namespace

DqnFamilyAgent::DqnFamilyAgent(AgentConfig cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), std::move(cfg))),
      online_(make_network(cfg_, seed, 0x1a17)),
      target_(make_network(cfg_, seed, 0x7a26)),
      adam_(online_.params(), cfg_.adam),
      buffer_(cfg_.replay_capacity,
              cfg_.kind == AgentKind::kBootstrapped ? cfg_.heads : 1,
              cfg_.head_mask_prob) {
  target_.copy_params_from(online_);
}

double DqnFamilyAgent::epsilon_now() const {
  const double frac = std::min(
      1.0, static_cast<double>(dialogues_) / cfg_.training_budget);
  return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
}

void DqnFamilyAgent::begin_episode(bool training, Rng& rng) {
  episode_training_ = training;
  episode_loss_sum_ = 0.0;
  episode_steps_ = 0;
  if (!training) return;
  if (cfg_.kind == AgentKind::kBootstrapped) {
    episode_head_ = static_cast<int>(rng.uniform_int(cfg_.heads));
  }
  if (cfg_.thompson_per_episode && online_.has_stochastic_mode()) {
    episode_noise_ = online_.draw_noise(rng, 1);
  }
}

int DqnFamilyAgent::act(const Tensor& belief, bool training, Rng& rng) {
  if (!training) {
    const Tensor q = online_.forward_values(as_row(belief), {});
    return argmax_lowest(q.data(), static_cast<int>(q.size()));
  }
  switch (cfg_.kind) {
    case AgentKind::kDqn: {
      const Tensor q = online_.forward_values(as_row(belief), {});
      return select_egreedy(q, epsilon_now(), rng);
    }
    case AgentKind::kBbqn:
    case AgentKind::kAlphaBbqn:
    case AgentKind::kDropout:
    case AgentKind::kConcreteDropout:
      return select_thompson(online_, belief, rng,
                             cfg_.thompson_per_episode ? &episode_noise_ : nullptr);
    case AgentKind::kBootstrapped:
      return select_bootstrap(online_, belief, episode_head_);
    case AgentKind::kGpSarsa:
      break;
  }
  throw ProtocolError("unsupported agent kind in DqnFamilyAgent");
}

void DqnFamilyAgent::observe(const Transition& t, Rng& rng) {
  buffer_.push(t, rng);
  ++turn_counter_;
  if (turn_counter_ % cfg_.train_every != 0) return;
  if (!buffer_.ready(cfg_.batch_size)) return;
  const double loss = train_step(rng);
  episode_loss_sum_ += loss;
  ++episode_steps_;
}

double DqnFamilyAgent::train_step(Rng& rng) {
  const Batch batch = buffer_.sample(cfg_.batch_size, rng);
  const QNetwork& bootstrap_net = cfg_.frozen_target ? target_ : online_;
  LossValue loss;
  switch (cfg_.kind) {
    case AgentKind::kDqn: {
      const Tensor y = td_targets(batch, bootstrap_net, cfg_.gamma);
      loss = td_loss(batch, online_, y);
      break;
    }
    case AgentKind::kDropout:
    case AgentKind::kConcreteDropout: {
      const Tensor y = td_targets(batch, bootstrap_net, cfg_.gamma);
      QNetwork::ForwardSpec spec;
      spec.stochastic = true;
      spec.rng = &rng;
      loss = td_loss(batch, online_, y, spec);
      break;
    }
    case AgentKind::kBbqn:
    case AgentKind::kAlphaBbqn: {
      const Tensor y = td_targets(batch, bootstrap_net, cfg_.gamma);
      ObjectiveConfig ocfg;
      ocfg.gamma = cfg_.gamma;
      // 1/M scaling with M the minibatch count of the current dataset.
      const double m =
          std::ceil(static_cast<double>(buffer_.size()) / cfg_.batch_size);
      ocfg.kl_weight = 1.0 / m;
      ocfg.mc_samples = cfg_.mc_samples;
      ocfg.alpha = cfg_.alpha;
      ocfg.sigma_lik = cfg_.sigma_lik;
      ocfg.alpha_paper_literal = cfg_.alpha_paper_literal;
      const NoiseDraws noise =
          draw_mc_noise(online_, batch.size(), ocfg.mc_samples, rng);
      loss = cfg_.kind == AgentKind::kBbqn
                 ? free_energy(batch, online_, y, ocfg, noise)
                 : bb_alpha_energy(batch, online_, y, ocfg, noise);
      break;
    }
    case AgentKind::kBootstrapped: {
      std::vector<Tensor> ys;
      ys.reserve(cfg_.heads);
      for (int k = 0; k < cfg_.heads; ++k) {
        ys.push_back(td_targets(batch, bootstrap_net, cfg_.gamma, k));
      }
      loss = bootstrap_td_loss(batch, online_, ys);
      break;
    }
    case AgentKind::kGpSarsa:
      throw ProtocolError("gpsarsa does not use gradient training");
  }
  adam_.step(online_.params(), loss.grads, cfg_.learning_rate);
  ++updates_;
  if (cfg_.frozen_target && updates_ % cfg_.target_update_every == 0) {
    target_.copy_params_from(online_);
  }
  return loss.value;
}

void DqnFamilyAgent::end_episode(bool training) {
  if (!training) return;
  ++dialogues_;
  last_mean_loss_ = episode_steps_ > 0 ? episode_loss_sum_ / episode_steps_ : 0.0;
  last_train_steps_ = episode_steps_;
}

std::string DqnFamilyAgent::checkpoint() const {
  nlohmann::json j;
  j["agent"] = agent_kind_name(cfg_.kind);
  j["config"] = agent_config_to_json(cfg_);
  j["params"] = params_to_json(online_.params());
  j["target_params"] = params_to_json(target_.params());
  nlohmann::json adam;
  adam["step"] = adam_.step_count();
  adam["m"] = nlohmann::json::array();
  adam["v"] = nlohmann::json::array();
  for (int s = 0; s < online_.params().count(); ++s) {
    adam["m"].push_back(tensor_to_json(adam_.first_moment(s)));
    adam["v"].push_back(tensor_to_json(adam_.second_moment(s)));
  }
  j["adam"] = std::move(adam);
  j["counters"] = {{"updates", updates_},
                   {"dialogues", dialogues_},
                   {"turns", turn_counter_}};
  return versioned("dialbench-agent", std::move(j)).dump(2);
}

void DqnFamilyAgent::restore(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("agent checkpoint parse failure: ") + e.what());
  }
  check_versioned(doc, "dialbench-agent");
  if (doc.at("agent").get<std::string>() != agent_kind_name(cfg_.kind)) {
    throw ProtocolError("checkpoint was written by a different agent kind");
  }
  params_from_json(doc.at("params"), online_.params());
  params_from_json(doc.at("target_params"), target_.params());
  const auto& adam = doc.at("adam");
  if (adam.at("m").size() != static_cast<std::size_t>(online_.params().count())) {
    throw ProtocolError("optimizer state size mismatch");
  }
  for (int s = 0; s < online_.params().count(); ++s) {
    Tensor m = tensor_from_json(adam.at("m").at(s));
    Tensor v = tensor_from_json(adam.at("v").at(s));
    check_same_shape(online_.params().value(s), m, "adam first moment");
    check_same_shape(online_.params().value(s), v, "adam second moment");
    adam_.mutable_first_moment(s) = std::move(m);
    adam_.mutable_second_moment(s) = std::move(v);
  }
  adam_.set_step_count(adam.at("step").get<std::uint64_t>());
  updates_ = doc.at("counters").at("updates").get<int>();
  dialogues_ = doc.at("counters").at("dialogues").get<int>();
  turn_counter_ = doc.at("counters").at("turns").get<int>();
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.kind == AgentKind::kGpSarsa) {
    return std::make_unique<GpSarsaAgent>(cfg);
  }
  return std::make_unique<DqnFamilyAgent>(cfg, seed);
}

EpisodeLog run_episode(Agent& agent, DialogueEnv& env, bool training, Rng& rng) {
  Tensor belief = env.reset(rng);
  agent.begin_episode(training, rng);
  EpisodeLog log;
  while (!env.done()) {
    const int action = agent.act(belief, training, rng);
    const StepResult res = env.step(action, rng);
    log.total_reward += res.reward;
    if (training) {
      Transition t;
      t.belief = belief;
      t.action = action;
      t.reward = res.reward;
      t.next_belief = res.belief;
      t.terminal = res.done;
      agent.observe(t, rng);
    }
    belief = res.belief;
  }
  agent.end_episode(training);
  log.turns = env.turn();
  log.success = env.success();
  log.mean_loss = agent.last_mean_loss();
  log.train_steps = agent.last_train_steps();
  return log;
}

}  // namespace dialbench
