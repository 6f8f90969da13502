#include "dialbench/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dialbench/errors.hpp"

namespace dialbench {

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  j["data"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size(); ++i) j["data"].push_back(t[i]);
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
  std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  Tensor t = Tensor::zeros(shape);
  const auto& data = j.at("data");
  if (data.size() != t.size()) {
    throw ProtocolError("tensor payload length does not match its shape");
  }
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = data[i].get<double>();
  check_finite(t, "checkpoint tensor");
  return t;
}

nlohmann::json params_to_json(const Parameters& params) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    nlohmann::json entry = tensor_to_json(e.value);
    entry["name"] = e.name;
    j.push_back(std::move(entry));
  }
  return j;
}

void params_from_json(const nlohmann::json& j, Parameters& params) {
  if (static_cast<int>(j.size()) != params.count()) {
    throw ProtocolError("checkpoint has a different parameter count");
  }
  for (int i = 0; i < params.count(); ++i) {
    const auto& entry = j.at(i);
    if (entry.at("name").get<std::string>() != params.name(i)) {
      throw ProtocolError("checkpoint parameter order/name mismatch at " +
                          params.name(i));
    }
    Tensor t = tensor_from_json(entry);
    check_same_shape(params.value(i), t, "checkpoint parameter");
    params.value(i) = std::move(t);
  }
  params.bump();
}

nlohmann::json agent_config_to_json(const AgentConfig& cfg) {
  nlohmann::json j;
  j["kind"] = agent_kind_name(cfg.kind);
  j["input_dim"] = cfg.input_dim;
  j["num_actions"] = cfg.num_actions;
  j["hidden"] = cfg.hidden;
  j["gamma"] = cfg.gamma;
  j["learning_rate"] = cfg.learning_rate;
  j["adam_beta1"] = cfg.adam.beta1;
  j["adam_beta2"] = cfg.adam.beta2;
  j["adam_eps"] = cfg.adam.eps;
  j["batch_size"] = cfg.batch_size;
  j["replay_capacity"] = cfg.replay_capacity;
  j["train_every"] = cfg.train_every;
  j["frozen_target"] = cfg.frozen_target;
  j["target_update_every"] = cfg.target_update_every;
  j["eps_start"] = cfg.eps_start;
  j["eps_end"] = cfg.eps_end;
  j["training_budget"] = cfg.training_budget;
  j["mc_samples"] = cfg.mc_samples;
  j["alpha"] = cfg.alpha;
  j["sigma_lik"] = cfg.sigma_lik;
  j["prior_mean"] = cfg.prior.mean;
  j["prior_stddev"] = cfg.prior.stddev;
  j["rho_init"] = cfg.rho_init;
  j["dropout_rate"] = cfg.dropout_rate;
  j["concrete_temperature"] = cfg.concrete_temperature;
  j["heads"] = cfg.heads;
  j["head_mask_prob"] = cfg.head_mask_prob;
  j["thompson_per_episode"] = cfg.thompson_per_episode;
  j["alpha_paper_literal"] = cfg.alpha_paper_literal;
  j["gp_sigma_obs"] = cfg.gp_sigma_obs;
  j["gp_prior_scale"] = cfg.gp_prior_scale;
  j["gp_nu"] = cfg.gp_nu;
  j["gp_dictionary_cap"] = cfg.gp_dictionary_cap;
  return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig cfg;
  try {
    if (j.contains("kind")) cfg.kind = agent_kind_from_name(j.at("kind"));
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    get("input_dim", cfg.input_dim);
    get("num_actions", cfg.num_actions);
    get("hidden", cfg.hidden);
    get("gamma", cfg.gamma);
    get("learning_rate", cfg.learning_rate);
    get("adam_beta1", cfg.adam.beta1);
    get("adam_beta2", cfg.adam.beta2);
    get("adam_eps", cfg.adam.eps);
    get("batch_size", cfg.batch_size);
    get("replay_capacity", cfg.replay_capacity);
    get("train_every", cfg.train_every);
    get("frozen_target", cfg.frozen_target);
    get("target_update_every", cfg.target_update_every);
    get("eps_start", cfg.eps_start);
    get("eps_end", cfg.eps_end);
    get("training_budget", cfg.training_budget);
    get("mc_samples", cfg.mc_samples);
    get("alpha", cfg.alpha);
    get("sigma_lik", cfg.sigma_lik);
    get("prior_mean", cfg.prior.mean);
    get("prior_stddev", cfg.prior.stddev);
    get("rho_init", cfg.rho_init);
    get("dropout_rate", cfg.dropout_rate);
    get("concrete_temperature", cfg.concrete_temperature);
    get("heads", cfg.heads);
    get("head_mask_prob", cfg.head_mask_prob);
    get("thompson_per_episode", cfg.thompson_per_episode);
    get("alpha_paper_literal", cfg.alpha_paper_literal);
    get("gp_sigma_obs", cfg.gp_sigma_obs);
    get("gp_prior_scale", cfg.gp_prior_scale);
    get("gp_nu", cfg.gp_nu);
    get("gp_dictionary_cap", cfg.gp_dictionary_cap);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad agent config: ") + e.what());
  }
  return cfg;
}

nlohmann::json versioned(const std::string& format, nlohmann::json payload) {
  payload["format"] = format;
  payload["version"] = 1;
  return payload;
}

const nlohmann::json& check_versioned(const nlohmann::json& doc,
                                      const std::string& format) {
  if (!doc.is_object() || !doc.contains("format") ||
      doc.at("format").get<std::string>() != format) {
    throw ProtocolError("document is not a " + format + " payload");
  }
  if (!doc.contains("version") || doc.at("version").get<int>() != 1) {
    throw ProtocolError("unsupported " + format + " version");
  }
  return doc;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ConfigError("short write to " + path);
}

}  // namespace dialbench
