#include "dialbench/gpsarsa.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "dialbench/checkpoint.hpp"
#include "dialbench/errors.hpp"

namespace dialbench {
namespace {

void warn(const char* what) {
  std::fprintf(stderr, "[dialbench] warning: %s\n", what);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y = M x for a row-major k x k matrix.
std::vector<double> matvec(const std::vector<double>& m,
                           const std::vector<double>& x) {
  const std::size_t k = x.size();
  std::vector<double> y(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double* row = m.data() + i * k;
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// In-place Gauss-Jordan inverse with partial pivoting; returns false when a
/// pivot collapses.
bool invert_dense(std::vector<double>& m, int k) {
  std::vector<double> inv(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) inv[i * k + i] = 1.0;
  for (int col = 0; col < k; ++col) {
    int pivot = col;
    for (int r = col + 1; r < k; ++r) {
      if (std::fabs(m[r * k + col]) > std::fabs(m[pivot * k + col])) pivot = r;
    }
    if (std::fabs(m[pivot * k + col]) < 1e-14) return false;
    if (pivot != col) {
      for (int j = 0; j < k; ++j) {
        std::swap(m[pivot * k + j], m[col * k + j]);
        std::swap(inv[pivot * k + j], inv[col * k + j]);
      }
    }
    const double d = m[col * k + col];
    for (int j = 0; j < k; ++j) {
      m[col * k + j] /= d;
      inv[col * k + j] /= d;
    }
    for (int r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = m[r * k + col];
      if (f == 0.0) continue;
      for (int j = 0; j < k; ++j) {
        m[r * k + j] -= f * m[col * k + j];
        inv[r * k + j] -= f * inv[col * k + j];
      }
    }
  }
  m = std::move(inv);
  return true;
}

}  // namespace

double linear_delta_kernel(const Tensor& b, int a, const Tensor& b2, int a2) {
  if (b.size() != b2.size()) {
    throw ShapeError("kernel beliefs differ in length: " + b.shape_str() +
                     " vs " + b2.shape_str());
  }
  if (a != a2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * b2[i];
  return s;
}

void GpConfig::validate() const {
  if (num_actions < 1) throw ConfigError("gp needs a positive action count");
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
  if (sigma_obs <= 0.0) throw ConfigError("sigma_obs must be positive");
  if (prior_scale <= 0.0) throw ConfigError("prior_scale must be positive");
  if (dictionary_cap < 1) throw ConfigError("dictionary cap must be positive");
}

GpSarsa::GpSarsa(GpConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  action_rows_.resize(cfg_.num_actions);
}

double GpSarsa::effective_kernel(const Tensor& b, int a, int dict_index) const {
  return cfg_.prior_scale *
         linear_delta_kernel(b, a, dict_belief_[dict_index],
                             dict_action_[dict_index]);
}

std::vector<double> GpSarsa::kernel_vector(const Tensor& b, int a) const {
  std::vector<double> k(dict_belief_.size());
  for (int i = 0; i < dictionary_size(); ++i) k[i] = effective_kernel(b, a, i);
  return k;
}

std::vector<double> GpSarsa::projection(const std::vector<double>& kvec) const {
  return matvec(kinv_, kvec);
}

double GpSarsa::threshold_now() const {
  if (cfg_.nu >= 0.0) return cfg_.nu;
  if (self_sim_count_ == 0) return 0.0;
  return 0.1 * self_sim_sum_ / static_cast<double>(self_sim_count_);
}

void GpSarsa::grow_inverse_gram(const std::vector<double>& coeffs,
                                double residual) {
  const int k = dictionary_size();  // size before growth
  std::vector<double> next(static_cast<std::size_t>(k + 1) * (k + 1), 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      next[i * (k + 1) + j] = kinv_[i * k + j] + coeffs[i] * coeffs[j] / residual;
    }
    next[i * (k + 1) + k] = -coeffs[i] / residual;
    next[k * (k + 1) + i] = -coeffs[i] / residual;
  }
  next[k * (k + 1) + k] = 1.0 / residual;
  kinv_ = std::move(next);
}

void GpSarsa::rebuild_inverse_gram() {
  warn("inverse Gram cache degenerated; rebuilding from the dictionary");
  const int k = dictionary_size();
  std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = effective_kernel(dict_belief_[i], dict_action_[i], j);
      gram[i * k + j] = v;
      gram[j * k + i] = v;
    }
  }
  std::vector<double> work = gram;
  if (!invert_dense(work, k)) {
    // Jitter the diagonal once; admission guarantees near-independence, so
    // this only fires on extreme roundoff.
    double trace = 0.0;
    for (int i = 0; i < k; ++i) trace += gram[i * k + i];
    const double jitter = 1e-10 * (trace / std::max(k, 1) + 1.0);
    for (int i = 0; i < k; ++i) gram[i * k + i] += jitter;
    work = gram;
    if (!invert_dense(work, k)) {
      throw NumericError("dictionary Gram matrix is not invertible");
    }
  }
  kinv_ = std::move(work);
}

GpSarsa::Admission GpSarsa::admit(const Tensor& b, int a) {
  if (a < 0 || a >= cfg_.num_actions) {
    throw ConfigError("action index outside the GP action set");
  }
  const double kxx = cfg_.prior_scale * linear_delta_kernel(b, a, b, a);
  self_sim_sum_ += kxx;
  ++self_sim_count_;
  const double nu = threshold_now();

  Admission out;
  if (dictionary_size() == 0) {
    out.residual = kxx;
    if (kxx > nu) {
      dict_belief_.push_back(b);
      dict_action_.push_back(a);
      action_rows_[a].push_back(0);
      kinv_.assign(1, 1.0 / kxx);
      alpha_.assign(1, 0.0);
      cmat_.assign(1, 0.0);
      out.admitted = true;
    }
    return out;
  }

  const std::vector<double> kvec = kernel_vector(b, a);
  const std::vector<double> coeffs = projection(kvec);
  out.residual = kxx - dot(kvec, coeffs);
  if (out.residual <= nu || dictionary_size() >= cfg_.dictionary_cap) {
    return out;
  }
  if (out.residual < 1e-12) return out;  // numerically in-span; keep cache sane

  grow_inverse_gram(coeffs, out.residual);
  dict_belief_.push_back(b);
  dict_action_.push_back(a);
  action_rows_[a].push_back(dictionary_size() - 1);
  const int k = dictionary_size();
  alpha_.resize(k, 0.0);
  std::vector<double> grown(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k - 1; ++i) {
    for (int j = 0; j < k - 1; ++j) grown[i * k + j] = cmat_[i * (k - 1) + j];
  }
  cmat_ = std::move(grown);
  out.admitted = true;
  if (!all_finite(kinv_)) rebuild_inverse_gram();
  return out;
}

void GpSarsa::update(const Tensor& b, int a, double reward, const Tensor& b2,
                     int a2, bool terminal) {
  if (!std::isfinite(reward)) {
    warn("non-finite reward; GP update skipped");
    return;
  }
  admit(b, a);
  if (!terminal) admit(b2, a2);
  const int k = dictionary_size();
  if (k == 0) return;  // nothing representable yet (zero-norm beliefs)

  const std::vector<double> k1 = kernel_vector(b, a);
  std::vector<double> dk = k1;
  std::vector<double> h = projection(k1);
  if (!terminal) {
    const std::vector<double> k2 = kernel_vector(b2, a2);
    const std::vector<double> h2 = projection(k2);
    for (int i = 0; i < k; ++i) {
      dk[i] -= cfg_.gamma * k2[i];
      h[i] -= cfg_.gamma * h2[i];
    }
  }

  const std::vector<double> cdk = matvec(cmat_, dk);
  std::vector<double> gain(k);
  for (int i = 0; i < k; ++i) gain[i] = h[i] - cdk[i];
  // Innovation variance: prior term clamped at 0 (sparse projections can
  // leave a tiny negative remainder), plus the observation noise.
  const double prior_term = std::max(dot(dk, gain), 0.0);
  const double s = prior_term + cfg_.sigma_obs * cfg_.sigma_obs;
  const double residual = reward - dot(dk, alpha_);
  if (!std::isfinite(s) || s <= 0.0 || !std::isfinite(residual) ||
      !all_finite(gain)) {
    warn("non-finite GP innovation; update skipped");
    return;
  }
  for (int i = 0; i < k; ++i) alpha_[i] += gain[i] * (residual / s);
  for (int i = 0; i < k; ++i) {
    const double gi = gain[i] / s;
    for (int j = 0; j < k; ++j) cmat_[i * k + j] += gi * gain[j];
  }
}

double GpSarsa::predict_mean(const Tensor& b, int a) const {
  double mean = 0.0;
  for (int i : action_rows_[a]) mean += effective_kernel(b, a, i) * alpha_[i];
  return mean;
}

std::pair<double, double> GpSarsa::predict(const Tensor& b, int a) const {
  if (a < 0 || a >= cfg_.num_actions) {
    throw ConfigError("action index outside the GP action set");
  }
  const double kxx = cfg_.prior_scale * linear_delta_kernel(b, a, b, a);
  const std::vector<int>& rows = action_rows_[a];
  if (rows.empty()) return {0.0, kxx};

  // The delta kernel zeroes every other-action entry of the kernel vector,
  // so both the mean and the quadratic form only touch same-action rows.
  const std::size_t n = rows.size();
  std::vector<double> kv(n);
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    kv[t] = effective_kernel(b, a, rows[t]);
    mean += kv[t] * alpha_[rows[t]];
  }
  const std::size_t k = dict_belief_.size();
  double quad = 0.0;
  for (std::size_t ti = 0; ti < n; ++ti) {
    const double* row = cmat_.data() + static_cast<std::size_t>(rows[ti]) * k;
    double s = 0.0;
    for (std::size_t tj = 0; tj < n; ++tj) s += row[rows[tj]] * kv[tj];
    quad += kv[ti] * s;
  }
  double var = kxx - quad;
  if (var < 0.0) {
    if (var < -1e-6) warn("predictive variance strongly negative; clamping");
    var = 0.0;
  }
  return {mean, var};
}

int GpSarsa::select_action(const Tensor& b, Rng& rng) const {
  int best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < cfg_.num_actions; ++a) {
    const auto [mean, var] = predict(b, a);
    const double q = mean + std::sqrt(var) * rng.normal();
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

int GpSarsa::greedy_action(const Tensor& b) const {
  int best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < cfg_.num_actions; ++a) {
    const double mean = predict_mean(b, a);
    if (mean > best_q) {
      best_q = mean;
      best = a;
    }
  }
  return best;
}

std::string GpSarsa::serialize() const {
  nlohmann::json j;
  j["num_actions"] = cfg_.num_actions;
  j["gamma"] = cfg_.gamma;
  j["sigma_obs"] = cfg_.sigma_obs;
  j["prior_scale"] = cfg_.prior_scale;
  j["nu"] = cfg_.nu;
  j["dictionary_cap"] = cfg_.dictionary_cap;
  j["self_sim_sum"] = self_sim_sum_;
  j["self_sim_count"] = self_sim_count_;
  j["actions"] = dict_action_;
  j["beliefs"] = nlohmann::json::array();
  for (const Tensor& t : dict_belief_) j["beliefs"].push_back(tensor_to_json(t));
  j["alpha"] = alpha_;
  j["cmat"] = cmat_;
  j["kinv"] = kinv_;
  return versioned("dialbench-gp", std::move(j)).dump();
}

GpSarsa GpSarsa::deserialize(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("gp payload parse failure: ") + e.what());
  }
  check_versioned(j, "dialbench-gp");
  GpConfig cfg;
  cfg.num_actions = j.at("num_actions").get<int>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.sigma_obs = j.at("sigma_obs").get<double>();
  cfg.prior_scale = j.at("prior_scale").get<double>();
  cfg.nu = j.at("nu").get<double>();
  cfg.dictionary_cap = j.at("dictionary_cap").get<int>();
  GpSarsa gp(cfg);
  gp.self_sim_sum_ = j.at("self_sim_sum").get<double>();
  gp.self_sim_count_ = j.at("self_sim_count").get<long long>();
  gp.dict_action_ = j.at("actions").get<std::vector<int>>();
  for (const auto& t : j.at("beliefs")) {
    gp.dict_belief_.push_back(tensor_from_json(t));
  }
  gp.alpha_ = j.at("alpha").get<std::vector<double>>();
  gp.cmat_ = j.at("cmat").get<std::vector<double>>();
  gp.kinv_ = j.at("kinv").get<std::vector<double>>();
  const std::size_t k = gp.dict_belief_.size();
  if (gp.dict_action_.size() != k || gp.alpha_.size() != k ||
      gp.cmat_.size() != k * k || gp.kinv_.size() != k * k) {
    throw ProtocolError("gp payload has inconsistent dictionary sizes");
  }
  for (std::size_t i = 0; i < k; ++i) {
    const int a = gp.dict_action_[i];
    if (a < 0 || a >= cfg.num_actions) {
      throw ProtocolError("gp payload contains an action outside its set");
    }
    gp.action_rows_[a].push_back(static_cast<int>(i));
  }
  return gp;
}

GpSarsaAgent::GpSarsaAgent(AgentConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))), gp_([this] {
        GpConfig g;
        g.num_actions = cfg_.num_actions;
        g.gamma = cfg_.gamma;
        g.sigma_obs = cfg_.gp_sigma_obs;
        g.prior_scale = cfg_.gp_prior_scale;
        g.nu = cfg_.gp_nu;
        g.dictionary_cap = cfg_.gp_dictionary_cap;
        return g;
      }()) {
  if (cfg_.kind != AgentKind::kGpSarsa) {
    throw ConfigError("GpSarsaAgent requires kind == gpsarsa");
  }
}

void GpSarsaAgent::begin_episode(bool, Rng&) { pending_valid_ = false; }

int GpSarsaAgent::act(const Tensor& belief, bool training, Rng& rng) {
  if (!training) return gp_.greedy_action(belief);
  const int action = gp_.select_action(belief, rng);
  if (pending_valid_) {
    gp_.update(pending_belief_, pending_action_, pending_reward_, belief,
               action, false);
    pending_valid_ = false;
  }
  return action;
}

void GpSarsaAgent::observe(const Transition& t, Rng&) {
  if (t.terminal) {
    gp_.update(t.belief, t.action, t.reward, t.next_belief, 0, true);
    pending_valid_ = false;
    return;
  }
  pending_belief_ = t.belief;
  pending_action_ = t.action;
  pending_reward_ = t.reward;
  pending_valid_ = true;
}

void GpSarsaAgent::end_episode(bool training) {
  if (training) ++dialogues_;
}

std::string GpSarsaAgent::checkpoint() const {
  nlohmann::json j;
  j["agent"] = agent_kind_name(cfg_.kind);
  j["config"] = agent_config_to_json(cfg_);
  j["gp"] = nlohmann::json::parse(gp_.serialize());
  j["counters"] = {{"dialogues", dialogues_}};
  return versioned("dialbench-agent", std::move(j)).dump(2);
}

void GpSarsaAgent::restore(const std::string& text) {
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
  gp_ = GpSarsa::deserialize(doc.at("gp").dump());
  dialogues_ = doc.at("counters").at("dialogues").get<int>();
  pending_valid_ = false;
}

}  // namespace dialbench
