#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialbench/agents.hpp"
#include "dialbench/env.hpp"
#include "json.hpp"

namespace dialbench {

/// One benchmark run: an agent trained on `train_error`, periodically
/// evaluated on `eval_error`, repeated over `seeds`.
struct ExperimentConfig {
  std::string agent = "dqn";
  AgentConfig agent_config;  // kind is forced to the `agent` tag
  EnvConfig env;             // channel error rates are overridden per phase
  Ontology ontology = default_ontology();
  double train_error = 0.0;
  double eval_error = 0.0;
  int budget = 4000;         // training dialogues
  int eval_every = 200;      // evaluation cadence; must divide budget
  int eval_dialogues = 200;  // dialogues per evaluation point
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  void validate() const;
  /// Evaluation checkpoints: 0, eval_every, ..., budget.
  std::vector<int> dialogue_grid() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

nlohmann::json env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j);

/// Agent config with kind/input_dim/num_actions/training_budget resolved
/// against the experiment's ontology and budget.
AgentConfig resolved_agent_config(const ExperimentConfig& cfg);

struct EvalResult {
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

/// Runs `n_dialogues` evaluation episodes: greedy policy, no learning, no
/// agent mutation. Uses only `rng`, so evaluation never perturbs training.
EvalResult evaluate(Agent& agent, const Ontology& ont, const EnvConfig& env_cfg,
                    int n_dialogues, Rng& rng);

/// Success/reward at each evaluation checkpoint, one row of values per seed.
struct LearningCurve {
  std::string agent;
  std::vector<std::uint64_t> seeds;
  std::vector<int> dialogues;                // strictly increasing
  std::vector<std::vector<double>> success;  // [seed][checkpoint]
  std::vector<std::vector<double>> reward;   // [seed][checkpoint]

  int checkpoints() const { return static_cast<int>(dialogues.size()); }
  void validate() const;
  double success_mean(int c) const;
  double success_stderr(int c) const;
  double reward_mean(int c) const;
  double reward_stderr(int c) const;
};

/// Mean as the plain left-to-right sum over seeds divided by the count, so
/// aggregates recomputed from the per-seed CSVs match bit for bit.
double mean_of(const std::vector<double>& v);
/// Standard error of the mean (sample stddev / sqrt(n)); 0 for n < 2.
double stderr_of(const std::vector<double>& v);

/// Single-seed curve as parsed back from CSV.
struct SeedCurve {
  std::vector<int> dialogues;
  std::vector<double> success;
  std::vector<double> reward;
};

std::string seed_curve_csv(const LearningCurve& curve, int seed_index);
SeedCurve parse_seed_curve_csv(const std::string& text);
std::string mean_curve_csv(const LearningCurve& curve);

/// curves/<agent>_<seed>.csv for every seed plus curves/<agent>_mean.csv.
void write_curve_files(const LearningCurve& curve, const std::string& out_dir);
/// Rebuilds a curve from curves/<agent>_<seed>.csv files (seeds ascending).
LearningCurve load_curve_from_dir(const std::string& out_dir,
                                  const std::string& agent);

struct ExperimentResult {
  LearningCurve curve;              // completed seeds only
  std::vector<std::string> errors;  // one entry per crashed seed
};

/// Full protocol for one agent: per seed, evaluate at dialogue 0 and after
/// every `eval_every` training dialogues; persist per-seed CSVs incrementally,
/// an agent checkpoint at each evaluation point, the seed-mean CSV, and a
/// plot script. A crashing seed is recorded and skipped; completed seeds'
/// artifacts survive.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir);

/// Trapezoidal area under (dialogues, values).
double curve_auc(const std::vector<int>& dialogues,
                 const std::vector<double>& values);

struct AgentSummary {
  std::string agent;
  double final_success = 0.0;  // seed mean at the last checkpoint
  double auc = 0.0;            // trapezoidal AUC of the seed-mean curve
  std::vector<double> seed_auc;
};

struct PairwiseAuc {
  std::string a;
  std::string b;
  double auc_diff = 0.0;  // auc(a) - auc(b)
  int a_wins = 0;         // seeds (paired by index) where auc_a > auc_b
  int b_wins = 0;
  int ties = 0;
};

struct Comparison {
  std::vector<AgentSummary> summaries;  // sorted by AUC, best first
  std::vector<PairwiseAuc> pairwise;
};

/// Requires every curve to share the checkpoint grid.
Comparison compare(const std::vector<LearningCurve>& curves);
std::string comparison_report_md(const Comparison& cmp);

/// Matplotlib script that renders curves/*_mean.csv; written next to them.
std::string plot_script_text();

}  // namespace dialbench
