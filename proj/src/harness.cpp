#include "dialbench/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <utility>

#include "dialbench/checkpoint.hpp"
#include "dialbench/errors.hpp"

namespace dialbench {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainStream = 0x545241494eULL;
// One stream per evaluation point, keyed by dialogues-so-far, so adding or
// removing evaluation points never shifts the training stream.
constexpr std::uint64_t kEvalStreamBase = 0x4556414c00000000ULL;

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double_field(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ProtocolError("curve CSV: bad numeric field '" + s + "'");
  }
  return v;
}

int parse_int_field(const std::string& s) {
  int v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ProtocolError("curve CSV: bad integer field '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

constexpr const char* kSeedHeader = "dialogues,success_rate,mean_reward";
constexpr const char* kMeanHeader =
    "dialogues,success_mean,success_stderr,reward_mean,reward_stderr";

std::string curves_dir(const std::string& out_dir) {
  return (fs::path(out_dir) / "curves").string();
}

std::string seed_csv_path(const std::string& out_dir, const std::string& agent,
                          std::uint64_t seed) {
  return (fs::path(curves_dir(out_dir)) /
          (agent + "_" + std::to_string(seed) + ".csv"))
      .string();
}

std::string checkpoint_path(const std::string& out_dir,
                            const std::string& agent, std::uint64_t seed,
                            int dialogues) {
  return (fs::path(out_dir) / "checkpoints" /
          (agent + "_" + std::to_string(seed) + "_" +
           std::to_string(dialogues) + ".json"))
      .string();
}

}  // namespace

void ExperimentConfig::validate() const {
  agent_kind_from_name(agent);  // throws on unknown tag
  if (budget <= 0) throw ConfigError("experiment: budget must be positive");
  if (eval_every <= 0 || budget % eval_every != 0) {
    throw ConfigError("experiment: eval cadence must divide the budget");
  }
  if (eval_dialogues < 1) {
    throw ConfigError("experiment: eval_dialogues must be at least 1");
  }
  if (seeds.empty()) throw ConfigError("experiment: need at least one seed");
  if (!(train_error >= 0.0 && train_error < 1.0) ||
      !(eval_error >= 0.0 && eval_error < 1.0)) {
    throw ConfigError("experiment: error rates must lie in [0, 1)");
  }
  ontology.validate();
}

std::vector<int> ExperimentConfig::dialogue_grid() const {
  std::vector<int> grid;
  for (int d = 0; d <= budget; d += eval_every) grid.push_back(d);
  return grid;
}

nlohmann::json env_config_to_json(const EnvConfig& cfg) {
  return nlohmann::json{
      {"channel",
       {{"error_rate", cfg.channel.error_rate},
        {"n_best_max", cfg.channel.n_best_max},
        {"value_sub_prob", cfg.channel.value_sub_prob},
        {"keep_true_prob", cfg.channel.keep_true_prob}}},
      {"reward_success", cfg.reward_success},
      {"reward_per_turn", cfg.reward_per_turn},
      {"max_turns", cfg.max_turns},
  };
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig cfg;
  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    if (c.contains("error_rate")) cfg.channel.error_rate = c.at("error_rate");
    if (c.contains("n_best_max")) cfg.channel.n_best_max = c.at("n_best_max");
    if (c.contains("value_sub_prob")) {
      cfg.channel.value_sub_prob = c.at("value_sub_prob");
    }
    if (c.contains("keep_true_prob")) {
      cfg.channel.keep_true_prob = c.at("keep_true_prob");
    }
  }
  if (j.contains("reward_success")) cfg.reward_success = j.at("reward_success");
  if (j.contains("reward_per_turn")) {
    cfg.reward_per_turn = j.at("reward_per_turn");
  }
  if (j.contains("max_turns")) cfg.max_turns = j.at("max_turns");
  return cfg;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  return nlohmann::json{
      {"agent", cfg.agent},
      {"agent_config", agent_config_to_json(cfg.agent_config)},
      {"env", env_config_to_json(cfg.env)},
      {"ontology", nlohmann::json::parse(ontology_to_json(cfg.ontology))},
      {"train_error", cfg.train_error},
      {"eval_error", cfg.eval_error},
      {"budget", cfg.budget},
      {"eval_every", cfg.eval_every},
      {"eval_dialogues", cfg.eval_dialogues},
      {"seeds", cfg.seeds},
  };
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("agent")) cfg.agent = j.at("agent").get<std::string>();
    if (j.contains("agent_config")) {
      cfg.agent_config = agent_config_from_json(j.at("agent_config"));
    }
    if (j.contains("env")) cfg.env = env_config_from_json(j.at("env"));
    if (j.contains("ontology")) {
      cfg.ontology = ontology_from_json(j.at("ontology").dump());
    }
    if (j.contains("train_error")) cfg.train_error = j.at("train_error");
    if (j.contains("eval_error")) cfg.eval_error = j.at("eval_error");
    if (j.contains("budget")) cfg.budget = j.at("budget");
    if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every");
    if (j.contains("eval_dialogues")) {
      cfg.eval_dialogues = j.at("eval_dialogues");
    }
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("experiment config " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

AgentConfig resolved_agent_config(const ExperimentConfig& cfg) {
  AgentConfig acfg = cfg.agent_config;
  acfg.kind = agent_kind_from_name(cfg.agent);
  acfg.input_dim = belief_dim(cfg.ontology);
  acfg.num_actions = num_summary_actions(cfg.ontology);
  acfg.training_budget = cfg.budget;
  acfg.validate();
  return acfg;
}

EvalResult evaluate(Agent& agent, const Ontology& ont, const EnvConfig& env_cfg,
                    int n_dialogues, Rng& rng) {
  if (n_dialogues < 1) {
    throw ConfigError("evaluate requires at least one dialogue");
  }
  DialogueEnv env(ont, env_cfg);
  int successes = 0;
  double reward_sum = 0.0;
  for (int i = 0; i < n_dialogues; ++i) {
    const EpisodeLog log = run_episode(agent, env, /*training=*/false, rng);
    if (log.success) ++successes;
    reward_sum += log.total_reward;
  }
  return {static_cast<double>(successes) / n_dialogues,
          reward_sum / n_dialogues};
}

void LearningCurve::validate() const {
  if (agent.empty()) throw ConfigError("learning curve: missing agent tag");
  if (dialogues.empty()) throw ConfigError("learning curve: no checkpoints");
  for (std::size_t i = 1; i < dialogues.size(); ++i) {
    if (dialogues[i] <= dialogues[i - 1]) {
      throw ConfigError("learning curve: checkpoints must strictly increase");
    }
  }
  if (success.size() != seeds.size() || reward.size() != seeds.size()) {
    throw ConfigError("learning curve: one value row per seed required");
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (success[s].size() != dialogues.size() ||
        reward[s].size() != dialogues.size()) {
      throw ConfigError("learning curve: row length != checkpoint count");
    }
    for (double v : success[s]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("learning curve: success rate outside [0, 1]");
      }
    }
  }
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1)) /
         std::sqrt(static_cast<double>(n));
}

namespace {
std::vector<double> column(const std::vector<std::vector<double>>& rows,
                           int c) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[static_cast<std::size_t>(c)]);
  return out;
}
}  // namespace

double LearningCurve::success_mean(int c) const {
  return mean_of(column(success, c));
}
double LearningCurve::success_stderr(int c) const {
  return stderr_of(column(success, c));
}
double LearningCurve::reward_mean(int c) const {
  return mean_of(column(reward, c));
}
double LearningCurve::reward_stderr(int c) const {
  return stderr_of(column(reward, c));
}

std::string seed_curve_csv(const LearningCurve& curve, int seed_index) {
  const auto s = static_cast<std::size_t>(seed_index);
  if (s >= curve.seeds.size()) {
    throw ConfigError("seed_curve_csv: seed index out of range");
  }
  std::string out = std::string(kSeedHeader) + "\n";
  for (std::size_t c = 0; c < curve.dialogues.size(); ++c) {
    out += std::to_string(curve.dialogues[c]);
    out += ',';
    out += format_double(curve.success[s][c]);
    out += ',';
    out += format_double(curve.reward[s][c]);
    out += '\n';
  }
  return out;
}

SeedCurve parse_seed_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSeedHeader) {
    throw ProtocolError("curve CSV: unexpected header");
  }
  SeedCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    if (fields.size() != 3) {
      throw ProtocolError("curve CSV: expected 3 fields per row");
    }
    curve.dialogues.push_back(parse_int_field(fields[0]));
    curve.success.push_back(parse_double_field(fields[1]));
    curve.reward.push_back(parse_double_field(fields[2]));
  }
  return curve;
}

std::string mean_curve_csv(const LearningCurve& curve) {
  std::string out = std::string(kMeanHeader) + "\n";
  for (int c = 0; c < curve.checkpoints(); ++c) {
    out += std::to_string(curve.dialogues[static_cast<std::size_t>(c)]);
    out += ',';
    out += format_double(curve.success_mean(c));
    out += ',';
    out += format_double(curve.success_stderr(c));
    out += ',';
    out += format_double(curve.reward_mean(c));
    out += ',';
    out += format_double(curve.reward_stderr(c));
    out += '\n';
  }
  return out;
}

void write_curve_files(const LearningCurve& curve, const std::string& out_dir) {
  curve.validate();
  fs::create_directories(curves_dir(out_dir));
  for (std::size_t s = 0; s < curve.seeds.size(); ++s) {
    write_text_file(seed_csv_path(out_dir, curve.agent, curve.seeds[s]),
                    seed_curve_csv(curve, static_cast<int>(s)));
  }
  write_text_file(
      (fs::path(curves_dir(out_dir)) / (curve.agent + "_mean.csv")).string(),
      mean_curve_csv(curve));
}

LearningCurve load_curve_from_dir(const std::string& out_dir,
                                  const std::string& agent) {
  const fs::path dir(curves_dir(out_dir));
  if (!fs::is_directory(dir)) {
    throw ConfigError("no curves directory under " + out_dir);
  }
  const std::string prefix = agent + "_";
  std::vector<std::pair<std::uint64_t, SeedCurve>> rows;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= prefix.size() + 4 || name.rfind(prefix, 0) != 0 ||
        name.substr(name.size() - 4) != ".csv") {
      continue;
    }
    const std::string tag = name.substr(prefix.size(), name.size() - prefix.size() - 4);
    if (tag.empty() ||
        !std::all_of(tag.begin(), tag.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      continue;  // e.g. the _mean.csv aggregate
    }
    rows.emplace_back(std::stoull(tag),
                      parse_seed_curve_csv(read_text_file(entry.path().string())));
  }
  if (rows.empty()) {
    throw ConfigError("no per-seed curves for agent '" + agent + "' in " +
                      out_dir);
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  LearningCurve curve;
  curve.agent = agent;
  curve.dialogues = rows.front().second.dialogues;
  for (auto& [seed, sc] : rows) {
    if (sc.dialogues != curve.dialogues) {
      throw ConfigError("curve grid mismatch across seeds for '" + agent + "'");
    }
    curve.seeds.push_back(seed);
    curve.success.push_back(std::move(sc.success));
    curve.reward.push_back(std::move(sc.reward));
  }
  curve.validate();
  return curve;
}

namespace {

struct SeedRun {
  std::vector<double> success;
  std::vector<double> reward;
};

SeedRun run_seed(const ExperimentConfig& cfg, const AgentConfig& acfg,
                 const EnvConfig& train_env_cfg, const EnvConfig& eval_env_cfg,
                 std::uint64_t seed, const std::string& out_dir) {
  DialogueEnv train_env(cfg.ontology, train_env_cfg);
  auto agent = make_agent(acfg, seed);
  Rng train_rng = Rng::derive(seed, kTrainStream);
  const std::vector<int> grid = cfg.dialogue_grid();
  SeedRun run;

  auto eval_point = [&](int dialogues) {
    Rng eval_rng =
        Rng::derive(seed, kEvalStreamBase + static_cast<std::uint64_t>(dialogues));
    const EvalResult r = evaluate(*agent, cfg.ontology, eval_env_cfg,
                                  cfg.eval_dialogues, eval_rng);
    run.success.push_back(r.success_rate);
    run.reward.push_back(r.mean_reward);
    write_text_file(checkpoint_path(out_dir, cfg.agent, seed, dialogues),
                    agent->checkpoint());
    // Persist the partial curve so a later crash loses nothing finished.
    LearningCurve partial;
    partial.agent = cfg.agent;
    partial.seeds = {seed};
    partial.dialogues.assign(grid.begin(),
                             grid.begin() + static_cast<long>(run.success.size()));
    partial.success = {run.success};
    partial.reward = {run.reward};
    write_text_file(seed_csv_path(out_dir, cfg.agent, seed),
                    seed_curve_csv(partial, 0));
  };

  eval_point(0);
  for (int d = 1; d <= cfg.budget; ++d) {
    run_episode(*agent, train_env, /*training=*/true, train_rng);
    if (d % cfg.eval_every == 0) eval_point(d);
  }
  return run;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir) {
  cfg.validate();
  const AgentConfig acfg = resolved_agent_config(cfg);
  fs::create_directories(curves_dir(out_dir));
  fs::create_directories(fs::path(out_dir) / "checkpoints");
  write_text_file((fs::path(out_dir) / "plot_curves.py").string(),
                  plot_script_text());

  EnvConfig train_env_cfg = cfg.env;
  train_env_cfg.channel.error_rate = cfg.train_error;
  EnvConfig eval_env_cfg = cfg.env;
  eval_env_cfg.channel.error_rate = cfg.eval_error;

  ExperimentResult result;
  result.curve.agent = cfg.agent;
  result.curve.dialogues = cfg.dialogue_grid();
  for (std::uint64_t seed : cfg.seeds) {
    try {
      SeedRun run = run_seed(cfg, acfg, train_env_cfg, eval_env_cfg, seed,
                             out_dir);
      result.curve.seeds.push_back(seed);
      result.curve.success.push_back(std::move(run.success));
      result.curve.reward.push_back(std::move(run.reward));
    } catch (const std::exception& e) {
      result.errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }
  if (!result.curve.seeds.empty()) write_curve_files(result.curve, out_dir);
  return result;
}

double curve_auc(const std::vector<int>& dialogues,
                 const std::vector<double>& values) {
  if (dialogues.size() != values.size()) {
    throw ShapeError("curve_auc: grid and values disagree in length");
  }
  double auc = 0.0;
  for (std::size_t i = 1; i < dialogues.size(); ++i) {
    auc += (dialogues[i] - dialogues[i - 1]) * 0.5 *
           (values[i] + values[i - 1]);
  }
  return auc;
}

Comparison compare(const std::vector<LearningCurve>& curves) {
  if (curves.empty()) throw ConfigError("compare: no curves given");
  for (const auto& c : curves) {
    c.validate();
    if (c.dialogues != curves.front().dialogues) {
      throw ConfigError("compare: curves do not share a checkpoint grid");
    }
  }
  Comparison cmp;
  for (const auto& c : curves) {
    AgentSummary s;
    s.agent = c.agent;
    std::vector<double> mean_curve;
    mean_curve.reserve(c.dialogues.size());
    for (int k = 0; k < c.checkpoints(); ++k) {
      mean_curve.push_back(c.success_mean(k));
    }
    s.final_success = mean_curve.back();
    s.auc = curve_auc(c.dialogues, mean_curve);
    for (const auto& row : c.success) {
      s.seed_auc.push_back(curve_auc(c.dialogues, row));
    }
    cmp.summaries.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < cmp.summaries.size(); ++i) {
    for (std::size_t j = i + 1; j < cmp.summaries.size(); ++j) {
      const AgentSummary& a = cmp.summaries[i];
      const AgentSummary& b = cmp.summaries[j];
      PairwiseAuc p;
      p.a = a.agent;
      p.b = b.agent;
      p.auc_diff = a.auc - b.auc;
      const std::size_t n = std::min(a.seed_auc.size(), b.seed_auc.size());
      for (std::size_t k = 0; k < n; ++k) {
        if (a.seed_auc[k] > b.seed_auc[k]) {
          ++p.a_wins;
        } else if (a.seed_auc[k] < b.seed_auc[k]) {
          ++p.b_wins;
        } else {
          ++p.ties;
        }
      }
      cmp.pairwise.push_back(std::move(p));
    }
  }
  std::stable_sort(cmp.summaries.begin(), cmp.summaries.end(),
                   [](const AgentSummary& a, const AgentSummary& b) {
                     if (a.auc != b.auc) return a.auc > b.auc;
                     return a.agent < b.agent;
                   });
  return cmp;
}

namespace {
std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
}  // namespace

std::string comparison_report_md(const Comparison& cmp) {
  std::string md = "# Learning-curve comparison\n\n";
  md += "Agents ranked by trapezoidal area under the seed-mean success "
        "curve (AUC, dialogue units).\n\n";
  md += "| rank | agent | final success | AUC |\n";
  md += "|------|-------|---------------|-----|\n";
  for (std::size_t i = 0; i < cmp.summaries.size(); ++i) {
    const auto& s = cmp.summaries[i];
    md += "| " + std::to_string(i + 1) + " | " + s.agent + " | " +
          fixed(s.final_success, 4) + " | " + fixed(s.auc, 2) + " |\n";
  }
  md += "\n## Pairwise AUC differences\n\n";
  md += "Positive differences favor agent A. Win columns count seeds "
        "(paired by position) whose per-seed AUC favors each agent.\n\n";
  md += "| A | B | AUC(A) - AUC(B) | A wins | B wins | ties |\n";
  md += "|---|---|-----------------|--------|--------|------|\n";
  for (const auto& p : cmp.pairwise) {
    md += "| " + p.a + " | " + p.b + " | " + fixed(p.auc_diff, 2) + " | " +
          std::to_string(p.a_wins) + " | " + std::to_string(p.b_wins) + " | " +
          std::to_string(p.ties) + " |\n";
  }
  return md;
}

std::string plot_script_text() {
  return R"PY(#!/usr/bin/env python3
"""Plot the success-rate learning curves found in curves/*_mean.csv."""
import csv
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> None:
    here = os.path.dirname(os.path.abspath(__file__))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for path in sorted(glob.glob(os.path.join(here, "curves", "*_mean.csv"))):
        agent = os.path.basename(path)[: -len("_mean.csv")]
        xs, ys, errs = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                xs.append(int(row["dialogues"]))
                ys.append(float(row["success_mean"]))
                errs.append(float(row["success_stderr"]))
        ax.errorbar(xs, ys, yerr=errs, label=agent, capsize=2)
    ax.set_xlabel("training dialogues")
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    out = os.path.join(here, "curves.png")
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
)PY";
}

}  // namespace dialbench
