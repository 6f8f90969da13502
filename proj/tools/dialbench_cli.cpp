// Command-line front end: train single runs, run the full agent benchmark,
// re-evaluate saved checkpoints at arbitrary error rates, and rebuild or
// compare curve aggregates.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dialbench/checkpoint.hpp"
#include "dialbench/errors.hpp"
#include "dialbench/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dialbench;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string agent;
  std::vector<std::uint64_t> seeds;
  double train_error = -1.0;
  double eval_error = -1.0;
  int budget = -1;
  std::string out_dir = "out";
};

void add_common_flags(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path,
                  "Experiment config JSON (defaults apply when omitted)");
  cmd->add_option("--agent", opts->agent,
                  "Agent tag: dqn, bbqn, alpha-bbqn, dropout, concrete, "
                  "bootstrapped, gpsarsa");
  cmd->add_option("--seed", opts->seeds, "Seed (repeatable; replaces the list)");
  cmd->add_option("--train-error", opts->train_error,
                  "Training semantic error rate in [0, 1)");
  cmd->add_option("--eval-error", opts->eval_error,
                  "Evaluation semantic error rate in [0, 1)");
  cmd->add_option("--budget", opts->budget, "Training dialogues");
  cmd->add_option("--out", opts->out_dir, "Output directory");
}

ExperimentConfig make_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = load_experiment_config(opts.config_path);
  }
  if (!opts.agent.empty()) cfg.agent = opts.agent;
  if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
  if (opts.train_error >= 0.0) cfg.train_error = opts.train_error;
  if (opts.eval_error >= 0.0) cfg.eval_error = opts.eval_error;
  if (opts.budget > 0) cfg.budget = opts.budget;
  return cfg;
}

int report_experiment(const ExperimentResult& result,
                      const std::string& out_dir) {
  for (const auto& err : result.errors) {
    std::fprintf(stderr, "error: %s\n", err.c_str());
  }
  for (std::size_t s = 0; s < result.curve.seeds.size(); ++s) {
    const int last = result.curve.checkpoints() - 1;
    std::printf("%s seed %llu: final success %.3f, mean reward %.2f\n",
                result.curve.agent.c_str(),
                static_cast<unsigned long long>(result.curve.seeds[s]),
                result.curve.success[s][static_cast<std::size_t>(last)],
                result.curve.reward[s][static_cast<std::size_t>(last)]);
  }
  if (!result.curve.seeds.empty()) {
    std::printf("curves written under %s\n",
                (fs::path(out_dir) / "curves").string().c_str());
  }
  return result.errors.empty() ? 0 : 1;
}

int cmd_train(const CommonOpts& opts) {
  const ExperimentConfig cfg = make_config(opts);
  return report_experiment(run_experiment(cfg, opts.out_dir), opts.out_dir);
}

int cmd_bench(const CommonOpts& opts, const std::vector<std::string>& agents) {
  const ExperimentConfig base = make_config(opts);
  std::vector<std::string> roster = agents;
  if (roster.empty()) {
    roster = {"dqn",          "bbqn",    "alpha-bbqn", "dropout",
              "concrete",     "bootstrapped", "gpsarsa"};
  }
  int status = 0;
  std::vector<LearningCurve> curves;
  for (const auto& tag : roster) {
    ExperimentConfig cfg = base;
    cfg.agent = tag;
    std::printf("== %s ==\n", tag.c_str());
    const ExperimentResult result = run_experiment(cfg, opts.out_dir);
    status |= report_experiment(result, opts.out_dir);
    if (!result.curve.seeds.empty()) curves.push_back(result.curve);
  }
  if (curves.size() > 1) {
    const std::string report = comparison_report_md(compare(curves));
    write_text_file((fs::path(opts.out_dir) / "report.md").string(), report);
    std::printf("report written to %s\n",
                (fs::path(opts.out_dir) / "report.md").string().c_str());
  }
  return status;
}

int cmd_eval(const std::string& checkpoint_file, const CommonOpts& opts,
             int dialogues) {
  const std::string text = read_text_file(checkpoint_file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("checkpoint parse failure: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("config")) {
    throw ProtocolError("checkpoint is missing its agent config");
  }
  const AgentConfig acfg = agent_config_from_json(doc["config"]);
  const std::uint64_t seed = opts.seeds.empty() ? 1 : opts.seeds.front();
  auto agent = make_agent(acfg, seed);
  agent->restore(text);

  ExperimentConfig cfg = make_config(opts);
  EnvConfig env_cfg = cfg.env;
  env_cfg.channel.error_rate = opts.eval_error >= 0.0 ? opts.eval_error : 0.0;
  Rng rng = Rng::derive(seed, 0x4556414cULL);
  const EvalResult r =
      evaluate(*agent, cfg.ontology, env_cfg, dialogues, rng);
  std::printf("success %.4f mean_reward %.3f over %d dialogues at e=%.3f\n",
              r.success_rate, r.mean_reward, dialogues,
              env_cfg.channel.error_rate);
  return 0;
}

int cmd_aggregate(const CommonOpts& opts,
                  const std::vector<std::string>& agents) {
  std::vector<std::string> roster = agents;
  if (!opts.agent.empty()) roster.push_back(opts.agent);
  if (roster.empty()) {
    throw ConfigError("aggregate: name at least one agent via --agent");
  }
  for (const auto& tag : roster) {
    const LearningCurve curve = load_curve_from_dir(opts.out_dir, tag);
    write_curve_files(curve, opts.out_dir);
    std::printf("%s: aggregated %zu seeds over %d checkpoints\n", tag.c_str(),
                curve.seeds.size(), curve.checkpoints());
  }
  return 0;
}

int cmd_compare(const CommonOpts& opts, std::vector<std::string> agents) {
  if (!opts.agent.empty()) agents.push_back(opts.agent);
  if (agents.empty()) {
    // Discover agents from curves/*_mean.csv.
    const fs::path dir = fs::path(opts.out_dir) / "curves";
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_mean.csv";
        if (name.size() > suffix.size() &&
            name.substr(name.size() - suffix.size()) == suffix) {
          agents.push_back(name.substr(0, name.size() - suffix.size()));
        }
      }
    }
    std::sort(agents.begin(), agents.end());
  }
  if (agents.empty()) {
    throw ConfigError("compare: no curves found under " + opts.out_dir);
  }
  std::vector<LearningCurve> curves;
  for (const auto& tag : agents) {
    curves.push_back(load_curve_from_dir(opts.out_dir, tag));
  }
  const std::string report = comparison_report_md(compare(curves));
  const std::string path = (fs::path(opts.out_dir) / "report.md").string();
  write_text_file(path, report);
  std::printf("%s", report.c_str());
  std::printf("report written to %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue-policy benchmark: train, evaluate, and compare "
               "uncertainty-driven exploration agents"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  auto* train = app.add_subcommand("train", "Train one agent over its seeds");
  add_common_flags(train, &train_opts);

  CommonOpts bench_opts;
  std::vector<std::string> bench_agents;
  auto* bench =
      app.add_subcommand("bench", "Run the full agent matrix and a report");
  add_common_flags(bench, &bench_opts);
  bench->add_option("--agents", bench_agents,
                    "Agent tags to include (default: all seven)");

  CommonOpts eval_opts;
  std::string checkpoint_file;
  int eval_dialogues = 200;
  auto* evalc = app.add_subcommand(
      "eval", "Re-evaluate a saved checkpoint at an arbitrary error rate");
  evalc->add_option("checkpoint", checkpoint_file, "Agent checkpoint JSON")
      ->required();
  add_common_flags(evalc, &eval_opts);
  evalc->add_option("--dialogues", eval_dialogues, "Evaluation dialogues");

  CommonOpts agg_opts;
  std::vector<std::string> agg_agents;
  auto* agg = app.add_subcommand(
      "aggregate", "Rebuild <agent>_mean.csv from the per-seed curves");
  add_common_flags(agg, &agg_opts);
  agg->add_option("--agents", agg_agents, "Agent tags to aggregate");

  CommonOpts cmp_opts;
  std::vector<std::string> cmp_agents;
  auto* cmp = app.add_subcommand(
      "compare", "Rank stored curves by AUC and write report.md");
  add_common_flags(cmp, &cmp_opts);
  cmp->add_option("--agents", cmp_agents, "Agent tags to compare");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (bench->parsed()) return cmd_bench(bench_opts, bench_agents);
    if (evalc->parsed())
      return cmd_eval(checkpoint_file, eval_opts, eval_dialogues);
    if (agg->parsed()) return cmd_aggregate(agg_opts, agg_agents);
    if (cmp->parsed()) return cmd_compare(cmp_opts, cmp_agents);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
