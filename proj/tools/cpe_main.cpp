// cpe: command-line front end for the critique-and-edit training toolkit.
// Commands: train, ablate, lc-eval, diagnose-imbalance, simulate-hacking,
// parse-grm. Everything that affects results lives in the JSON config; flags
// only choose the command and override seed/output paths.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpe/config.hpp"
#include "cpe/dataset.hpp"
#include "cpe/errors.hpp"
#include "cpe/eval.hpp"
#include "cpe/optim.hpp"
#include "cpe/svg.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
};

cpe::RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty())
    throw cpe::ConfigError("config", "a --config file is required");
  cpe::RunConfig cfg = cpe::load_run_config(args.config_path);
  if (args.seed_override) cfg.seed = *args.seed_override;
  if (args.out_override) cfg.output_dir = *args.out_override;
  return cfg;
}

cpe::RoundBackend make_backend(const cpe::RunConfig& cfg, const cpe::ToyEnv& env) {
  if (cfg.reward_backend == cpe::RewardBackendKind::Hackable)
    return cpe::hackable_backend(env);
  return cpe::grm_backend(env, cfg.grm_rules, cfg.weights);
}

cpe::TrainResult run_training(const cpe::RunConfig& cfg, const cpe::ToyEnv& env,
                              const cpe::RoundBackend& backend) {
  cpe::PolicyParams init = cpe::PolicyParams::short_answer_init(env);
  return cpe::train(std::move(init), env, backend, cfg.rollout, cfg.sampling,
                    cfg.clip, cfg.train, cfg.seed);
}

void require_toy_mode(const cpe::RunConfig& cfg) {
  if (cfg.mode != cpe::RunMode::Toy)
    throw cpe::ConfigError(
        "mode", "training runs need toy mode; llm mode has no behavior "
                "log-probabilities for the off-policy update");
}

int cmd_train(const CommonArgs& args) {
  const cpe::RunConfig cfg = load_config(args);
  require_toy_mode(cfg);
  const cpe::ToyEnv env(cfg.env);
  const cpe::RoundBackend backend = make_backend(cfg, env);
  const cpe::TrainResult result = run_training(cfg, env, backend);

  fs::create_directories(cfg.output_dir);
  const std::string csv_path = (fs::path(cfg.output_dir) / "train_log.csv").string();
  cpe::write_train_log_csv(csv_path, result.log);
  cpe::save_checkpoint((fs::path(cfg.output_dir) / "params.bin").string(),
                       result.params, cfg.seed, cfg.train.rounds);

  cpe::PlotSeries length_line{"mean response length", {}, "#1f77b4"};
  cpe::PlotSeries reward_bars{"mean reward", {}, "#ff7f0e"};
  for (const auto& row : result.log) {
    length_line.values.push_back(row.mean_length);
    reward_bars.values.push_back(row.mean_reward);
  }
  cpe::write_file((fs::path(cfg.output_dir) / "train.svg").string(),
                  cpe::render_dual_axis_svg("training run", "round",
                                            "response length", "reward",
                                            {length_line}, {reward_bars}));

  const auto& last = result.log.back();
  std::cout << "rounds=" << result.log.size()
            << " final_mean_reward=" << fmt(last.mean_reward)
            << " final_mean_length=" << fmt(last.mean_length, 1) << "\n"
            << "wrote " << csv_path << "\n";
  return 0;
}

double final_quarter_mean_reward(const std::vector<cpe::TrainLogRow>& log) {
  const std::size_t start = log.size() - std::max<std::size_t>(1, log.size() / 4);
  double sum = 0.0;
  for (std::size_t i = start; i < log.size(); ++i) sum += log[i].mean_reward;
  return sum / static_cast<double>(log.size() - start);
}

int cmd_ablate(const CommonArgs& args) {
  const cpe::RunConfig cfg = load_config(args);
  require_toy_mode(cfg);

  std::vector<cpe::SamplingStrategy> strategies = cfg.ablate_strategies;
  std::vector<double> ratios = cfg.ablate_ratios;
  const bool explicit_grid = cfg.ablate_specified;
  if (explicit_grid && (strategies.empty() || ratios.empty()))
    throw cpe::ConfigError("ablate", "strategy/ratio grid must be non-empty");
  if (!explicit_grid) {
    strategies = {cpe::SamplingStrategy::Random, cpe::SamplingStrategy::RewardRank,
                  cpe::SamplingStrategy::Conditional};
    ratios = {0.10, 0.25, 0.50, 0.75, 1.00};
  }

  const cpe::ToyEnv env(cfg.env);
  const cpe::RoundBackend backend = make_backend(cfg, env);

  std::map<std::pair<double, cpe::SamplingStrategy>, double> cells;
  std::vector<std::string> notes;
  for (double r : ratios) {
    for (cpe::SamplingStrategy strategy : strategies) {
      const bool rank_at_full = r >= 1.0 && strategy != cpe::SamplingStrategy::Random;
      // The default grid defines r_e = 1.0 for random sampling only.
      if (!explicit_grid && rank_at_full) continue;
      cpe::RunConfig cell_cfg = cfg;
      cell_cfg.sampling.strategy = strategy;
      cell_cfg.sampling.edit_ratio = r;
      const cpe::TrainResult result = run_training(cell_cfg, env, backend);
      cells[{r, strategy}] = final_quarter_mean_reward(result.log);
      if (rank_at_full) {
        notes.push_back(std::string("# ") + cpe::to_string(strategy) +
                        " at edit_ratio=1: ranking keeps every eligible edited "
                        "sample");
      }
      std::cout << "ran strategy=" << cpe::to_string(strategy) << " edit_ratio="
                << fmt(r, 2) << " final_mean_reward="
                << fmt(cells[{r, strategy}]) << "\n";
    }
  }

  std::string csv = "edit_ratio";
  for (auto s : strategies) csv += std::string(",") + cpe::to_string(s);
  csv += "\n";
  for (double r : ratios) {
    csv += fmt(r, 2);
    for (auto s : strategies) {
      auto it = cells.find({r, s});
      csv += ",";
      if (it != cells.end()) csv += fmt(it->second);
    }
    csv += "\n";
  }
  for (const auto& note : notes) csv += note + "\n";

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "ablation.csv").string();
  cpe::write_file(path, csv);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_lc_eval(const std::string& records_path, const std::string& kappa_a,
                const std::string& kappa_b, const std::string& out_dir) {
  bool did_anything = false;
  if (!kappa_a.empty() || !kappa_b.empty()) {
    if (kappa_a.empty() || kappa_b.empty())
      throw cpe::ConfigError("kappa", "needs two rater files");
    const auto a = cpe::load_label_lines(kappa_a);
    const auto b = cpe::load_label_lines(kappa_b);
    std::cout << "kappa = " << fmt(cpe::cohens_kappa(a, b)) << "\n";
    did_anything = true;
  }

  if (!records_path.empty()) {
    const auto records = cpe::load_judgment_records(records_path);
    if (records.empty())
      throw cpe::ConfigError("records", "no judgment records in " + records_path);
    const cpe::GlmFit fit = cpe::fit_lc_glm(records);

    std::string csv = "model,baseline,n,raw_winrate,lc_winrate,theta,phi,converged\n";
    cpe::PlotSeries raw_bars{"raw win rate", {}, "#ff7f0e"};
    cpe::PlotSeries lc_bars{"length-controlled win rate", {}, "#1f77b4"};
    cpe::PlotSeries len_line{"mean response length", {}, "#2ca02c"};
    for (const auto& [key, pf] : fit.pairs) {
      const double raw = cpe::raw_winrate(records, key.first, key.second);
      const double lc = cpe::lc_winrate(fit, key.first, key.second);
      std::cout << "model=" << key.first << " baseline=" << key.second
                << " n=" << pf.num_records << " raw_winrate=" << fmt(raw)
                << " lc_winrate=" << fmt(lc) << " theta=" << fmt(pf.theta)
                << " phi=" << fmt(pf.phi)
                << " converged=" << (pf.converged ? "yes" : "no") << "\n";
      csv += key.first + "," + key.second + "," + std::to_string(pf.num_records) +
             "," + fmt(raw) + "," + fmt(lc) + "," + fmt(pf.theta) + "," +
             fmt(pf.phi) + "," + (pf.converged ? "yes" : "no") + "\n";
      raw_bars.values.push_back(raw);
      lc_bars.values.push_back(lc);
      double len_sum = 0.0;
      int len_n = 0;
      for (const auto& r : records) {
        if (r.model_id == key.first && r.baseline_id == key.second) {
          len_sum += r.len_model;
          ++len_n;
        }
      }
      len_line.values.push_back(len_n ? len_sum / len_n : 0.0);
    }
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      cpe::write_file((fs::path(out_dir) / "lc_report.csv").string(), csv);
      cpe::write_file((fs::path(out_dir) / "lc_report.svg").string(),
                      cpe::render_dual_axis_svg(
                          "win rates with and without the length effect",
                          "(model, baseline) pair", "response length", "win rate",
                          {len_line}, {raw_bars, lc_bars}));
      std::cout << "wrote " << (fs::path(out_dir) / "lc_report.csv").string() << "\n";
    }
    did_anything = true;
  }

  if (!did_anything)
    throw cpe::ConfigError("records", "pass a records file and/or --kappa A B");
  return 0;
}

int cmd_diagnose_imbalance(const std::string& groups_path, double edit_ratio) {
  const auto groups = cpe::load_rollout_groups(groups_path);
  if (groups.empty())
    throw cpe::ConfigError("groups", "no rollout groups in " + groups_path);
  const auto [kept, report] = cpe::select_batch_level_rank(groups, edit_ratio);
  (void)kept;

  std::map<int, int, std::greater<int>> histogram;
  for (int c : report.per_question_counts) ++histogram[c];
  std::cout << "selected responses per question (originals + edited), edit_ratio="
            << fmt(edit_ratio, 2) << "\n";
  std::cout << "count  questions\n";
  for (const auto& [count, questions] : histogram) {
    std::cout << count << "      " << questions << "\n";
  }
  std::cout << "mean " << fmt(report.mean) << "\n";
  std::cout << "variance " << fmt(report.variance) << "\n";
  return 0;
}

int cmd_simulate_hacking(const CommonArgs& args) {
  const cpe::RunConfig cfg = load_config(args);
  require_toy_mode(cfg);
  const cpe::ToyEnv env(cfg.env);

  // Arm 1: scalar reward with the persona-mention shortcut; no critiques, so
  // no edits either. The rule-based critique score is logged as a diagnostic.
  cpe::RunConfig hack_cfg = cfg;
  hack_cfg.rollout.edit_rounds = 0;
  cpe::RoundBackend hack_backend = cpe::hackable_backend(env);
  const cpe::GrmRuleConfig rules = cfg.grm_rules;
  const cpe::DimWeights weights = cfg.weights;
  hack_backend.diagnostic_reward = [&env, rules, weights](
                                       const cpe::ResponseSample& s,
                                       const cpe::Persona& p, const cpe::Query& q) {
    return cpe::aggregate_final_score(cpe::simulated_grm(env, s, p, q, rules).scores,
                                      weights);
  };
  const cpe::TrainResult hack = cpe::train(cpe::PolicyParams::short_answer_init(env),
                                           env, hack_backend, hack_cfg.rollout,
                                           hack_cfg.sampling, hack_cfg.clip,
                                           hack_cfg.train, cfg.seed);

  // Arm 2: the rule-based critique model, same seed.
  const cpe::RoundBackend grm = cpe::grm_backend(env, cfg.grm_rules, cfg.weights);
  const cpe::TrainResult ref = run_training(cfg, env, grm);

  std::string csv =
      "round,mean_length_hackable,mean_length_grm,final_score_hackable,"
      "final_score_grm\n";
  cpe::PlotSeries len_hack{"length (hackable reward)", {}, "#d62728"};
  cpe::PlotSeries len_grm{"length (rule critique reward)", {}, "#1f77b4"};
  cpe::PlotSeries q_hack{"final score (hackable run)", {}, "#ff9896"};
  cpe::PlotSeries q_grm{"final score (critique run)", {}, "#aec7e8"};
  for (std::size_t i = 0; i < hack.log.size() && i < ref.log.size(); ++i) {
    csv += std::to_string(hack.log[i].round) + "," + fmt(hack.log[i].mean_length, 6) +
           "," + fmt(ref.log[i].mean_length, 6) + "," +
           fmt(hack.log[i].mean_diagnostic, 6) + "," +
           fmt(ref.log[i].mean_diagnostic, 6) + "\n";
    len_hack.values.push_back(hack.log[i].mean_length);
    len_grm.values.push_back(ref.log[i].mean_length);
    q_hack.values.push_back(hack.log[i].mean_diagnostic);
    q_grm.values.push_back(ref.log[i].mean_diagnostic);
  }

  fs::create_directories(cfg.output_dir);
  const std::string csv_path =
      (fs::path(cfg.output_dir) / "hacking_lengths.csv").string();
  cpe::write_file(csv_path, csv);
  cpe::write_file((fs::path(cfg.output_dir) / "hacking.svg").string(),
                  cpe::render_dual_axis_svg(
                      "reward hacking: response length under two rewards", "round",
                      "response length", "weighted final score",
                      {len_hack, len_grm}, {q_hack, q_grm}));

  auto quarter_mean = [](const std::vector<cpe::TrainLogRow>& log,
                         auto field) {
    const std::size_t start = log.size() - std::max<std::size_t>(1, log.size() / 4);
    double sum = 0.0;
    for (std::size_t i = start; i < log.size(); ++i) sum += field(log[i]);
    return sum / static_cast<double>(log.size() - start);
  };
  const double hack_len =
      quarter_mean(hack.log, [](const auto& r) { return r.mean_length; });
  const double grm_len =
      quarter_mean(ref.log, [](const auto& r) { return r.mean_length; });
  std::cout << "final-quarter mean length: hackable=" << fmt(hack_len, 1)
            << " rule-critique=" << fmt(grm_len, 1)
            << " ratio=" << fmt(grm_len > 0 ? hack_len / grm_len : 0.0, 2) << "\n"
            << "wrote " << csv_path << "\n";
  return 0;
}

int cmd_parse_grm(const std::string& path) {
  const std::string text = cpe::read_file(path);
  try {
    const cpe::Critique c = cpe::parse_grm_output(text);
    nlohmann::json j{{"feedback", c.feedback_text},
                     {"scores",
                      {{"helpfulness", c.scores.helpfulness},
                       {"personalization", c.scores.personalization},
                       {"naturalness", c.scores.naturalness}}},
                     {"flags", cpe::flag_names(c.flags)}};
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const cpe::ProtocolError& e) {
    std::cout << "parse error: " << cpe::to_string(e.kind()) << "\n";
    std::cerr << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"critique-and-edit RL toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  app.add_option("--config", common.config_path, "JSON run config");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "override the output directory");

  auto* train_cmd = app.add_subcommand("train", "run one training configuration");
  auto* ablate_cmd =
      app.add_subcommand("ablate", "train over a strategy x edit-ratio grid");

  auto* lc_cmd = app.add_subcommand("lc-eval", "length-controlled win rates");
  std::string records_path;
  lc_cmd->add_option("records", records_path, "JSONL judgment records");
  std::vector<std::string> kappa_files;
  lc_cmd->add_option("--kappa", kappa_files, "two rater label files")->expected(2);

  auto* diag_cmd = app.add_subcommand("diagnose-imbalance",
                                      "per-question counts under batch-level "
                                      "reward ranking");
  std::string groups_path;
  diag_cmd->add_option("groups", groups_path, "JSONL rollout groups")->required();
  double edit_ratio = 0.5;
  diag_cmd->add_option("--edit-ratio", edit_ratio, "selection ratio");

  auto* hack_cmd = app.add_subcommand(
      "simulate-hacking", "paired runs: hackable scalar reward vs rule critique");

  auto* parse_cmd = app.add_subcommand("parse-grm", "parse a raw critique reply");
  std::string grm_file;
  parse_cmd->add_option("file", grm_file, "text file with the raw reply")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (seed_opt->count() > 0) common.seed_override = seed_value;
  if (out_opt->count() > 0) common.out_override = out_value;

  try {
    if (*train_cmd) return cmd_train(common);
    if (*ablate_cmd) return cmd_ablate(common);
    if (*lc_cmd)
      return cmd_lc_eval(records_path,
                         kappa_files.size() == 2 ? kappa_files[0] : "",
                         kappa_files.size() == 2 ? kappa_files[1] : "",
                         common.out_override.value_or(""));
    if (*diag_cmd) return cmd_diagnose_imbalance(groups_path, edit_ratio);
    if (*hack_cmd) return cmd_simulate_hacking(common);
    if (*parse_cmd) return cmd_parse_grm(grm_file);
  } catch (const cpe::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
