// radseek command-line front end: calibration, scanning demos, training,
// evaluation, the reward ablation and single hybrid runs share one config
// schema; every subcommand is deterministic for a fixed config and seed.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "radseek/harness.hpp"

using namespace radseek;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMethodFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonArgs {
  std::string config_path;
  std::string results_dir;
};

KeyValueConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) return KeyValueConfig{};
  return KeyValueConfig::load(args.config_path);
}

void print_cell(const EvalCell& c) {
  std::printf("%-7s sigma=%-4.0f n=%-4d success=%.3f [%.3f, %.3f] "
              "mean_steps=%.1f%s\n",
              c.method.c_str(), c.sigma_mm, c.n_trials, c.success_rate,
              c.ci.low, c.ci.high, c.mean_steps_success,
              c.noiseless ? " (noiseless)" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radseek: radioactive source seeking simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CommonArgs common;
  common.results_dir = results_dir_from_env();
  app.add_option("--config", common.config_path,
                 "key-value config file (shared schema)");
  app.add_option("--results-dir", common.results_dir,
                 "output directory (env RADSEEK_RESULTS_DIR)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit the response model");
  std::string cal_input;
  bool cal_synthetic = false, cal_noiseless = false;
  std::uint64_t cal_seed = 1;
  double cal_sigma = 2.78;
  cal->add_option("--input", cal_input, "calibration data file");
  cal->add_flag("--synthetic", cal_synthetic, "generate a synthetic grid");
  cal->add_flag("--noiseless", cal_noiseless, "no measurement noise");
  cal->add_option("--seed", cal_seed, "rng seed");
  cal->add_option("--noise-sigma", cal_sigma, "additive noise scale");

  // scan-demo
  auto* scan_demo = app.add_subcommand("scan-demo", "run adaptive scanning");
  std::uint64_t sd_seed = 1;
  double sd_sigma = 30.0;
  bool sd_noiseless = false;
  scan_demo->add_option("--seed", sd_seed, "rng seed");
  scan_demo->add_option("--sigma", sd_sigma, "source randomization (mm)");
  scan_demo->add_flag("--noiseless", sd_noiseless, "expected CPS, no noise");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the policy");
  std::string tr_reward = "composite", tr_out = "policy.ckpt", tr_curve;
  long tr_steps = 0;
  std::uint64_t tr_seed = 0;
  bool tr_phase1 = false, tr_no_phase1 = false;
  train_cmd->add_option("--reward", tr_reward,
                        "distance | signal | composite");
  train_cmd->add_option("--steps", tr_steps, "total env steps (override)");
  train_cmd->add_option("--seed", tr_seed, "training seed (override)");
  train_cmd->add_option("--out", tr_out, "checkpoint file");
  train_cmd->add_option("--curve", tr_curve, "learning-curve CSV");
  train_cmd->add_flag("--phase1-init", tr_phase1,
                      "scan at every episode start");
  train_cmd->add_flag("--no-phase1-init", tr_no_phase1,
                      "force plain resets");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "batch evaluation");
  EvaluateOptions eval_opts;
  bool ev_traces = false;
  eval_cmd->add_option("--method", eval_opts.method, "scan | drl | hybrid")
      ->required();
  eval_cmd->add_option("--sigma", eval_opts.sigma_mm, "randomization (mm)");
  eval_cmd->add_option("--n", eval_opts.n_trials, "number of trials");
  eval_cmd->add_option("--seed", eval_opts.seed, "base seed");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint,
                       "policy checkpoint (drl / hybrid)");
  eval_cmd->add_flag("--noiseless", eval_opts.noiseless, "expected CPS");
  eval_cmd->add_flag("--traces", ev_traces, "persist episode traces");

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "reward-design ablation");
  std::string abl_reward = "all";
  std::vector<std::uint64_t> abl_seeds;
  long abl_steps = 0;
  abl_cmd->add_option("--reward", abl_reward,
                      "all | distance | signal | composite");
  abl_cmd->add_option("--seeds", abl_seeds, "training seeds");
  abl_cmd->add_option("--steps", abl_steps, "budget per run (override)");

  // hybrid-run
  auto* hyb_cmd = app.add_subcommand("hybrid-run", "one hybrid episode");
  std::string hy_ckpt;
  std::uint64_t hy_seed = 1;
  double hy_sigma = 30.0;
  bool hy_noiseless = false;
  hyb_cmd->add_option("--checkpoint", hy_ckpt, "policy checkpoint")
      ->required();
  hyb_cmd->add_option("--seed", hy_seed, "episode seed");
  hyb_cmd->add_option("--sigma", hy_sigma, "randomization (mm)");
  hyb_cmd->add_flag("--noiseless", hy_noiseless, "expected CPS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    const KeyValueConfig cfg = load_config(common);
    EnvConfig env_cfg = EnvConfig::from_config(cfg);
    ScanConfig scan_cfg = ScanConfig::from_config(cfg);
    std::filesystem::create_directories(common.results_dir);
    const std::string rd = common.results_dir + "/";

    if (cal->parsed()) {
      CalibrateOptions opts;
      opts.synthetic = cal_synthetic || cal_input.empty();
      opts.input_path = cal_input;
      opts.noiseless = cal_noiseless;
      opts.seed = cal_seed;
      opts.noise_sigma = cal_sigma;
      opts.truth = env_cfg.response;
      opts.initial_guess = ResponseParams{env_cfg.response.r_mm, 20.0, 100.0,
                                          1.0};
      opts.report_path = rd + "fit_report.txt";
      opts.pairs_path = rd + "fit_pairs.csv";
      const FitReport report = calibrate_cmd(opts);
      std::fputs(format_fit_report(report).c_str(), stdout);
      std::printf("wrote %s and %s\n", opts.report_path.c_str(),
                  opts.pairs_path.c_str());
      return kExitOk;
    }

    if (scan_demo->parsed()) {
      env_cfg.sigma_mm = sd_sigma;
      env_cfg.noiseless = sd_noiseless;
      Env env(env_cfg);
      env.reset(sd_seed);
      const Phase1Result phase1 = run_phase1(env, scan_cfg);
      write_scan_trace(phase1.rounds, rd + "scan_trace.txt");
      write_trace_csv(env.trace(), rd + "scan_episode.csv");
      std::printf("rounds=%d steps=%d resolved=%d heading=[%.4f %.4f %.4f]\n",
                  phase1.rounds_used, phase1.steps_used,
                  phase1.resolved ? 1 : 0, phase1.heading[0],
                  phase1.heading[1], phase1.heading[2]);
      std::printf("source distance after scanning: %.2f mm\n",
                  env.distance_to_source());
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      TrainConfig tc = TrainConfig::from_config(cfg);
      if (tr_steps > 0) tc.total_env_steps = tr_steps;
      if (tr_seed != 0) tc.seed = tr_seed;
      if (tr_phase1) tc.phase1_init = true;
      if (tr_no_phase1) tc.phase1_init = false;
      const EnvConfig reward_cfg =
          apply_reward_variant(env_cfg, reward_variant_from_string(tr_reward));
      const std::string curve =
          tr_curve.empty() ? rd + "learning_curve.csv" : tr_curve;
      const TrainResult result =
          train(tc, reward_cfg, scan_cfg, tr_out, curve, true);
      std::printf("trained %ld steps, best rolling success %.3f\n",
                  result.total_steps, result.best_success);
      std::printf("checkpoint: %s\ncurve: %s\n", tr_out.c_str(),
                  curve.c_str());
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      if (ev_traces) {
        eval_opts.trace_path = rd + "traces_" + eval_opts.method + "_sigma" +
                               std::to_string(static_cast<int>(
                                   eval_opts.sigma_mm)) +
                               ".csv";
      }
      const EvalCell cell = evaluate(env_cfg, scan_cfg, eval_opts);
      print_cell(cell);
      EvalReport report;
      report.cells.push_back(cell);
      export_results(report, rd + "eval_" + eval_opts.method + ".csv",
                     rd + "eval_" + eval_opts.method + ".json");
      return kExitOk;
    }

    if (abl_cmd->parsed()) {
      TrainConfig tc = TrainConfig::from_config(cfg);
      tc.phase1_init = false;  // the ablation probes the learner itself
      if (abl_steps > 0) tc.total_env_steps = abl_steps;
      if (abl_seeds.empty()) abl_seeds = {1, 2, 3};
      std::vector<RewardVariant> variants;
      if (abl_reward == "all") {
        variants = {RewardVariant::kDistance, RewardVariant::kSignal,
                    RewardVariant::kComposite};
      } else {
        variants = {reward_variant_from_string(abl_reward)};
      }
      const AblationResult result = run_ablation(
          variants, abl_seeds, tc, env_cfg, scan_cfg, common.results_dir,
          true);
      for (const auto& run : result.runs) {
        std::printf("%-9s seed %llu: final success %.3f, episode len %.1f\n",
                    to_string(run.variant).c_str(),
                    static_cast<unsigned long long>(run.seed),
                    run.final_success, run.final_episode_len);
      }
      if (abl_reward == "all") {
        const auto& s = result.summary;
        std::printf("success ordering (composite >= distance): %s\n",
                    s.success_ordering_ok ? "ok" : "VIOLATED");
        std::printf("variance ordering (signal > composite): %s\n",
                    s.variance_ordering_ok ? "ok" : "VIOLATED");
        std::printf("episode-length ordering (distance >= composite): %s\n",
                    s.eplen_ordering_ok ? "ok" : "VIOLATED");
        if (!s.success_ordering_ok || !s.variance_ordering_ok ||
            !s.eplen_ordering_ok) {
          return kExitMethodFailure;
        }
      }
      return kExitOk;
    }

    if (hyb_cmd->parsed()) {
      env_cfg.sigma_mm = hy_sigma;
      env_cfg.noiseless = hy_noiseless;
      Env env(env_cfg);
      const Checkpoint ckpt = load_checkpoint(hy_ckpt);
      HybridConfig hc;
      hc.scan = scan_cfg;
      hc.checkpoint_path = hy_ckpt;
      const EpisodeRecord rec =
          run_episode(env, ckpt.net, ckpt.norm, hc, hy_seed);
      write_trace_csv(rec.trace, rd + "hybrid_episode.csv");
      std::printf("success=%d steps=%d (phase1 %d + phase2 %d) "
                  "final_distance=%.2f mm resolved=%d\n",
                  rec.success ? 1 : 0, rec.total_steps, rec.phase1_steps,
                  rec.phase2_steps, rec.final_distance_mm,
                  rec.phase1_resolved ? 1 : 0);
      return rec.success || rec.final_distance_mm < 1e9 ? kExitOk
                                                        : kExitMethodFailure;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "argument error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMethodFailure;
  }
  return kExitOk;
}
