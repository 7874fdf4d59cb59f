#pragma once

#include <string>
#include <vector>

#include "radseek/hybrid.hpp"

namespace radseek {

struct WilsonInterval {
  double low = 0.0;
  double high = 0.0;
};
WilsonInterval wilson_interval(int successes, int trials, double z = 1.96);

struct EvalCell {
  std::string method;  // scan | drl | hybrid
  double sigma_mm = 0.0;
  bool noiseless = false;
  int n_trials = 0;
  int n_success = 0;
  double success_rate = 0.0;
  WilsonInterval ci;
  // mean steps over successful trials only; -1 when there were none
  double mean_steps_success = -1.0;
};

struct EvalReport {
  std::vector<EvalCell> cells;
};

struct EvaluateOptions {
  std::string method = "hybrid";
  double sigma_mm = 30.0;
  int n_trials = 100;
  std::uint64_t seed = 1;
  bool noiseless = false;
  std::string checkpoint;   // required for drl / hybrid
  std::string trace_path;   // per-episode traces appended when non-empty
  int scan_rounds = 60;     // scan-only round budget (not step-capped)
};

// n_trials seeded episodes of one method at one randomization level.
// Episode seeds derive from (seed, index) only, so different methods run
// against identical source placements.
EvalCell evaluate(const EnvConfig& base, const ScanConfig& scan,
                  const EvaluateOptions& opts);

enum class RewardVariant { kDistance, kSignal, kComposite };
std::string to_string(RewardVariant v);
RewardVariant reward_variant_from_string(const std::string& s);

// Reward weights for one ablation arm, applied on top of a base config.
EnvConfig apply_reward_variant(const EnvConfig& base, RewardVariant v);

struct AblationRun {
  RewardVariant variant = RewardVariant::kComposite;
  std::uint64_t seed = 0;
  std::vector<LearningCurveRow> curve;
  double final_success = 0.0;
  double final_episode_len = 0.0;
};

struct AblationSummary {
  double mean_final_success[3] = {0.0, 0.0, 0.0};   // indexed by variant
  double var_final_success[3] = {0.0, 0.0, 0.0};
  double mean_final_eplen[3] = {0.0, 0.0, 0.0};
  bool success_ordering_ok = false;   // composite >= distance
  bool variance_ordering_ok = false;  // signal > composite
  bool eplen_ordering_ok = false;     // distance >= composite
};

struct AblationResult {
  std::vector<AblationRun> runs;
  AblationSummary summary;
};

// Trains each requested variant once per seed under matched budgets and
// summarizes the final-performance orderings.
AblationResult run_ablation(const std::vector<RewardVariant>& variants,
                            const std::vector<std::uint64_t>& seeds,
                            const TrainConfig& train_cfg,
                            const EnvConfig& env_cfg,
                            const ScanConfig& scan_cfg,
                            const std::string& out_dir, bool verbose = false);

struct CalibrateOptions {
  bool synthetic = true;
  std::string input_path;  // used when synthetic is false
  bool noiseless = false;
  std::uint64_t seed = 1;
  NoiseMode noise = NoiseMode::kGaussian;
  double noise_sigma = 2.78;
  ResponseParams truth;             // generator parameters (synthetic)
  ResponseParams initial_guess{5.0, 20.0, 100.0, 1.0};
  std::string report_path;
  std::string pairs_path;  // predicted-vs-actual series for plotting
};

FitReport calibrate_cmd(const CalibrateOptions& opts);

// Machine-readable results: CSV + a structured JSON summary. Re-export of
// an identical report produces identical bytes.
void export_results(const EvalReport& report, const std::string& csv_path,
                    const std::string& json_path);

std::string results_dir_from_env(const std::string& fallback = "results");

}  // namespace radseek
