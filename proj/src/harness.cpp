#include "radseek/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace radseek {

WilsonInterval wilson_interval(int successes, int trials, double z) {
  WilsonInterval ci;
  if (trials <= 0) return ci;
  const double n = trials;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  ci.low = std::max(0.0, center - half);
  ci.high = std::min(1.0, center + half);
  return ci;
}

std::string to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::kDistance: return "distance";
    case RewardVariant::kSignal: return "signal";
    case RewardVariant::kComposite: return "composite";
  }
  return "composite";
}

RewardVariant reward_variant_from_string(const std::string& s) {
  if (s == "distance") return RewardVariant::kDistance;
  if (s == "signal") return RewardVariant::kSignal;
  if (s == "composite") return RewardVariant::kComposite;
  throw std::invalid_argument("unknown reward variant: " + s);
}

EnvConfig apply_reward_variant(const EnvConfig& base, RewardVariant v) {
  EnvConfig cfg = base;
  switch (v) {
    case RewardVariant::kDistance:
      cfg.lambda_dense = 1.0;
      cfg.lambda_f = 0.0;
      break;
    case RewardVariant::kSignal:
      cfg.lambda_dense = 0.0;
      cfg.lambda_f = 1.0;
      break;
    case RewardVariant::kComposite:
      cfg.lambda_dense = 1.0;
      cfg.lambda_f = 0.1;
      break;
  }
  return cfg;
}

EvalCell evaluate(const EnvConfig& base, const ScanConfig& scan,
                  const EvaluateOptions& opts) {
  if (opts.n_trials <= 0) {
    throw std::invalid_argument("evaluate: n_trials must be > 0");
  }
  const bool is_scan = opts.method == "scan";
  const bool is_drl = opts.method == "drl";
  const bool is_hybrid = opts.method == "hybrid";
  if (!is_scan && !is_drl && !is_hybrid) {
    throw std::invalid_argument("evaluate: unknown method '" + opts.method +
                                "' (expected scan, drl or hybrid)");
  }

  EnvConfig cfg = base;
  cfg.sigma_mm = opts.sigma_mm;
  cfg.noiseless = opts.noiseless;
  cfg.record_trace = !opts.trace_path.empty();
  if (is_scan) {
    // scanning has no step budget of its own; its cost is reported
    cfg.horizon = opts.scan_rounds * (scan.grid_n * scan.grid_n + 1) + 50;
  }

  Checkpoint ckpt{PolicyNet(1, 1, 1, 1), RunningNorm(1)};
  if (is_drl || is_hybrid) {
    if (opts.checkpoint.empty()) {
      throw std::runtime_error("evaluate: method '" + opts.method +
                               "' needs --checkpoint");
    }
    ckpt = load_checkpoint(opts.checkpoint);
  }

  HybridConfig hybrid_cfg;
  hybrid_cfg.scan = scan;

  Env env(cfg);
  std::ofstream trace_out;
  if (!opts.trace_path.empty()) {
    trace_out.open(opts.trace_path);
    if (!trace_out) {
      throw std::runtime_error("evaluate: cannot write traces to " +
                               opts.trace_path);
    }
    trace_out << trace_csv_header() << "\n";
  }

  EvalCell cell;
  cell.method = opts.method;
  cell.sigma_mm = opts.sigma_mm;
  cell.noiseless = opts.noiseless;
  cell.n_trials = opts.n_trials;

  long steps_sum = 0;
  for (int i = 0; i < opts.n_trials; ++i) {
    const std::uint64_t seed = derive_seed(opts.seed, 1000 + i);
    EpisodeRecord rec;
    if (is_scan) {
      rec = run_scan_episode(env, scan, seed, opts.scan_rounds);
    } else if (is_drl) {
      rec = run_drl_episode(env, ckpt.net, ckpt.norm, seed);
    } else {
      rec = run_episode(env, ckpt.net, ckpt.norm, hybrid_cfg, seed);
    }
    if (rec.success) {
      cell.n_success += 1;
      steps_sum += rec.total_steps;
    }
    if (trace_out.is_open()) {
      char meta[256];
      std::snprintf(meta, sizeof(meta),
                    "episode %d seed %llu method %s sigma %.6g source "
                    "%.6f %.6f %.6f",
                    i, static_cast<unsigned long long>(seed),
                    opts.method.c_str(), opts.sigma_mm, rec.source_mm[0],
                    rec.source_mm[1], rec.source_mm[2]);
      append_trace_csv(trace_out, rec.trace, meta, false);
    }
  }
  cell.success_rate =
      static_cast<double>(cell.n_success) / static_cast<double>(cell.n_trials);
  cell.ci = wilson_interval(cell.n_success, cell.n_trials);
  cell.mean_steps_success =
      cell.n_success > 0
          ? static_cast<double>(steps_sum) / static_cast<double>(cell.n_success)
          : -1.0;
  return cell;
}

AblationResult run_ablation(const std::vector<RewardVariant>& variants,
                            const std::vector<std::uint64_t>& seeds,
                            const TrainConfig& train_cfg,
                            const EnvConfig& env_cfg,
                            const ScanConfig& scan_cfg,
                            const std::string& out_dir, bool verbose) {
  if (seeds.empty()) {
    throw std::invalid_argument("run_ablation: need at least one seed");
  }
  std::filesystem::create_directories(out_dir);

  AblationResult result;
  for (const RewardVariant v : variants) {
    const EnvConfig cfg = apply_reward_variant(env_cfg, v);
    for (const std::uint64_t seed : seeds) {
      TrainConfig tc = train_cfg;
      tc.seed = seed;
      const std::string stem =
          out_dir + "/ablation_" + to_string(v) + "_seed" +
          std::to_string(seed);
      if (verbose) {
        std::printf("[ablate] %s seed %llu\n", to_string(v).c_str(),
                    static_cast<unsigned long long>(seed));
        std::fflush(stdout);
      }
      const TrainResult tr =
          train(tc, cfg, scan_cfg, stem + ".ckpt", stem + ".csv", false);
      AblationRun run;
      run.variant = v;
      run.seed = seed;
      run.curve = tr.curve;
      if (!tr.curve.empty()) {
        run.final_success = tr.curve.back().success_rate;
        run.final_episode_len = tr.curve.back().mean_episode_len;
      }
      result.runs.push_back(std::move(run));
    }
  }

  auto stats_for = [&](RewardVariant v, double& mean_s, double& var_s,
                       double& mean_len) {
    std::vector<double> succ, lens;
    for (const auto& run : result.runs) {
      if (run.variant != v) continue;
      succ.push_back(run.final_success);
      lens.push_back(run.final_episode_len);
    }
    mean_s = 0.0;
    var_s = 0.0;
    mean_len = 0.0;
    if (succ.empty()) return;
    for (double s : succ) mean_s += s;
    mean_s /= static_cast<double>(succ.size());
    for (double s : succ) var_s += (s - mean_s) * (s - mean_s);
    var_s /= std::max<std::size_t>(1, succ.size() - 1);
    for (double s : lens) mean_len += s;
    mean_len /= static_cast<double>(lens.size());
  };

  AblationSummary& sum = result.summary;
  stats_for(RewardVariant::kDistance, sum.mean_final_success[0],
            sum.var_final_success[0], sum.mean_final_eplen[0]);
  stats_for(RewardVariant::kSignal, sum.mean_final_success[1],
            sum.var_final_success[1], sum.mean_final_eplen[1]);
  stats_for(RewardVariant::kComposite, sum.mean_final_success[2],
            sum.var_final_success[2], sum.mean_final_eplen[2]);
  sum.success_ordering_ok =
      sum.mean_final_success[2] >= sum.mean_final_success[0];
  sum.variance_ordering_ok =
      sum.var_final_success[1] > sum.var_final_success[2];
  sum.eplen_ordering_ok = sum.mean_final_eplen[0] >= sum.mean_final_eplen[2];
  return result;
}

FitReport calibrate_cmd(const CalibrateOptions& opts) {
  CalibrationSet data;
  double r_mm = opts.truth.r_mm;
  if (opts.synthetic) {
    CalibrationProtocol protocol;
    protocol.noise = opts.noiseless ? NoiseMode::kNone : opts.noise;
    protocol.gaussian_sigma = opts.noise_sigma;
    Rng rng(derive_seed(opts.seed, 0xca11bULL));
    data = generate_calibration_grid(opts.truth, protocol, rng);
  } else {
    data = read_calibration_file(opts.input_path);
    r_mm = opts.initial_guess.r_mm;
  }

  const FitReport report = fit_response(data, r_mm, opts.initial_guess);

  if (!opts.report_path.empty()) {
    std::ofstream out(opts.report_path);
    if (!out) {
      throw std::runtime_error("cannot write fit report: " + opts.report_path);
    }
    out << format_fit_report(report);
  }
  if (!opts.pairs_path.empty()) {
    std::ofstream out(opts.pairs_path);
    if (!out) {
      throw std::runtime_error("cannot write fit pairs: " + opts.pairs_path);
    }
    out << "d_mm,alpha_deg,cps_observed,cps_predicted,valid\n";
    char buf[160];
    for (const auto& m : data.points) {
      const double pred =
          expected_cps_at(report.params, m.d_mm, m.alpha_rad);
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%d\n", m.d_mm,
                    m.alpha_rad * 180.0 / M_PI, m.cps, pred, m.valid ? 1 : 0);
      out << buf;
    }
  }
  return report;
}

void export_results(const EvalReport& report, const std::string& csv_path,
                    const std::string& json_path) {
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write results: " + csv_path);
    out << "method,sigma_mm,noiseless,n_trials,n_success,success_rate,"
           "ci_low,ci_high,mean_steps_success\n";
    char buf[256];
    for (const auto& c : report.cells) {
      std::snprintf(buf, sizeof(buf), "%s,%.6g,%d,%d,%d,%.6f,%.6f,%.6f,%.6f\n",
                    c.method.c_str(), c.sigma_mm, c.noiseless ? 1 : 0,
                    c.n_trials, c.n_success, c.success_rate, c.ci.low,
                    c.ci.high, c.mean_steps_success);
      out << buf;
    }
  }
  if (!json_path.empty()) {
    nlohmann::ordered_json doc;
    doc["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
      nlohmann::ordered_json cell;
      cell["method"] = c.method;
      cell["sigma_mm"] = c.sigma_mm;
      cell["noiseless"] = c.noiseless;
      cell["n_trials"] = c.n_trials;
      cell["n_success"] = c.n_success;
      cell["success_rate"] = c.success_rate;
      cell["ci_low"] = c.ci.low;
      cell["ci_high"] = c.ci.high;
      cell["mean_steps_success"] = c.mean_steps_success;
      doc["cells"].push_back(cell);
    }
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write results: " + json_path);
    out << doc.dump(2) << "\n";
  }
}

std::string results_dir_from_env(const std::string& fallback) {
  const char* dir = std::getenv("RADSEEK_RESULTS_DIR");
  return dir != nullptr && dir[0] != '\0' ? dir : fallback;
}

}  // namespace radseek
