#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "radseek/harness.hpp"

using namespace radseek;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("wilson intervals behave sensibly") {
  const WilsonInterval mid = wilson_interval(50, 100);
  CHECK(mid.low > 0.40);
  CHECK(mid.high < 0.60);
  CHECK(mid.low < 0.5);
  CHECK(mid.high > 0.5);

  const WilsonInterval all = wilson_interval(100, 100);
  CHECK(all.high == doctest::Approx(1.0));
  CHECK(all.low > 0.95);

  const WilsonInterval none = wilson_interval(0, 100);
  CHECK(none.low == doctest::Approx(0.0));
  CHECK(none.high < 0.05);

  const WilsonInterval empty = wilson_interval(0, 0);
  CHECK(empty.low == 0.0);
  CHECK(empty.high == 0.0);
}

TEST_CASE("reward variants map onto the documented weights") {
  EnvConfig base;
  const EnvConfig d = apply_reward_variant(base, RewardVariant::kDistance);
  CHECK(d.lambda_dense == 1.0);
  CHECK(d.lambda_f == 0.0);
  const EnvConfig s = apply_reward_variant(base, RewardVariant::kSignal);
  CHECK(s.lambda_dense == 0.0);
  CHECK(s.lambda_f == 1.0);
  const EnvConfig c = apply_reward_variant(base, RewardVariant::kComposite);
  CHECK(c.lambda_dense == 1.0);
  CHECK(c.lambda_f == doctest::Approx(0.1));

  CHECK(reward_variant_from_string("distance") == RewardVariant::kDistance);
  CHECK_THROWS_AS(reward_variant_from_string("bogus"),
                  std::invalid_argument);
}

TEST_CASE("evaluate validates its inputs") {
  EnvConfig env_cfg;
  ScanConfig scan_cfg;
  EvaluateOptions opts;
  opts.n_trials = 0;
  CHECK_THROWS_AS(evaluate(env_cfg, scan_cfg, opts), std::invalid_argument);

  opts.n_trials = 5;
  opts.method = "teleport";
  CHECK_THROWS_AS(evaluate(env_cfg, scan_cfg, opts), std::invalid_argument);

  opts.method = "hybrid";
  opts.checkpoint = "";
  CHECK_THROWS_AS(evaluate(env_cfg, scan_cfg, opts), std::runtime_error);
}

TEST_CASE("scan-only evaluation: high noiseless success at sigma 30") {
  EnvConfig env_cfg;
  ScanConfig scan_cfg;
  EvaluateOptions opts;
  opts.method = "scan";
  opts.sigma_mm = 30.0;
  opts.noiseless = true;
  opts.n_trials = 100;
  opts.seed = 4242;
  const EvalCell cell = evaluate(env_cfg, scan_cfg, opts);
  CHECK(cell.n_trials == 100);
  CHECK(cell.success_rate >= 0.95);
  CHECK(cell.mean_steps_success > 26.0);  // at least one full round

  // deterministic: identical options give an identical cell
  const EvalCell again = evaluate(env_cfg, scan_cfg, opts);
  CHECK(again.n_success == cell.n_success);
  CHECK(again.mean_steps_success == cell.mean_steps_success);
}

TEST_CASE("evaluation report numbers are recomputable from the traces") {
  EnvConfig env_cfg;
  ScanConfig scan_cfg;
  EvaluateOptions opts;
  opts.method = "scan";
  opts.sigma_mm = 30.0;
  opts.noiseless = true;
  opts.n_trials = 25;
  opts.seed = 31;
  opts.trace_path = "harness_traces.csv";
  const EvalCell cell = evaluate(env_cfg, scan_cfg, opts);

  // parse the persisted traces: per-episode source from the header line,
  // final tip from the last row before the next header
  std::ifstream in(opts.trace_path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // csv header
  int episodes = 0, successes = 0;
  Vec3 source = Vec3::Zero();
  Vec3 tip = Vec3::Zero();
  bool have_episode = false;
  auto close_episode = [&]() {
    if (!have_episode) return;
    ++episodes;
    if ((tip - source).norm() < env_cfg.success_radius_mm) ++successes;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      close_episode();
      have_episode = true;
      std::istringstream hs(line);
      std::string tok;
      while (hs >> tok && tok != "source") {
      }
      hs >> source[0] >> source[1] >> source[2];
      continue;
    }
    std::istringstream ls(line);
    std::string celltok;
    std::vector<double> row;
    while (std::getline(ls, celltok, ',')) row.push_back(std::stod(celltok));
    REQUIRE(row.size() >= 10);
    tip = Vec3(row[7], row[8], row[9]);
  }
  close_episode();
  CHECK(episodes == cell.n_trials);
  CHECK(successes == cell.n_success);
}

TEST_CASE("export_results: shape and byte stability") {
  EvalReport empty;
  export_results(empty, "results_empty.csv", "results_empty.json");
  CHECK(slurp("results_empty.csv") ==
        "method,sigma_mm,noiseless,n_trials,n_success,success_rate,"
        "ci_low,ci_high,mean_steps_success\n");

  EvalReport report;
  for (const char* method : {"scan", "drl", "hybrid"}) {
    for (double sigma : {30.0, 50.0, 70.0}) {
      EvalCell cell;
      cell.method = method;
      cell.sigma_mm = sigma;
      cell.n_trials = 100;
      cell.n_success = 90;
      cell.success_rate = 0.9;
      cell.ci = wilson_interval(90, 100);
      cell.mean_steps_success = 97.25;
      report.cells.push_back(cell);
    }
  }
  export_results(report, "results_a.csv", "results_a.json");
  export_results(report, "results_b.csv", "results_b.json");
  CHECK(slurp("results_a.csv") == slurp("results_b.csv"));
  CHECK(slurp("results_a.json") == slurp("results_b.json"));

  // 3 methods x 3 sigmas + header
  std::istringstream csv(slurp("results_a.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 10);
  CHECK(slurp("results_a.json").find("\"hybrid\"") != std::string::npos);
}

TEST_CASE("calibrate command: synthetic recovery and report files") {
  CalibrateOptions opts;
  opts.synthetic = true;
  opts.noiseless = true;
  opts.report_path = "calibrate_report.txt";
  opts.pairs_path = "calibrate_pairs.csv";
  const FitReport exact = calibrate_cmd(opts);
  CHECK(exact.params.l_mm == doctest::Approx(26.50).epsilon(1e-6));
  CHECK(exact.params.c1_cps == doctest::Approx(173.78).epsilon(1e-6));
  CHECK(exact.params.c2_cps == doctest::Approx(0.29).epsilon(1e-4));

  const std::string report = slurp("calibrate_report.txt");
  CHECK(report.find("r_squared") != std::string::npos);
  const std::string pairs = slurp("calibrate_pairs.csv");
  CHECK(pairs.find("cps_observed,cps_predicted") != std::string::npos);

  // default noise level keeps the fit quality high
  CalibrateOptions noisy;
  noisy.synthetic = true;
  noisy.seed = 7;
  noisy.report_path = "";
  noisy.pairs_path = "";
  const FitReport fit = calibrate_cmd(noisy);
  CHECK(fit.r_squared >= 0.95);

  CalibrateOptions missing;
  missing.synthetic = false;
  missing.input_path = "no_such_file.txt";
  CHECK_THROWS_AS(calibrate_cmd(missing), ConfigError);
}

TEST_CASE("ablation plumbing runs tiny matched budgets") {
  EnvConfig env_cfg;
  env_cfg.sigma_mm = 20.0;
  ScanConfig scan_cfg;
  TrainConfig tc;
  tc.n_envs = 2;
  tc.rollout_steps = 16;
  tc.total_env_steps = 64;
  tc.minibatch_size = 32;
  tc.epochs = 1;
  const AblationResult result = run_ablation(
      {RewardVariant::kDistance, RewardVariant::kComposite}, {1, 2}, tc,
      env_cfg, scan_cfg, "ablation_test_out");
  CHECK(result.runs.size() == 4);
  for (const auto& run : result.runs) {
    CHECK_FALSE(run.curve.empty());
  }
  CHECK(slurp("ablation_test_out/ablation_distance_seed1.csv").size() > 0);
  CHECK(slurp("ablation_test_out/ablation_composite_seed2.csv").size() > 0);

  CHECK_THROWS_AS(run_ablation({RewardVariant::kComposite}, {}, tc, env_cfg,
                               scan_cfg, "ablation_test_out"),
                  std::invalid_argument);
}
