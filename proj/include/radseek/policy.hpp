#pragma once

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radseek/env.hpp"
#include "radseek/rng.hpp"
#include "radseek/scanner.hpp"

namespace radseek {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Two-hidden-layer tanh trunk with a Gaussian action head (state-independent
// learned log-std) and a value head. The deterministic action is the raw
// mean squashed by cap * tanh(.); stochastic actions sample the Gaussian in
// raw space and squash the sample, so executed actions always respect the
// per-step increment cap.
class PolicyNet {
 public:
  PolicyNet(int obs_dim, int act_dim, int hidden1 = 128, int hidden2 = 128,
            double action_cap = 0.05);

  void init_weights(Rng& rng);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int hidden1() const { return h1_; }
  int hidden2() const { return h2_; }
  double action_cap() const { return cap_; }
  int param_count() const { return static_cast<int>(flat_.size()); }
  const VectorXd& params() const { return flat_; }
  void set_params(const VectorXd& p);

  struct Forward {
    MatrixXd h1, h2;    // post-activation
    MatrixXd mean_raw;  // B x A
    VectorXd value;     // B
  };
  Forward forward(const MatrixXd& obs) const;

  VectorXd log_std() const;
  void clamp_log_std(double lo = -5.0, double hi = 2.0);

  double squash(double raw) const { return cap_ * std::tanh(raw); }

  // flat parameter layout: W1, b1, W2, b2, Wm, bm, wv, bv, log_std
  struct Views;
  Views views();
  struct ConstViews;
  ConstViews views() const;

 private:
  int obs_dim_, act_dim_, h1_, h2_;
  double cap_;
  VectorXd flat_;
};

struct PolicyNet::Views {
  Eigen::Map<MatrixXd> w1, w2, wm;
  Eigen::Map<VectorXd> b1, b2, bm, wv, log_std;
  double* bv;
};
struct PolicyNet::ConstViews {
  Eigen::Map<const MatrixXd> w1, w2, wm;
  Eigen::Map<const VectorXd> b1, b2, bm, wv, log_std;
  const double* bv;
};

// Welford running mean/variance over observation dimensions; frozen copies
// ship with checkpoints so evaluation uses the training statistics.
class RunningNorm {
 public:
  explicit RunningNorm(int dim = 0) { reset(dim); }
  void reset(int dim);
  void update(const MatrixXd& batch);  // rows are samples
  VectorXd normalize_row(const VectorXd& x) const;
  MatrixXd normalize(const MatrixXd& batch) const;
  int dim() const { return static_cast<int>(mean_.size()); }
  const VectorXd& mean() const { return mean_; }
  const VectorXd& var() const { return var_; }
  double count() const { return count_; }
  void set(const VectorXd& mean, const VectorXd& var, double count);

 private:
  VectorXd mean_, var_;
  double count_ = 0.0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double clip_eps = 0.2;
  double discount = 0.99;     // gamma_d
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch_size = 4096;
  double entropy_coef = 0.005;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  double kl_threshold = 0.05;
  double reward_scale = 0.005;  // applied to rewards inside training only
  long total_env_steps = 2'000'000;
  int n_envs = 64;
  int rollout_steps = 256;
  std::uint64_t seed = 1;
  int n_threads = 1;
  bool phase1_init = false;  // run adaptive scanning at every episode start

  static TrainConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

struct RolloutBuffer {
  int T = 0, N = 0, obs_dim = 0, act_dim = 0;
  MatrixXd obs;      // (T*N) x obs_dim, normalized
  MatrixXd actions;  // (T*N) x act_dim, raw Gaussian samples
  VectorXd logp, value, reward, done;  // (T*N); done gates bootstrapping
  VectorXd next_value;                 // N, V of the post-rollout states

  int rows() const { return T * N; }
  int index(int t, int i) const { return t * N + i; }
};

// Advantages/returns are recomputed from the stored rewards and values on
// every call, never cached across update epochs.
void compute_gae(const RolloutBuffer& buffer, double discount,
                 double gae_lambda, VectorXd& advantages, VectorXd& returns);

struct TrainStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  int epochs_run = 0;
};

// Loss and flat-parameter gradient for one minibatch of the clipped
// surrogate objective (+ value MSE + entropy bonus). Exposed so the
// finite-difference oracle can check it directly.
double ppo_loss_and_grad(const PolicyNet& net, const MatrixXd& obs,
                         const MatrixXd& actions, const VectorXd& logp_old,
                         const VectorXd& advantages, const VectorXd& returns,
                         const TrainConfig& cfg, VectorXd* grad,
                         TrainStats* stats = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(int dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(VectorXd& params, const VectorXd& grad);
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  VectorXd m_, v_;
};

struct EpisodeOutcome {
  bool success = false;
  int steps = 0;
  double total_reward = 0.0;
};

// Batch of environments with automatic reseeded resets; optionally runs the
// adaptive-scanning initialization at every episode start so training
// matches hybrid deployment conditions.
class VecEnv {
 public:
  VecEnv(const EnvConfig& env_cfg, const ScanConfig& scan_cfg, int n_envs,
         std::uint64_t base_seed, bool phase1_init, int n_threads = 1);

  void reset_all();
  // steps all envs, auto-resets finished ones; returns per-env results of
  // the step taken (before any reset)
  std::vector<StepResult> step(const std::vector<Vec6>& actions);

  MatrixXd observations() const;  // N x obs_dim (raw)
  int n_envs() const { return static_cast<int>(envs_.size()); }
  Env& env(int i) { return envs_[static_cast<std::size_t>(i)]; }
  const std::deque<EpisodeOutcome>& recent_outcomes() const {
    return outcomes_;
  }
  double rolling_success(std::size_t window = 100) const;
  double rolling_episode_len(std::size_t window = 100) const;
  long episodes_finished() const { return episodes_finished_; }

 private:
  void reset_env(int i);

  std::vector<Env> envs_;
  ScanConfig scan_cfg_;
  std::uint64_t base_seed_;
  bool phase1_init_;
  int n_threads_;
  std::vector<long> episode_counter_;
  std::vector<double> episode_reward_;
  std::deque<EpisodeOutcome> outcomes_;
  long episodes_finished_ = 0;
};

// Runs phase-1 scanning on a freshly reset env, then seeds the estimator
// with a joint position+activity fit (falls back to a confidence-0 forward
// guess when the fit rejects). Shared by training init and hybrid runs.
Phase1Result initialize_phase2(Env& env, const ScanConfig& scan_cfg);

RolloutBuffer collect_rollouts(const PolicyNet& net, RunningNorm& norm,
                               VecEnv& envs, int T, Rng& rng,
                               double reward_scale);

TrainStats update(PolicyNet& net, AdamOptimizer& adam,
                  const RolloutBuffer& buffer, const TrainConfig& cfg,
                  Rng& rng);

struct LearningCurveRow {
  long env_steps = 0;
  double success_rate = 0.0;
  double mean_episode_len = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  std::vector<LearningCurveRow> curve;
  double best_success = 0.0;
  long total_steps = 0;
};

// Full training loop; saves the best-by-rolling-success checkpoint to
// checkpoint_path (and always the final parameters when none improved).
TrainResult train(const TrainConfig& cfg, const EnvConfig& env_cfg,
                  const ScanConfig& scan_cfg,
                  const std::string& checkpoint_path,
                  const std::string& curve_path = "", bool verbose = false);

Vec6 act(const PolicyNet& net, const RunningNorm& norm,
         const std::vector<double>& obs, bool deterministic, Rng& rng);

void save_checkpoint(const PolicyNet& net, const RunningNorm& norm,
                     const std::string& path);
struct Checkpoint {
  PolicyNet net;
  RunningNorm norm;
};
Checkpoint load_checkpoint(const std::string& path);

void write_learning_curve(const std::vector<LearningCurveRow>& curve,
                          const std::string& path);

}  // namespace radseek
