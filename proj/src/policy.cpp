#include "radseek/policy.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

namespace radseek {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr std::uint32_t kCheckpointMagic = 0x52534b43;  // "RSKC"
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

PolicyNet::PolicyNet(int obs_dim, int act_dim, int hidden1, int hidden2,
                     double action_cap)
    : obs_dim_(obs_dim), act_dim_(act_dim), h1_(hidden1), h2_(hidden2),
      cap_(action_cap) {
  if (obs_dim < 1 || act_dim < 1 || hidden1 < 1 || hidden2 < 1) {
    throw std::invalid_argument("policy net: dimensions must be positive");
  }
  const int count = h1_ * obs_dim_ + h1_ + h2_ * h1_ + h2_ + act_dim_ * h2_ +
                    act_dim_ + h2_ + 1 + act_dim_;
  flat_ = VectorXd::Zero(count);
}

PolicyNet::Views PolicyNet::views() {
  double* p = flat_.data();
  Eigen::Map<MatrixXd> w1(p, h1_, obs_dim_);
  p += h1_ * obs_dim_;
  Eigen::Map<VectorXd> b1(p, h1_);
  p += h1_;
  Eigen::Map<MatrixXd> w2(p, h2_, h1_);
  p += h2_ * h1_;
  Eigen::Map<VectorXd> b2(p, h2_);
  p += h2_;
  Eigen::Map<MatrixXd> wm(p, act_dim_, h2_);
  p += act_dim_ * h2_;
  Eigen::Map<VectorXd> bm(p, act_dim_);
  p += act_dim_;
  Eigen::Map<VectorXd> wv(p, h2_);
  p += h2_;
  double* bv = p;
  p += 1;
  Eigen::Map<VectorXd> ls(p, act_dim_);
  return Views{w1, w2, wm, b1, b2, bm, wv, ls, bv};
}

PolicyNet::ConstViews PolicyNet::views() const {
  const double* p = flat_.data();
  Eigen::Map<const MatrixXd> w1(p, h1_, obs_dim_);
  p += h1_ * obs_dim_;
  Eigen::Map<const VectorXd> b1(p, h1_);
  p += h1_;
  Eigen::Map<const MatrixXd> w2(p, h2_, h1_);
  p += h2_ * h1_;
  Eigen::Map<const VectorXd> b2(p, h2_);
  p += h2_;
  Eigen::Map<const MatrixXd> wm(p, act_dim_, h2_);
  p += act_dim_ * h2_;
  Eigen::Map<const VectorXd> bm(p, act_dim_);
  p += act_dim_;
  Eigen::Map<const VectorXd> wv(p, h2_);
  p += h2_;
  const double* bv = p;
  p += 1;
  Eigen::Map<const VectorXd> ls(p, act_dim_);
  return ConstViews{w1, w2, wm, b1, b2, bm, wv, ls, bv};
}

void PolicyNet::init_weights(Rng& rng) {
  auto v = views();
  auto fill = [&](Eigen::Map<MatrixXd>& m, double scale) {
    const double s = scale / std::sqrt(static_cast<double>(m.cols()));
    for (int j = 0; j < m.cols(); ++j) {
      for (int i = 0; i < m.rows(); ++i) {
        m(i, j) = rng.uniform(-s, s);
      }
    }
  };
  fill(v.w1, 1.0);
  fill(v.w2, 1.0);
  fill(v.wm, 0.01);  // near-zero initial policy head
  v.b1.setZero();
  v.b2.setZero();
  v.bm.setZero();
  const double sv = 1.0 / std::sqrt(static_cast<double>(h2_));
  for (int i = 0; i < h2_; ++i) v.wv[i] = rng.uniform(-sv, sv);
  *v.bv = 0.0;
  v.log_std.setConstant(-0.5);
}

void PolicyNet::set_params(const VectorXd& p) {
  if (p.size() != flat_.size()) {
    throw std::invalid_argument("policy net: parameter size mismatch");
  }
  flat_ = p;
}

VectorXd PolicyNet::log_std() const { return views().log_std; }

void PolicyNet::clamp_log_std(double lo, double hi) {
  auto v = views();
  for (int i = 0; i < act_dim_; ++i) {
    v.log_std[i] = std::clamp(v.log_std[i], lo, hi);
  }
}

PolicyNet::Forward PolicyNet::forward(const MatrixXd& obs) const {
  if (obs.cols() != obs_dim_) {
    throw std::invalid_argument("policy net: observation width mismatch");
  }
  const auto v = views();
  Forward f;
  f.h1 = ((obs * v.w1.transpose()).rowwise() + v.b1.transpose())
             .array()
             .tanh()
             .matrix();
  f.h2 = ((f.h1 * v.w2.transpose()).rowwise() + v.b2.transpose())
             .array()
             .tanh()
             .matrix();
  f.mean_raw = (f.h2 * v.wm.transpose()).rowwise() + v.bm.transpose();
  f.value = f.h2 * v.wv;
  f.value.array() += *v.bv;
  return f;
}

void RunningNorm::reset(int dim) {
  mean_ = VectorXd::Zero(dim);
  var_ = VectorXd::Ones(dim);
  count_ = 0.0;
}

void RunningNorm::update(const MatrixXd& batch) {
  const double n = static_cast<double>(batch.rows());
  if (n < 1.0) return;
  const VectorXd bmean = batch.colwise().mean();
  VectorXd bvar = VectorXd::Zero(batch.cols());
  for (int i = 0; i < batch.rows(); ++i) {
    const VectorXd d = batch.row(i).transpose() - bmean;
    bvar += d.cwiseProduct(d);
  }
  bvar /= n;
  if (count_ == 0.0) {
    mean_ = bmean;
    var_ = bvar;
    count_ = n;
    return;
  }
  const double tot = count_ + n;
  const VectorXd delta = bmean - mean_;
  const VectorXd m_a = var_ * count_;
  const VectorXd m_b = bvar * n;
  var_ = (m_a + m_b +
          delta.cwiseProduct(delta) * (count_ * n / tot)) /
         tot;
  mean_ += delta * (n / tot);
  count_ = tot;
}

VectorXd RunningNorm::normalize_row(const VectorXd& x) const {
  if (count_ == 0.0) return x;
  VectorXd z = (x - mean_).cwiseQuotient(
      (var_.array() + 1e-8).sqrt().matrix());
  return z.cwiseMax(-10.0).cwiseMin(10.0);
}

MatrixXd RunningNorm::normalize(const MatrixXd& batch) const {
  MatrixXd out(batch.rows(), batch.cols());
  for (int i = 0; i < batch.rows(); ++i) {
    out.row(i) = normalize_row(batch.row(i).transpose()).transpose();
  }
  return out;
}

void RunningNorm::set(const VectorXd& mean, const VectorXd& var,
                      double count) {
  mean_ = mean;
  var_ = var;
  count_ = count;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig out;
  out.learning_rate = cfg.get_double("train.learning_rate", out.learning_rate);
  out.clip_eps = cfg.get_double("train.clip_eps", out.clip_eps);
  out.discount = cfg.get_double("train.discount", out.discount);
  out.gae_lambda = cfg.get_double("train.gae_lambda", out.gae_lambda);
  out.epochs = static_cast<int>(cfg.get_int("train.epochs", out.epochs));
  out.minibatch_size =
      static_cast<int>(cfg.get_int("train.minibatch_size", out.minibatch_size));
  out.entropy_coef = cfg.get_double("train.entropy_coef", out.entropy_coef);
  out.vf_coef = cfg.get_double("train.vf_coef", out.vf_coef);
  out.max_grad_norm = cfg.get_double("train.max_grad_norm", out.max_grad_norm);
  out.kl_threshold = cfg.get_double("train.kl_threshold", out.kl_threshold);
  out.reward_scale = cfg.get_double("train.reward_scale", out.reward_scale);
  out.total_env_steps = cfg.get_int("train.total_env_steps",
                                    out.total_env_steps);
  out.n_envs = static_cast<int>(cfg.get_int("train.n_envs", out.n_envs));
  out.rollout_steps =
      static_cast<int>(cfg.get_int("train.rollout_steps", out.rollout_steps));
  out.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 1));
  out.n_threads =
      static_cast<int>(cfg.get_int("train.n_threads", out.n_threads));
  out.phase1_init = cfg.get_bool("train.phase1_init", out.phase1_init);
  out.validate();
  return out;
}

void TrainConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) {
    throw std::invalid_argument("train: clip_eps must be in (0, 1)");
  }
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw std::invalid_argument("train: discount must be in (0, 1]");
  }
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("train: gae_lambda must be in [0, 1]");
  }
  if (learning_rate <= 0.0 || epochs < 1 || minibatch_size < 1 ||
      n_envs < 1 || rollout_steps < 1 || total_env_steps < 1) {
    throw std::invalid_argument("train: invalid size/rate setting");
  }
}

void compute_gae(const RolloutBuffer& buffer, double discount,
                 double gae_lambda, VectorXd& advantages, VectorXd& returns) {
  const int T = buffer.T;
  const int N = buffer.N;
  advantages = VectorXd::Zero(buffer.rows());
  returns = VectorXd::Zero(buffer.rows());
  VectorXd gae = VectorXd::Zero(N);
  for (int t = T - 1; t >= 0; --t) {
    for (int i = 0; i < N; ++i) {
      const int idx = buffer.index(t, i);
      const double not_done = 1.0 - buffer.done[idx];
      const double next_v =
          t == T - 1 ? buffer.next_value[i] : buffer.value[buffer.index(t + 1, i)];
      const double delta = buffer.reward[idx] +
                           discount * next_v * not_done - buffer.value[idx];
      gae[i] = delta + discount * gae_lambda * not_done * gae[i];
      advantages[idx] = gae[i];
      returns[idx] = gae[i] + buffer.value[idx];
    }
  }
}

double ppo_loss_and_grad(const PolicyNet& net, const MatrixXd& obs,
                         const MatrixXd& actions, const VectorXd& logp_old,
                         const VectorXd& advantages, const VectorXd& returns,
                         const TrainConfig& cfg, VectorXd* grad,
                         TrainStats* stats) {
  const int B = static_cast<int>(obs.rows());
  const int A = net.act_dim();
  const auto v = net.views();
  const PolicyNet::Forward f = net.forward(obs);

  const Eigen::ArrayXd sigma = v.log_std.array().exp();
  const Eigen::ArrayXXd z =
      (actions - f.mean_raw).array().rowwise() / sigma.transpose();

  VectorXd logp(B);
  const double const_term =
      -0.5 * A * kLog2Pi - v.log_std.sum();
  for (int i = 0; i < B; ++i) {
    logp[i] = -0.5 * z.row(i).square().sum() + const_term;
  }

  const Eigen::ArrayXd logratio = (logp - logp_old).array();
  const Eigen::ArrayXd ratio = logratio.exp();
  const Eigen::ArrayXd adv = advantages.array();

  const Eigen::ArrayXd surr1 = ratio * adv;
  const Eigen::ArrayXd clipped =
      ratio.max(1.0 - cfg.clip_eps).min(1.0 + cfg.clip_eps);
  const Eigen::ArrayXd surr2 = clipped * adv;
  const double pg_loss = -surr1.min(surr2).mean();

  const Eigen::ArrayXd vdiff = f.value.array() - returns.array();
  const double v_loss = 0.5 * vdiff.square().mean();

  const double entropy = v.log_std.sum() + 0.5 * A * (kLog2Pi + 1.0);
  const double loss =
      pg_loss + cfg.vf_coef * v_loss - cfg.entropy_coef * entropy;

  if (stats != nullptr) {
    stats->policy_loss = pg_loss;
    stats->value_loss = v_loss;
    stats->entropy = entropy;
    stats->kl = ((ratio - 1.0) - logratio).mean();
  }
  if (grad == nullptr) return loss;

  // d loss / d logp_i: the clipped branch has zero derivative
  Eigen::ArrayXd g_logp(B);
  for (int i = 0; i < B; ++i) {
    const bool unclipped = surr1[i] <= surr2[i];
    g_logp[i] = unclipped ? -adv[i] * ratio[i] / B : 0.0;
  }

  // heads
  MatrixXd g_mean(B, A);  // d loss / d mean_raw
  Eigen::ArrayXd g_ls = Eigen::ArrayXd::Zero(A);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < A; ++j) {
      g_mean(i, j) = g_logp[i] * z(i, j) / sigma[j];
      g_ls[j] += g_logp[i] * (z(i, j) * z(i, j) - 1.0);
    }
  }
  g_ls += -cfg.entropy_coef;  // entropy bonus acts on log_std only

  VectorXd g_value =
      (cfg.vf_coef / B) * vdiff.matrix();

  // backprop through the trunk
  PolicyNet scratch(net.obs_dim(), net.act_dim(), net.hidden1(),
                    net.hidden2(), net.action_cap());
  auto gv = scratch.views();
  gv.wm = g_mean.transpose() * f.h2;
  gv.bm = g_mean.colwise().sum().transpose();
  gv.wv = f.h2.transpose() * g_value;
  *gv.bv = g_value.sum();
  gv.log_std = g_ls.matrix();

  MatrixXd g_h2 = g_mean * v.wm;  // B x h2
  g_h2.noalias() += g_value * v.wv.transpose();
  MatrixXd g_h2p =
      g_h2.array() * (1.0 - f.h2.array().square());
  gv.w2 = g_h2p.transpose() * f.h1;
  gv.b2 = g_h2p.colwise().sum().transpose();

  MatrixXd g_h1 = g_h2p * v.w2;
  MatrixXd g_h1p =
      g_h1.array() * (1.0 - f.h1.array().square());
  gv.w1 = g_h1p.transpose() * obs;
  gv.b1 = g_h1p.colwise().sum().transpose();

  *grad = scratch.params();
  return loss;
}

AdamOptimizer::AdamOptimizer(int dim, double lr, double beta1, double beta2,
                             double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(VectorXd::Zero(dim)), v_(VectorXd::Zero(dim)) {}

void AdamOptimizer::step(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / bc1) /
                    ((v_.array() / bc2).sqrt() + eps_);
}

VecEnv::VecEnv(const EnvConfig& env_cfg, const ScanConfig& scan_cfg,
               int n_envs, std::uint64_t base_seed, bool phase1_init,
               int n_threads)
    : scan_cfg_(scan_cfg), base_seed_(base_seed), phase1_init_(phase1_init),
      n_threads_(n_threads) {
  EnvConfig cfg = env_cfg;
  cfg.record_trace = false;  // rollouts never keep traces
  envs_.reserve(static_cast<std::size_t>(n_envs));
  for (int i = 0; i < n_envs; ++i) envs_.emplace_back(cfg);
  episode_counter_.assign(static_cast<std::size_t>(n_envs), 0);
  episode_reward_.assign(static_cast<std::size_t>(n_envs), 0.0);
}

void VecEnv::reset_env(int i) {
  auto& env = envs_[static_cast<std::size_t>(i)];
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t env_seed = derive_seed(base_seed_, i);
    env.reset(derive_seed(env_seed, episode_counter_[i]));
    episode_counter_[i] += 1;
    episode_reward_[i] = 0.0;
    if (phase1_init_ && !env.done()) {
      initialize_phase2(env, scan_cfg_);
    }
    if (!env.done()) return;
    // episode finished during initialization (success or horizon)
    outcomes_.push_back(
        {env.succeeded(), env.state().step, episode_reward_[i]});
    episodes_finished_ += 1;
    if (outcomes_.size() > 512) outcomes_.pop_front();
  }
  throw std::runtime_error("vec env: could not initialize a live episode");
}

void VecEnv::reset_all() {
  for (int i = 0; i < n_envs(); ++i) reset_env(i);
}

std::vector<StepResult> VecEnv::step(const std::vector<Vec6>& actions) {
  std::vector<StepResult> results = batch_step(envs_, actions, n_threads_);
  for (int i = 0; i < n_envs(); ++i) {
    if (!results[i].ok()) {
      throw std::runtime_error("vec env: env " + std::to_string(i) +
                               " failed: " + results[i].error);
    }
    episode_reward_[i] += results[i].reward.total;
    if (results[i].done) {
      outcomes_.push_back({results[i].success,
                           envs_[static_cast<std::size_t>(i)].state().step,
                           episode_reward_[i]});
      episodes_finished_ += 1;
      if (outcomes_.size() > 512) outcomes_.pop_front();
      reset_env(i);
    }
  }
  return results;
}

MatrixXd VecEnv::observations() const {
  const auto first = observation_vector(envs_[0].state(), envs_[0].config());
  MatrixXd out(n_envs(), static_cast<int>(first.size()));
  for (int i = 0; i < n_envs(); ++i) {
    const auto obs =
        observation_vector(envs_[static_cast<std::size_t>(i)].state(),
                           envs_[static_cast<std::size_t>(i)].config());
    for (std::size_t j = 0; j < obs.size(); ++j) {
      out(i, static_cast<int>(j)) = obs[j];
    }
  }
  return out;
}

double VecEnv::rolling_success(std::size_t window) const {
  if (outcomes_.empty()) return 0.0;
  const std::size_t n = std::min(window, outcomes_.size());
  double acc = 0.0;
  for (std::size_t i = outcomes_.size() - n; i < outcomes_.size(); ++i) {
    acc += outcomes_[i].success ? 1.0 : 0.0;
  }
  return acc / static_cast<double>(n);
}

double VecEnv::rolling_episode_len(std::size_t window) const {
  if (outcomes_.empty()) return 0.0;
  const std::size_t n = std::min(window, outcomes_.size());
  double acc = 0.0;
  for (std::size_t i = outcomes_.size() - n; i < outcomes_.size(); ++i) {
    acc += outcomes_[i].steps;
  }
  return acc / static_cast<double>(n);
}

Phase1Result initialize_phase2(Env& env, const ScanConfig& scan_cfg) {
  Phase1Result phase1 = run_phase1(env, scan_cfg);
  env.mark_phase_boundary();
  if (env.done()) return phase1;

  const Vec3 guess = env.state().probe.tip +
                     env.config().guess_ahead_mm * env.state().probe.axis;
  EstimatorOptions opts = env.estimator_options();
  opts.fit_activity = true;
  opts.activity_scale = env.config().activity_scale;
  TargetEstimate est;
  bool ok = false;
  try {
    est = estimate_target(env.history(), env.config().response, guess, opts);
    ok = est.converged;
  } catch (const UnobservableError&) {
    ok = false;
  }
  if (!ok) {
    // degraded handoff: keep the forward guess with zero confidence
    est = TargetEstimate{};
    est.position_mm = guess;
    est.relative_angle_rad = 0.0;
    est.confidence = 0.0;
    est.activity_scale = env.config().activity_scale;
  }
  env.set_estimate(est);
  return phase1;
}

RolloutBuffer collect_rollouts(const PolicyNet& net, RunningNorm& norm,
                               VecEnv& envs, int T, Rng& rng,
                               double reward_scale) {
  const int N = envs.n_envs();
  const int D = net.obs_dim();
  const int A = net.act_dim();

  RolloutBuffer buf;
  buf.T = T;
  buf.N = N;
  buf.obs_dim = D;
  buf.act_dim = A;
  buf.obs.resize(T * N, D);
  buf.actions.resize(T * N, A);
  buf.logp.resize(T * N);
  buf.value.resize(T * N);
  buf.reward.resize(T * N);
  buf.done.resize(T * N);
  buf.next_value.resize(N);

  std::vector<Vec6> actions(static_cast<std::size_t>(N), Vec6::Zero());
  const VectorXd log_std = net.log_std();
  const VectorXd sigma = log_std.array().exp().matrix();
  const double logp_const = -0.5 * A * kLog2Pi - log_std.sum();
  for (int t = 0; t < T; ++t) {
    const MatrixXd raw = envs.observations();
    norm.update(raw);
    const MatrixXd obs = norm.normalize(raw);
    const PolicyNet::Forward f = net.forward(obs);

    for (int i = 0; i < N; ++i) {
      const int idx = buf.index(t, i);
      buf.obs.row(idx) = obs.row(i);
      double logp = logp_const;
      for (int j = 0; j < A; ++j) {
        const double u = f.mean_raw(i, j) + sigma[j] * rng.normal();
        const double zz = (u - f.mean_raw(i, j)) / sigma[j];
        logp -= 0.5 * zz * zz;
        buf.actions(idx, j) = u;
        actions[static_cast<std::size_t>(i)][j] = net.squash(u);
      }
      buf.logp[idx] = logp;
      buf.value[idx] = f.value[i];
    }

    const auto results = envs.step(actions);
    for (int i = 0; i < N; ++i) {
      const int idx = buf.index(t, i);
      buf.reward[idx] = results[static_cast<std::size_t>(i)].reward.total *
                        reward_scale;
      buf.done[idx] = results[static_cast<std::size_t>(i)].done ? 1.0 : 0.0;
    }
  }

  const MatrixXd raw = envs.observations();
  const MatrixXd obs = norm.normalize(raw);
  buf.next_value = net.forward(obs).value;
  return buf;
}

TrainStats update(PolicyNet& net, AdamOptimizer& adam,
                  const RolloutBuffer& buffer, const TrainConfig& cfg,
                  Rng& rng) {
  if (buffer.rows() == 0) {
    throw std::invalid_argument("update: empty rollout buffer");
  }
  VectorXd advantages, returns;
  compute_gae(buffer, cfg.discount, cfg.gae_lambda, advantages, returns);

  std::vector<int> order(static_cast<std::size_t>(buffer.rows()));
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.minibatch_size, buffer.rows());

  TrainStats stats;
  int updates = 0;
  double kl_sum = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the training stream
    for (int i = buffer.rows() - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(j)]);
    }
    double epoch_kl = 0.0;
    int epoch_batches = 0;
    for (int start = 0; start + mb <= buffer.rows(); start += mb) {
      MatrixXd obs(mb, buffer.obs_dim);
      MatrixXd act(mb, buffer.act_dim);
      VectorXd logp_old(mb), adv(mb), ret(mb);
      for (int r = 0; r < mb; ++r) {
        const int src = order[static_cast<std::size_t>(start + r)];
        obs.row(r) = buffer.obs.row(src);
        act.row(r) = buffer.actions.row(src);
        logp_old[r] = buffer.logp[src];
        adv[r] = advantages[src];
        ret[r] = returns[src];
      }
      const double mean = adv.mean();
      const double sd =
          std::sqrt((adv.array() - mean).square().sum() /
                    std::max(1, mb - 1));
      // a numerically flat advantage batch must not be amplified into a
      // spurious gradient by the normalization
      if (sd > 1e-8) {
        adv = ((adv.array() - mean) / (sd + 1e-8)).matrix();
      } else {
        adv = (adv.array() - mean).matrix();
      }

      VectorXd grad;
      TrainStats batch_stats;
      const double loss = ppo_loss_and_grad(net, obs, act, logp_old, adv, ret,
                                            cfg, &grad, &batch_stats);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        stats.epochs_run = epoch;
        return stats;  // abort with the stats gathered so far
      }
      const double gnorm = grad.norm();
      if (cfg.max_grad_norm > 0.0 && gnorm > cfg.max_grad_norm) {
        grad *= cfg.max_grad_norm / gnorm;
      }
      VectorXd params = net.params();
      adam.step(params, grad);
      net.set_params(params);
      net.clamp_log_std();

      stats.policy_loss = batch_stats.policy_loss;
      stats.value_loss = batch_stats.value_loss;
      stats.entropy = batch_stats.entropy;
      epoch_kl += batch_stats.kl;
      ++epoch_batches;
      ++updates;
    }
    stats.epochs_run = epoch + 1;
    kl_sum = epoch_batches > 0 ? epoch_kl / epoch_batches : 0.0;
    stats.kl = kl_sum;
    if (kl_sum > cfg.kl_threshold) break;
  }
  (void)updates;
  return stats;
}

Vec6 act(const PolicyNet& net, const RunningNorm& norm,
         const std::vector<double>& obs, bool deterministic, Rng& rng) {
  if (static_cast<int>(obs.size()) != net.obs_dim()) {
    throw std::invalid_argument(
        "act: observation width " + std::to_string(obs.size()) +
        " does not match policy input " + std::to_string(net.obs_dim()));
  }
  VectorXd x(net.obs_dim());
  for (int i = 0; i < net.obs_dim(); ++i) x[i] = obs[static_cast<std::size_t>(i)];
  MatrixXd row = norm.normalize_row(x).transpose();
  const PolicyNet::Forward f = net.forward(row);
  Vec6 action = Vec6::Zero();
  const int A = std::min(net.act_dim(), 6);
  if (deterministic) {
    for (int j = 0; j < A; ++j) action[j] = net.squash(f.mean_raw(0, j));
    return action;
  }
  const VectorXd sigma = net.log_std().array().exp().matrix();
  for (int j = 0; j < A; ++j) {
    action[j] = net.squash(f.mean_raw(0, j) + sigma[j] * rng.normal());
  }
  return action;
}

TrainResult train(const TrainConfig& cfg, const EnvConfig& env_cfg,
                  const ScanConfig& scan_cfg,
                  const std::string& checkpoint_path,
                  const std::string& curve_path, bool verbose) {
  cfg.validate();
  VecEnv envs(env_cfg, scan_cfg, cfg.n_envs, derive_seed(cfg.seed, 0xe272ULL),
              cfg.phase1_init, cfg.n_threads);
  envs.reset_all();

  PolicyNet net(observation_width(env_cfg), 6, 128, 128,
                env_cfg.arm.step_cap_rad);
  Rng init_rng(derive_seed(cfg.seed, 0x1e17ULL));
  net.init_weights(init_rng);
  RunningNorm norm(net.obs_dim());
  AdamOptimizer adam(net.param_count(), cfg.learning_rate);
  Rng sample_rng(derive_seed(cfg.seed, 0x5a3fULL));
  Rng shuffle_rng(derive_seed(cfg.seed, 0x7b21ULL));

  const long steps_per_iter =
      static_cast<long>(cfg.n_envs) * cfg.rollout_steps;
  const long iters =
      std::max<long>(1, (cfg.total_env_steps + steps_per_iter - 1) /
                            steps_per_iter);

  TrainResult result;
  double best = -1.0;
  for (long it = 0; it < iters; ++it) {
    RolloutBuffer buf = collect_rollouts(net, norm, envs, cfg.rollout_steps,
                                         sample_rng, cfg.reward_scale);
    const TrainStats stats = update(net, adam, buf, cfg, shuffle_rng);

    LearningCurveRow row;
    row.env_steps = (it + 1) * steps_per_iter;
    row.success_rate = envs.rolling_success();
    row.mean_episode_len = envs.rolling_episode_len();
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.kl = stats.kl;
    row.entropy = stats.entropy;
    result.curve.push_back(row);
    result.total_steps = row.env_steps;

    if (row.success_rate > best || it == 0) {
      best = row.success_rate;
      if (!checkpoint_path.empty()) {
        save_checkpoint(net, norm, checkpoint_path);
      }
    }
    if (verbose) {
      std::printf("iter %ld/%ld steps %ld success %.3f eplen %.1f "
                  "pl %.4f vl %.4f kl %.4f\n",
                  it + 1, iters, row.env_steps, row.success_rate,
                  row.mean_episode_len, row.policy_loss, row.value_loss,
                  row.kl);
      std::fflush(stdout);
    }
  }
  result.best_success = best;
  if (!curve_path.empty()) write_learning_curve(result.curve, curve_path);
  return result;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const PolicyNet& net, const RunningNorm& norm,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_pod(out, kCheckpointMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(net.obs_dim()));
  write_pod(out, static_cast<std::uint32_t>(net.act_dim()));
  write_pod(out, static_cast<std::uint32_t>(net.hidden1()));
  write_pod(out, static_cast<std::uint32_t>(net.hidden2()));
  write_pod(out, net.action_cap());
  write_pod(out, static_cast<std::uint64_t>(net.param_count()));
  out.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(net.param_count() * sizeof(double)));
  write_pod(out, norm.count());
  out.write(reinterpret_cast<const char*>(norm.mean().data()),
            static_cast<std::streamsize>(net.obs_dim() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(norm.var().data()),
            static_cast<std::streamsize>(net.obs_dim() * sizeof(double)));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  const auto magic = read_pod<std::uint32_t>(in);
  const auto version = read_pod<std::uint32_t>(in);
  if (magic != kCheckpointMagic || version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint (" + path +
                             "): bad magic or unsupported version");
  }
  const int obs = static_cast<int>(read_pod<std::uint32_t>(in));
  const int act = static_cast<int>(read_pod<std::uint32_t>(in));
  const int h1 = static_cast<int>(read_pod<std::uint32_t>(in));
  const int h2 = static_cast<int>(read_pod<std::uint32_t>(in));
  const double cap = read_pod<double>(in);
  const auto count = read_pod<std::uint64_t>(in);

  Checkpoint ckpt{PolicyNet(obs, act, h1, h2, cap), RunningNorm(obs)};
  if (count != static_cast<std::uint64_t>(ckpt.net.param_count())) {
    throw std::runtime_error("checkpoint (" + path +
                             "): parameter count mismatch");
  }
  VectorXd params(static_cast<int>(count));
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  ckpt.net.set_params(params);
  const double n = read_pod<double>(in);
  VectorXd mean(obs), var(obs);
  in.read(reinterpret_cast<char*>(mean.data()),
          static_cast<std::streamsize>(obs * sizeof(double)));
  in.read(reinterpret_cast<char*>(var.data()),
          static_cast<std::streamsize>(obs * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint (" + path + "): truncated");
  ckpt.norm.set(mean, var, n);
  return ckpt;
}

void write_learning_curve(const std::vector<LearningCurveRow>& curve,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve file: " + path);
  out << "env_steps,success_rate,mean_episode_len,policy_loss,value_loss,"
         "kl,entropy\n";
  char buf[256];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.6f,%.9g,%.9g,%.9g,%.9g\n",
                  row.env_steps, row.success_rate, row.mean_episode_len,
                  row.policy_loss, row.value_loss, row.kl, row.entropy);
    out << buf;
  }
}

}  // namespace radseek
