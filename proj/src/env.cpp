#include "radseek/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace radseek {

EnvConfig EnvConfig::from_config(const KeyValueConfig& cfg) {
  EnvConfig out;
  if (cfg.has("arm.file")) {
    out.arm = load_arm_file(cfg.get_string("arm.file"));
  } else {
    const auto links = cfg.get_doubles(
        "arm.link_mm", {out.arm.link_mm.begin(), out.arm.link_mm.end()}, 6);
    const auto qmin = cfg.get_doubles(
        "arm.q_min_rad", {out.arm.q_min.begin(), out.arm.q_min.end()}, 6);
    const auto qmax = cfg.get_doubles(
        "arm.q_max_rad", {out.arm.q_max.begin(), out.arm.q_max.end()}, 6);
    for (int i = 0; i < 6; ++i) {
      out.arm.link_mm[i] = links[i];
      out.arm.q_min[i] = qmin[i];
      out.arm.q_max[i] = qmax[i];
    }
    out.arm.step_cap_rad =
        cfg.get_double("arm.step_cap_rad", out.arm.step_cap_rad);
  }
  const auto sj = cfg.get_doubles(
      "env.start_joints",
      {out.start_joints.data(), out.start_joints.data() + 6}, 6);
  for (int i = 0; i < 6; ++i) out.start_joints[i] = sj[i];

  out.response.r_mm = cfg.get_double("response.r_mm", out.response.r_mm);
  out.response.l_mm = cfg.get_double("response.l_mm", out.response.l_mm);
  out.response.c1_cps = cfg.get_double("response.c1_cps", out.response.c1_cps);
  out.response.c2_cps = cfg.get_double("response.c2_cps", out.response.c2_cps);
  out.activity_scale =
      cfg.get_double("env.activity_scale", out.activity_scale);
  out.dwell_s = cfg.get_double("env.dwell_s", out.dwell_s);
  out.noiseless = cfg.get_bool("env.noiseless", out.noiseless);

  out.horizon = static_cast<int>(cfg.get_int("env.horizon", out.horizon));
  out.success_radius_mm =
      cfg.get_double("env.success_radius_mm", out.success_radius_mm);
  out.lambda_dense = cfg.get_double("reward.lambda_dense", out.lambda_dense);
  out.lambda_f = cfg.get_double("reward.lambda_f", out.lambda_f);
  out.lambda_q = cfg.get_double("reward.lambda_q", out.lambda_q);
  out.lambda_s = cfg.get_double("reward.lambda_s", out.lambda_s);
  out.k_history = static_cast<int>(cfg.get_int("env.k_history", out.k_history));

  auto vec3 = [&](const char* key, const Vec3& fb) {
    const auto v = cfg.get_doubles(key, {fb[0], fb[1], fb[2]}, 3);
    return Vec3(v[0], v[1], v[2]);
  };
  out.nominal_source_mm = vec3("env.nominal_source_mm", out.nominal_source_mm);
  out.sigma_mm = cfg.get_double("env.sigma_mm", out.sigma_mm);
  out.workspace_min_mm = vec3("env.workspace_min_mm", out.workspace_min_mm);
  out.workspace_max_mm = vec3("env.workspace_max_mm", out.workspace_max_mm);
  out.shell_min_mm = cfg.get_double("env.shell_min_mm", out.shell_min_mm);
  out.shell_max_mm = cfg.get_double("env.shell_max_mm", out.shell_max_mm);

  out.guess_ahead_mm = cfg.get_double("est.guess_ahead_mm", out.guess_ahead_mm);
  out.est_window = static_cast<std::size_t>(
      cfg.get_int("est.window", static_cast<long>(out.est_window)));
  out.est_every = static_cast<int>(cfg.get_int("est.every", out.est_every));
  out.est_min_entries = static_cast<std::size_t>(
      cfg.get_int("est.min_entries", static_cast<long>(out.est_min_entries)));
  out.est_flat_band_cps =
      cfg.get_double("est.flat_band_cps", out.est_flat_band_cps);
  out.validate();
  return out;
}

void EnvConfig::validate() const {
  arm.validate();
  response.validate();
  if (horizon < 1) throw std::invalid_argument("env: horizon must be >= 1");
  if (!(success_radius_mm > 0.0)) {
    throw std::invalid_argument("env: success_radius_mm must be > 0");
  }
  if (lambda_dense < 0.0 || lambda_f < 0.0 || lambda_q < 0.0 ||
      lambda_s < 0.0) {
    throw std::invalid_argument("env: reward weights must be >= 0");
  }
  if (k_history < 1) throw std::invalid_argument("env: k_history must be >= 1");
  if (!(activity_scale > 0.0)) {
    throw std::invalid_argument("env: activity_scale must be > 0");
  }
  if (sigma_mm < 0.0) throw std::invalid_argument("env: sigma_mm must be >= 0");
  for (int i = 0; i < 3; ++i) {
    if (!(workspace_min_mm[i] < workspace_max_mm[i])) {
      throw std::invalid_argument("env: workspace box is empty");
    }
  }
}

int observation_width(const EnvConfig& cfg) {
  const int k1 = cfg.k_history + 1;
  return 6 + 6 + 3 + k1 + 3 * k1 + 4;
}

std::vector<double> observation_vector(const EnvState& state,
                                       const EnvConfig& cfg) {
  const int k1 = cfg.k_history + 1;
  std::vector<double> obs;
  obs.reserve(observation_width(cfg));
  const Vec3 center = 0.5 * (cfg.workspace_min_mm + cfg.workspace_max_mm);
  const Vec3 half = 0.5 * (cfg.workspace_max_mm - cfg.workspace_min_mm);
  auto norm_pos = [&](const Vec3& p, int axis) {
    return (p[axis] - center[axis]) / half[axis];
  };

  for (int i = 0; i < 6; ++i) obs.push_back(state.robot.q[i]);
  for (int i = 0; i < 6; ++i) obs.push_back(state.robot.qdot[i]);
  for (int i = 0; i < 3; ++i) obs.push_back(norm_pos(state.probe.tip, i));

  const double denom = std::max(state.cps_running_max, 1e-9);
  const int pad = k1 - state.valid_history;
  for (int i = 0; i < k1; ++i) {
    obs.push_back(i < pad ? 0.0 : state.cps_history[i] / denom);
  }
  for (int i = 0; i < k1; ++i) {
    for (int a = 0; a < 3; ++a) {
      obs.push_back(i < pad ? 0.0 : norm_pos(state.pose_history[i], a));
    }
  }
  obs.push_back(state.est_angle_rad);
  for (int a = 0; a < 3; ++a) obs.push_back(state.est_direction[a]);
  return obs;
}

Env::Env(const EnvConfig& cfg) : cfg_(cfg), history_(cfg.est_window) {
  cfg_.validate();
  shoulder_mm_ = cfg_.arm.base * Vec3(0.0, 0.0, cfg_.arm.link_mm[0]);
}

bool Env::placement_ok(const Vec3& p) const {
  for (int i = 0; i < 3; ++i) {
    if (p[i] < cfg_.workspace_min_mm[i] || p[i] > cfg_.workspace_max_mm[i]) {
      return false;
    }
  }
  const double rr = (p - shoulder_mm_).norm();
  return rr >= cfg_.shell_min_mm && rr <= cfg_.shell_max_mm;
}

Vec3 Env::sample_source_position(Rng& rng) const {
  if (cfg_.sigma_mm == 0.0) return cfg_.nominal_source_mm;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec3 p = cfg_.nominal_source_mm +
                   cfg_.sigma_mm * Vec3(rng.normal(), rng.normal(),
                                        rng.normal());
    if (placement_ok(p)) return p;
  }
  return cfg_.nominal_source_mm;  // unreachable for sane configs
}

double Env::sample_probe_cps() {
  if (cfg_.noiseless) {
    return expected_cps(cfg_.response, state_.probe, source_);
  }
  return sample_cps(cfg_.response, state_.probe, source_, noise_rng_,
                    cfg_.dwell_s);
}

const EnvState& Env::reset(std::uint64_t seed) {
  // separate placement and noise streams so that source placements stay
  // matched across methods whose CPS consumption differs
  Rng placement_rng(derive_seed(seed, 0x706c6163ULL));
  noise_rng_.reseed(derive_seed(seed, 0x6e6f6973ULL));

  source_.position_mm = sample_source_position(placement_rng);
  source_.activity_scale = cfg_.activity_scale;

  state_ = EnvState{};
  state_.robot.q = cfg_.start_joints;
  state_.robot.qdot.setZero();
  state_.probe = forward_kinematics(cfg_.arm, state_.robot);

  const int k1 = cfg_.k_history + 1;
  state_.cps_history.assign(k1, 0.0);
  state_.pose_history.assign(k1, Vec3::Zero());

  done_ = false;
  success_ = false;
  first_success_step_ = -1;
  phase_boundary_step_ = -1;
  history_.clear();
  estimate_ = TargetEstimate{};
  has_estimate_ = false;
  trace_.clear();

  const double cps0 = sample_probe_cps();
  prev_cps_ = cps0;
  state_.cps_history.back() = cps0;
  state_.pose_history.back() = state_.probe.tip;
  state_.valid_history = 1;
  state_.cps_running_max = cps0;
  state_.step = 0;
  history_.push({state_.probe, cps0, 0});

  if (distance_to_source() < cfg_.success_radius_mm) {
    // degenerate spawn inside the success radius
    done_ = true;
    success_ = true;
    first_success_step_ = 0;
  }

  if (cfg_.record_trace) {
    TraceRow row;
    row.step = 0;
    row.q = state_.robot.q;
    row.tip = state_.probe.tip;
    row.cps = cps0;
    row.est_angle = state_.est_angle_rad;
    row.done = done_;
    trace_.push_back(row);
  }
  return state_;
}

double Env::distance_to_source() const {
  return (state_.probe.tip - source_.position_mm).norm();
}

EstimatorOptions Env::estimator_options() const {
  EstimatorOptions opts;
  opts.fit_activity = false;
  opts.activity_scale =
      has_estimate_ ? estimate_.activity_scale : cfg_.activity_scale;
  opts.min_entries = cfg_.est_min_entries;
  opts.flat_band_cps = cfg_.est_flat_band_cps;
  opts.dwell_s = cfg_.dwell_s;
  return opts;
}

void Env::refresh_estimate() {
  if (cfg_.est_every <= 0 || state_.step % cfg_.est_every != 0) return;
  const Vec3 guess = has_estimate_ && estimate_.converged
                         ? estimate_.position_mm
                         : Vec3(state_.probe.tip +
                                cfg_.guess_ahead_mm * state_.probe.axis);
  try {
    estimate_ = estimate_target(history_, cfg_.response, guess,
                                estimator_options());
    has_estimate_ = true;
  } catch (const UnobservableError&) {
    state_.est_angle_rad = 0.0;
    state_.est_direction.setZero();
    return;
  }
  const Vec3 offset = estimate_.position_mm - state_.probe.tip;
  const double dist = offset.norm();
  state_.est_angle_rad = estimate_.relative_angle_rad;
  state_.est_direction = dist > 0.0 ? Vec3(offset / dist) : Vec3::Zero();
}

void Env::set_estimate(const TargetEstimate& est) {
  estimate_ = est;
  has_estimate_ = true;
  const Vec3 offset = est.position_mm - state_.probe.tip;
  const double dist = offset.norm();
  state_.est_angle_rad = est.relative_angle_rad;
  state_.est_direction = dist > 0.0 ? Vec3(offset / dist) : Vec3::Zero();
}

void Env::mark_phase_boundary() {
  history_.pin_prefix();
  phase_boundary_step_ = state_.step;
}

StepResult Env::advance_to(const JointState& next, const Vec6& recorded_action,
                           bool scan_sample) {
  if (done_) {
    throw std::logic_error("env: step() called on a finished episode");
  }
  state_.robot = next;
  state_.probe = forward_kinematics(cfg_.arm, state_.robot);
  state_.step += 1;

  const double cps = sample_probe_cps();
  const int k1 = cfg_.k_history + 1;
  state_.cps_history.erase(state_.cps_history.begin());
  state_.cps_history.push_back(cps);
  state_.pose_history.erase(state_.pose_history.begin());
  state_.pose_history.push_back(state_.probe.tip);
  state_.valid_history = std::min(state_.valid_history + 1, k1);
  state_.cps_running_max = std::max(state_.cps_running_max, cps);
  // scan-phase samples are pinned: the phase-II sliding window must never
  // evict them; the estimator is also only refreshed on policy steps
  if (scan_sample) {
    history_.push_pinned({state_.probe, cps, state_.step});
  } else {
    history_.push({state_.probe, cps, state_.step});
    refresh_estimate();
  }

  const double dist = distance_to_source();
  const bool success_now = dist < cfg_.success_radius_mm;
  if (success_now && first_success_step_ < 0) {
    first_success_step_ = state_.step;
  }
  done_ = success_now || state_.step >= cfg_.horizon;
  success_ = success_now;

  StepResult result;
  result.reward.dense = -dist;
  result.reward.potential = cps - prev_cps_;
  result.reward.speed_penalty = -state_.robot.qdot.lpNorm<1>();
  result.reward.terminal = (done_ && success_now) ? 1.0 : 0.0;
  result.reward.total = cfg_.lambda_dense * result.reward.dense +
                        cfg_.lambda_f * result.reward.potential +
                        cfg_.lambda_q * result.reward.speed_penalty +
                        cfg_.lambda_s * result.reward.terminal;
  result.done = done_;
  result.success = success_now;
  result.distance_mm = dist;
  prev_cps_ = cps;

  if (cfg_.record_trace) {
    TraceRow row;
    row.step = state_.step;
    row.q = state_.robot.q;
    row.tip = state_.probe.tip;
    row.cps = cps;
    row.est_angle = state_.est_angle_rad;
    row.action = recorded_action;
    row.reward = result.reward;
    row.done = done_;
    trace_.push_back(row);
  }
  return result;
}

StepResult Env::step(const Vec6& action) {
  const JointState next = apply_action(cfg_.arm, state_.robot, action);
  return advance_to(next, next.qdot, false);
}

StepResult Env::step_pointing(const Vec3& world_axis) {
  JointState next;
  try {
    next = solve_pointing(cfg_.arm, state_.robot, world_axis);
  } catch (const PointingError&) {
    // unreachable heading: hold the pose and let the caller flag the cell
    next = state_.robot;
    next.qdot.setZero();
    StepResult r = advance_to(next, next.qdot, true);
    r.error = "unreachable heading";
    return r;
  }
  return advance_to(next, next.qdot, true);
}

StepResult Env::step_move(const Vec3& world_axis, double advance_mm) {
  JointState next = state_.robot;
  bool pointed = true;
  try {
    next = solve_pointing(cfg_.arm, state_.robot, world_axis);
  } catch (const PointingError&) {
    pointed = false;  // keep the current heading but still advance
  }
  const Vec3 axis = forward_kinematics(cfg_.arm, next).axis;
  next = solve_translation(cfg_.arm, next, advance_mm * axis);
  if (pointed) {
    // the translation swings the forearm and drags the heading with it;
    // re-point the wrist so the commanded axis survives the move
    try {
      next = solve_pointing(cfg_.arm, next, world_axis);
    } catch (const PointingError&) {
    }
  }
  next.qdot = next.q - state_.robot.q;
  return advance_to(next, next.qdot, true);
}

void Env::restore_joints(const JointState& joints) {
  state_.robot.q = joints.q;
  state_.robot.qdot.setZero();
  state_.probe = forward_kinematics(cfg_.arm, state_.robot);
}

std::vector<StepResult> batch_step(std::vector<Env>& envs,
                                   const std::vector<Vec6>& actions,
                                   int n_threads) {
  if (envs.size() != actions.size()) {
    throw std::invalid_argument("batch_step: batch size mismatch");
  }
  std::vector<StepResult> results(envs.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        results[i] = envs[i].step(actions[i]);
      } catch (const std::exception& e) {
        results[i] = StepResult{};
        results[i].error = e.what();
      }
    }
  };
  if (n_threads <= 1 || envs.size() < 2) {
    work(0, envs.size());
    return results;
  }
  const std::size_t nt =
      std::min<std::size_t>(n_threads, envs.size());
  std::vector<std::thread> pool;
  const std::size_t chunk = (envs.size() + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(envs.size(), b + chunk);
    if (b >= e) break;
    pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return results;
}

std::string trace_csv_header() {
  return "step,q1,q2,q3,q4,q5,q6,tip_x,tip_y,tip_z,cps,est_angle,"
         "a1,a2,a3,a4,a5,a6,r_dense,r_potential,r_speed,r_terminal,r_total,"
         "done";
}

namespace {

void write_row(std::ostream& out, const TraceRow& row) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out << ',' << buf;
  };
  out << row.step;
  for (int i = 0; i < 6; ++i) num(row.q[i]);
  for (int i = 0; i < 3; ++i) num(row.tip[i]);
  num(row.cps);
  num(row.est_angle);
  for (int i = 0; i < 6; ++i) num(row.action[i]);
  num(row.reward.dense);
  num(row.reward.potential);
  num(row.reward.speed_penalty);
  num(row.reward.terminal);
  num(row.reward.total);
  out << ',' << (row.done ? 1 : 0) << "\n";
}

}  // namespace

void append_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace,
                      const std::string& episode_header, bool write_header) {
  if (write_header) out << trace_csv_header() << "\n";
  if (!episode_header.empty()) out << "# " << episode_header << "\n";
  for (const auto& row : trace) write_row(out, row);
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  append_trace_csv(out, trace, "", true);
}

}  // namespace radseek
