#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radseek/angle_estimator.hpp"
#include "radseek/config.hpp"
#include "radseek/kinematics.hpp"
#include "radseek/radiation.hpp"
#include "radseek/rng.hpp"

namespace radseek {

struct EnvConfig {
  ArmModel arm;
  Vec6 start_joints = (Vec6() << 0.0, -0.9, 1.8, 0.0, -0.9, 0.0).finished();
  ResponseParams response;
  double activity_scale = 25.0;
  double dwell_s = 1.0;
  bool noiseless = false;

  int horizon = 150;
  double success_radius_mm = 5.0;
  double lambda_dense = 1.0;  // reward-ablation knob; 1 reproduces R = -|P-T|
  double lambda_f = 0.1;
  double lambda_q = 0.01;
  double lambda_s = 10.0;
  int k_history = 5;

  Vec3 nominal_source_mm = Vec3(315.0, 0.0, 180.0);
  double sigma_mm = 30.0;
  Vec3 workspace_min_mm = Vec3(170.0, -150.0, 60.0);
  Vec3 workspace_max_mm = Vec3(405.0, 150.0, 300.0);
  double shell_min_mm = 60.0;   // reach shell radii about the shoulder
  double shell_max_mm = 420.0;

  double guess_ahead_mm = 40.0;  // estimator seed along the current heading
  std::size_t est_window = 50;
  int est_every = 1;
  std::size_t est_min_entries = 8;
  double est_flat_band_cps = 0.5;
  bool record_trace = true;

  static EnvConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

struct RewardBreakdown {
  double dense = 0.0;          // -distance (mm)
  double potential = 0.0;      // CPS(t) - CPS(t-1)
  double speed_penalty = 0.0;  // -|qdot|_1
  double terminal = 0.0;       // 1 on the successful final step
  double total = 0.0;
};

// Observable per-step state. Histories are chronological (oldest first)
// and zero-padded until k real entries exist.
struct EnvState {
  JointState robot;
  ProbePose probe;
  std::vector<double> cps_history;  // k+1 values
  std::vector<Vec3> pose_history;   // k+1 tip positions
  double est_angle_rad = 0.0;
  Vec3 est_direction = Vec3::Zero();  // unit vector toward the estimate
  double cps_running_max = 0.0;
  int step = 0;
  int valid_history = 0;  // real (non-padding) entries, <= k+1
};

struct TraceRow {
  int step = 0;
  Vec6 q = Vec6::Zero();
  Vec3 tip = Vec3::Zero();
  double cps = 0.0;
  double est_angle = 0.0;
  Vec6 action = Vec6::Zero();
  RewardBreakdown reward;
  bool done = false;
};

struct StepResult {
  RewardBreakdown reward;
  bool done = false;
  bool success = false;
  double distance_mm = 0.0;
  std::string error;  // set only by batch stepping on per-env failure

  bool ok() const { return error.empty(); }
};

int observation_width(const EnvConfig& cfg);
std::vector<double> observation_vector(const EnvState& state,
                                       const EnvConfig& cfg);

// Single episode simulator. Joint-increment actions go through step();
// the scanner uses the pointing/move entry points, which command the pose
// directly and also consume one environment step per CPS sample.
class Env {
 public:
  explicit Env(const EnvConfig& cfg);

  const EnvState& reset(std::uint64_t seed);

  StepResult step(const Vec6& action);

  // reorient onto a world axis and sample (one step)
  StepResult step_pointing(const Vec3& world_axis);
  // reorient onto a world axis, advance the tip along it, sample (one step)
  StepResult step_move(const Vec3& world_axis, double advance_mm);
  // restore a saved joint configuration (no sample, no step consumed)
  void restore_joints(const JointState& joints);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }
  bool succeeded() const { return success_; }
  int first_success_step() const { return first_success_step_; }
  double distance_to_source() const;
  const SourceTarget& source() const { return source_; }

  const HistoryBuffer& history() const { return history_; }
  void mark_phase_boundary();
  int phase_boundary_step() const { return phase_boundary_step_; }
  const TargetEstimate& last_estimate() const { return estimate_; }
  void set_estimate(const TargetEstimate& est);
  EstimatorOptions estimator_options() const;

  std::vector<double> observation() const {
    return observation_vector(state_, cfg_);
  }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  StepResult advance_to(const JointState& next, const Vec6& recorded_action,
                        bool scan_sample);
  void refresh_estimate();
  Vec3 sample_source_position(Rng& rng) const;
  bool placement_ok(const Vec3& p) const;
  double sample_probe_cps();

  EnvConfig cfg_;
  Vec3 shoulder_mm_ = Vec3::Zero();
  EnvState state_;
  SourceTarget source_;
  HistoryBuffer history_;
  TargetEstimate estimate_;
  bool has_estimate_ = false;
  Rng noise_rng_;
  bool done_ = false;
  bool success_ = false;
  int first_success_step_ = -1;
  int phase_boundary_step_ = -1;
  double prev_cps_ = 0.0;
  std::vector<TraceRow> trace_;
};

// Independent stepping over a batch; per-env failures are isolated into the
// corresponding result slot and do not disturb the other environments.
std::vector<StepResult> batch_step(std::vector<Env>& envs,
                                   const std::vector<Vec6>& actions,
                                   int n_threads = 1);

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path);
void append_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace,
                      const std::string& episode_header, bool write_header);
std::string trace_csv_header();

}  // namespace radseek
