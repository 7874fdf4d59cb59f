#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <stdexcept>
#include <string>

namespace radseek {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Quat = Eigen::Quaterniond;

// Probe tip position (mm) and orientation. The probe forward direction is
// the local +x axis of the terminal frame.
struct ProbePose {
  Vec3 tip = Vec3::Zero();
  Vec3 axis = Vec3::UnitX();
  Quat orientation = Quat::Identity();
};

struct JointState {
  Vec6 q = Vec6::Zero();
  Vec6 qdot = Vec6::Zero();  // (q_t - q_{t-1}) per step
};

// Six-joint serial arm. The axis pattern is fixed by the reference design:
//   J1 yaw about z, J2/J3 pitch about y, then a spherical wrist
//   (J4 roll about x, J5 pitch about y, J6 yaw about z).
// Each joint rotation is followed by a fixed link translation: link 1 along
// local +z (the riser), links 2..6 along local +x. The default arm keeps
// links 4..6 at zero length so the probe tip coincides with the wrist
// centre and pointing changes do not translate the tip.
struct ArmModel {
  std::array<double, 6> link_mm = {150.0, 240.0, 200.0, 0.0, 0.0, 0.0};
  std::array<double, 6> q_min = {-2.97, -2.30, -0.50, -3.00, -2.60, -2.60};
  std::array<double, 6> q_max = {2.97, 1.20, 2.90, 3.00, 2.60, 2.60};
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  double step_cap_rad = 0.05;  // per-step joint increment cap

  void validate() const;
};

class JointLimitError : public std::runtime_error {
 public:
  JointLimitError(int joint, double value, double lo, double hi);
  int joint() const { return joint_; }

 private:
  int joint_;
};

// Raised when solve_pointing cannot reach the requested axis; carries the
// best achieved angular residual (radians).
class PointingError : public std::runtime_error {
 public:
  PointingError(double residual_rad, const std::string& msg);
  double residual_rad() const { return residual_rad_; }

 private:
  double residual_rad_;
};

ProbePose forward_kinematics(const ArmModel& arm, const JointState& joints);

// q' = clamp(q + saturate(delta, cap), limits); qdot' = q' - q.
JointState apply_action(const ArmModel& arm, const JointState& joints,
                        const Vec6& delta);

// Reorients the probe axis onto target_axis (unit vector, world frame) by
// damped least-squares iteration over the wrist joints q4..q6. The tip is
// carried by q1..q3 only, so the reorientation does not translate it.
JointState solve_pointing(const ArmModel& arm, const JointState& joints,
                          const Vec3& target_axis,
                          double tol_rad = 8.7e-4,  // 0.05 deg
                          int max_iters = 60);

// Translates the tip by delta_mm (world frame) via damped least squares over
// q1..q3, keeping the wrist joints fixed. Returns the joints reached; the
// achieved translation can fall short near joint limits.
JointState solve_translation(const ArmModel& arm, const JointState& joints,
                             const Vec3& delta_mm, double tol_mm = 1e-3,
                             int max_iters = 60);

// Arm description file (key-value text). Keys: link_mm (6), q_min_rad (6),
// q_max_rad (6), base_xyz_mm (3), base_rpy_rad (3), step_cap_rad.
ArmModel load_arm_file(const std::string& path);
void write_arm_file(const ArmModel& arm, const std::string& path);

}  // namespace radseek
