#include "radseek/kinematics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "radseek/config.hpp"

namespace radseek {

namespace {

constexpr int kWristStart = 3;  // q4..q6 orient, q1..q3 translate

Eigen::Isometry3d joint_transform(const ArmModel& arm, int i, double qi) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  switch (i) {
    case 0:
      t.linear() = Eigen::AngleAxisd(qi, Vec3::UnitZ()).toRotationMatrix();
      t.translation() = t.linear() * Vec3(0, 0, arm.link_mm[0]);
      return t;
    case 1:
    case 2:
    case 4:
      t.linear() = Eigen::AngleAxisd(qi, Vec3::UnitY()).toRotationMatrix();
      break;
    case 3:
      t.linear() = Eigen::AngleAxisd(qi, Vec3::UnitX()).toRotationMatrix();
      break;
    case 5:
      t.linear() = Eigen::AngleAxisd(qi, Vec3::UnitZ()).toRotationMatrix();
      break;
    default:
      throw std::logic_error("joint index out of range");
  }
  t.translation() = t.linear() * Vec3(arm.link_mm[i], 0, 0);
  return t;
}

void check_limits(const ArmModel& arm, const Vec6& q) {
  for (int i = 0; i < 6; ++i) {
    if (q[i] < arm.q_min[i] - 1e-12 || q[i] > arm.q_max[i] + 1e-12) {
      throw JointLimitError(i, q[i], arm.q_min[i], arm.q_max[i]);
    }
  }
}

Vec6 clamp_to_limits(const ArmModel& arm, Vec6 q) {
  for (int i = 0; i < 6; ++i) {
    q[i] = std::min(std::max(q[i], arm.q_min[i]), arm.q_max[i]);
  }
  return q;
}

// axis error as a rotation-free angular distance
double angle_between(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace

void ArmModel::validate() const {
  for (int i = 0; i < 6; ++i) {
    if (link_mm[i] < 0.0) {
      throw std::invalid_argument("arm link length must be >= 0");
    }
    if (!(q_min[i] < q_max[i])) {
      throw std::invalid_argument("arm joint limits must satisfy min < max");
    }
  }
  if (!(step_cap_rad > 0.0)) {
    throw std::invalid_argument("step_cap_rad must be > 0");
  }
  if (!(link_mm[0] > 0.0 && link_mm[1] > 0.0 && link_mm[2] > 0.0)) {
    throw std::invalid_argument("links 1..3 must have positive length");
  }
}

JointLimitError::JointLimitError(int joint, double value, double lo, double hi)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "joint " << (joint + 1) << " value " << value
           << " outside limits [" << lo << ", " << hi << "]";
        return os.str();
      }()),
      joint_(joint) {}

PointingError::PointingError(double residual_rad, const std::string& msg)
    : std::runtime_error(msg), residual_rad_(residual_rad) {}

ProbePose forward_kinematics(const ArmModel& arm, const JointState& joints) {
  check_limits(arm, joints.q);
  Eigen::Isometry3d t = arm.base;
  for (int i = 0; i < 6; ++i) {
    t = t * joint_transform(arm, i, joints.q[i]);
  }
  ProbePose pose;
  pose.tip = t.translation();
  pose.orientation = Quat(t.linear()).normalized();
  pose.axis = pose.orientation * Vec3::UnitX();
  return pose;
}

JointState apply_action(const ArmModel& arm, const JointState& joints,
                        const Vec6& delta) {
  if (!delta.allFinite()) {
    throw std::invalid_argument("apply_action: non-finite joint increment");
  }
  Vec6 step = delta;
  for (int i = 0; i < 6; ++i) {
    step[i] = std::clamp(step[i], -arm.step_cap_rad, arm.step_cap_rad);
  }
  JointState out;
  out.q = clamp_to_limits(arm, joints.q + step);
  out.qdot = out.q - joints.q;
  return out;
}

JointState solve_pointing(const ArmModel& arm, const JointState& joints,
                          const Vec3& target_axis, double tol_rad,
                          int max_iters) {
  const Vec3 target = target_axis.normalized();
  JointState cur = joints;
  ProbePose pose = forward_kinematics(arm, cur);
  double best_err = angle_between(pose.axis, target);
  Vec6 best_q = cur.q;

  const double damping = 1e-3;
  const double fd_step = 1e-6;
  for (int iter = 0; iter < max_iters && best_err > tol_rad; ++iter) {
    // numeric 3x3 Jacobian of the axis w.r.t. the wrist joints
    Eigen::Matrix3d jac;
    for (int k = 0; k < 3; ++k) {
      JointState probe = cur;
      probe.q[kWristStart + k] += fd_step;
      probe.q = clamp_to_limits(arm, probe.q);
      const ProbePose p = forward_kinematics(arm, probe);
      jac.col(k) = (p.axis - pose.axis) / fd_step;
    }
    const Vec3 err = target - pose.axis;
    const Eigen::Matrix3d jjt =
        jac * jac.transpose() + damping * Eigen::Matrix3d::Identity();
    const Vec3 dq = jac.transpose() * jjt.ldlt().solve(err);

    JointState next = cur;
    next.q.segment<3>(kWristStart) += dq;
    next.q = clamp_to_limits(arm, next.q);
    const ProbePose next_pose = forward_kinematics(arm, next);
    const double next_err = angle_between(next_pose.axis, target);
    if (next_err >= best_err - 1e-12) {
      break;  // stalled (limits or unreachable axis)
    }
    cur = next;
    pose = next_pose;
    best_err = next_err;
    best_q = cur.q;
  }

  if (best_err > tol_rad) {
    std::ostringstream os;
    os << "solve_pointing: target axis unreachable, residual "
       << best_err * 180.0 / M_PI << " deg";
    throw PointingError(best_err, os.str());
  }
  JointState out;
  out.q = best_q;
  out.qdot = out.q - joints.q;
  return out;
}

JointState solve_translation(const ArmModel& arm, const JointState& joints,
                             const Vec3& delta_mm, double tol_mm,
                             int max_iters) {
  JointState cur = joints;
  ProbePose pose = forward_kinematics(arm, cur);
  const Vec3 target = pose.tip + delta_mm;

  const double damping = 1e-2;
  const double fd_step = 1e-6;
  double best_err = delta_mm.norm();
  for (int iter = 0; iter < max_iters && best_err > tol_mm; ++iter) {
    Eigen::Matrix3d jac;
    for (int k = 0; k < 3; ++k) {
      JointState probe = cur;
      probe.q[k] += fd_step;
      probe.q = clamp_to_limits(arm, probe.q);
      const ProbePose p = forward_kinematics(arm, probe);
      jac.col(k) = (p.tip - pose.tip) / fd_step;
    }
    const Vec3 err = target - pose.tip;
    const Eigen::Matrix3d jjt =
        jac * jac.transpose() + damping * Eigen::Matrix3d::Identity();
    const Vec3 dq = jac.transpose() * jjt.ldlt().solve(err);

    JointState next = cur;
    next.q.head<3>() += dq;
    next.q = clamp_to_limits(arm, next.q);
    const ProbePose next_pose = forward_kinematics(arm, next);
    const double next_err = (target - next_pose.tip).norm();
    if (next_err >= best_err - 1e-12) {
      break;
    }
    cur = next;
    pose = next_pose;
    best_err = next_err;
  }
  cur.qdot = cur.q - joints.q;
  return cur;
}

ArmModel load_arm_file(const std::string& path) {
  const KeyValueConfig cfg = KeyValueConfig::load(path);
  ArmModel arm;
  const auto links = cfg.get_doubles("link_mm", 6);
  const auto qmin = cfg.get_doubles("q_min_rad", 6);
  const auto qmax = cfg.get_doubles("q_max_rad", 6);
  for (int i = 0; i < 6; ++i) {
    arm.link_mm[i] = links[i];
    arm.q_min[i] = qmin[i];
    arm.q_max[i] = qmax[i];
  }
  const auto xyz = cfg.get_doubles("base_xyz_mm", {0, 0, 0}, 3);
  const auto rpy = cfg.get_doubles("base_rpy_rad", {0, 0, 0}, 3);
  arm.base = Eigen::Isometry3d::Identity();
  arm.base.linear() =
      (Eigen::AngleAxisd(rpy[2], Vec3::UnitZ()) *
       Eigen::AngleAxisd(rpy[1], Vec3::UnitY()) *
       Eigen::AngleAxisd(rpy[0], Vec3::UnitX()))
          .toRotationMatrix();
  arm.base.translation() = Vec3(xyz[0], xyz[1], xyz[2]);
  arm.step_cap_rad = cfg.get_double("step_cap_rad", 0.05);
  arm.validate();
  return arm;
}

void write_arm_file(const ArmModel& arm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write arm file: " + path);
  auto row = [&](const char* key, const double* v, int n) {
    out << key << " =";
    char buf[64];
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), " %.9g", v[i]);
      out << buf;
    }
    out << "\n";
  };
  row("link_mm", arm.link_mm.data(), 6);
  row("q_min_rad", arm.q_min.data(), 6);
  row("q_max_rad", arm.q_max.data(), 6);
  const Vec3 xyz = arm.base.translation();
  const Vec3 rpy = arm.base.linear().eulerAngles(2, 1, 0).reverse();
  row("base_xyz_mm", xyz.data(), 3);
  row("base_rpy_rad", rpy.data(), 3);
  row("step_cap_rad", &arm.step_cap_rad, 1);
}

}  // namespace radseek
