#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "radseek/config.hpp"
#include "radseek/kinematics.hpp"
#include "radseek/rng.hpp"

using namespace radseek;

namespace {

// test-only oracle: walk the chain transform by transform with hand-built
// rotation matrices, independent of the production FK composition
Vec3 oracle_tip(const ArmModel& arm, const Vec6& q) {
  auto rot = [](int axis, double a) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    const double c = std::cos(a), s = std::sin(a);
    if (axis == 0) {  // x
      r << 1, 0, 0, 0, c, -s, 0, s, c;
    } else if (axis == 1) {  // y
      r << c, 0, s, 0, 1, 0, -s, 0, c;
    } else {  // z
      r << c, -s, 0, s, c, 0, 0, 0, 1;
    }
    return r;
  };
  const int axes[6] = {2, 1, 1, 0, 1, 2};
  Eigen::Matrix3d r = arm.base.linear();
  Vec3 p = arm.base.translation();
  for (int i = 0; i < 6; ++i) {
    r = r * rot(axes[i], q[i]);
    const Vec3 link = i == 0 ? Vec3(0, 0, arm.link_mm[0])
                             : Vec3(arm.link_mm[i], 0, 0);
    p = p + r * link;
  }
  return p;
}

JointState make_joints(const Vec6& q) {
  JointState j;
  j.q = q;
  return j;
}

Vec6 random_joints(const ArmModel& arm, Rng& rng, double shrink = 0.9) {
  Vec6 q;
  for (int i = 0; i < 6; ++i) {
    const double mid = 0.5 * (arm.q_min[i] + arm.q_max[i]);
    const double half = 0.5 * (arm.q_max[i] - arm.q_min[i]) * shrink;
    q[i] = mid + half * rng.uniform(-1.0, 1.0);
  }
  return q;
}

}  // namespace

TEST_CASE("home pose matches the documented reference configuration") {
  const ArmModel arm;
  const ProbePose home = forward_kinematics(arm, JointState{});
  CHECK(home.tip.isApprox(Vec3(440.0, 0.0, 150.0), 1e-12));
  CHECK(home.axis.isApprox(Vec3::UnitX(), 1e-12));
  CHECK(std::abs(home.axis.norm() - 1.0) < 1e-9);
  CHECK((home.orientation * Vec3::UnitX()).isApprox(home.axis, 1e-12));
}

TEST_CASE("joint 1 rotates the tip about the base axis") {
  const ArmModel arm;
  const double eps = 0.137;
  Vec6 q = Vec6::Zero();
  q[0] = eps;
  const ProbePose pose = forward_kinematics(arm, make_joints(q));
  const Vec3 expected =
      Eigen::AngleAxisd(eps, Vec3::UnitZ()) * Vec3(440.0, 0.0, 150.0);
  CHECK(pose.tip.isApprox(expected, 1e-12));
}

TEST_CASE("random configurations match the chained-transform oracle") {
  const ArmModel arm;
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec6 q = random_joints(arm, rng);
    const ProbePose pose = forward_kinematics(arm, make_joints(q));
    CHECK((pose.tip - oracle_tip(arm, q)).norm() < 1e-9);
    CHECK(std::abs(pose.axis.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("limit violations name the offending joint") {
  const ArmModel arm;
  Vec6 q = Vec6::Zero();
  q[4] = arm.q_max[4] + 0.2;
  try {
    forward_kinematics(arm, make_joints(q));
    FAIL("expected JointLimitError");
  } catch (const JointLimitError& e) {
    CHECK(e.joint() == 4);
  }
}

TEST_CASE("apply_action: identity, exact move, clamp and saturation") {
  const ArmModel arm;
  JointState j = make_joints(Vec6::Zero());

  const JointState same = apply_action(arm, j, Vec6::Zero());
  CHECK(same.q.isApprox(Vec6::Zero()));
  CHECK(same.qdot.isApprox(Vec6::Zero()));

  Vec6 delta = Vec6::Constant(0.01);
  const JointState moved = apply_action(arm, j, delta);
  CHECK(moved.q.isApprox(delta, 1e-15));
  CHECK(moved.qdot.isApprox(delta, 1e-15));

  // saturated, not rejected
  Vec6 big = Vec6::Constant(0.2);
  const JointState capped = apply_action(arm, j, big);
  CHECK(capped.q.isApprox(Vec6::Constant(arm.step_cap_rad), 1e-15));

  // pinned at a joint limit
  JointState at_limit = make_joints(Vec6::Zero());
  at_limit.q[1] = arm.q_max[1];
  const JointState pinned = apply_action(arm, at_limit, Vec6::Constant(0.05));
  CHECK(pinned.q[1] == doctest::Approx(arm.q_max[1]));

  Vec6 bad = Vec6::Zero();
  bad[2] = std::nan("");
  CHECK_THROWS_AS(apply_action(arm, j, bad), std::invalid_argument);
}

TEST_CASE("solve_pointing aligns the axis without moving the tip") {
  const ArmModel arm;
  JointState start = make_joints(Vec6::Zero());
  start.q << 0.0, -0.9, 1.8, 0.0, -0.9, 0.0;
  const ProbePose before = forward_kinematics(arm, start);

  // already aligned: joints unchanged
  const JointState same = solve_pointing(arm, start, before.axis);
  CHECK(same.q.isApprox(start.q, 1e-9));

  // 10 degrees of pitch
  const Vec3 target =
      Eigen::AngleAxisd(10.0 * M_PI / 180.0, Vec3::UnitY()) * before.axis;
  const JointState solved = solve_pointing(arm, start, target);
  const ProbePose after = forward_kinematics(arm, solved);
  const double err =
      std::acos(std::clamp(after.axis.dot(target), -1.0, 1.0));
  CHECK(err < 0.5 * M_PI / 180.0);
  CHECK((after.tip - before.tip).norm() < 2.0);

  // directly opposite the forearm direction, outside the wrist cone
  const Vec3 forearm =
      Eigen::AngleAxisd(start.q[1] + start.q[2], Vec3::UnitY()) *
      Vec3::UnitX();
  try {
    solve_pointing(arm, start, -forearm);
    FAIL("expected PointingError");
  } catch (const PointingError& e) {
    CHECK(e.residual_rad() > 0.0);
  }
}

TEST_CASE("pointing round-trip over random reachable axes") {
  const ArmModel arm;
  JointState start = make_joints(Vec6::Zero());
  start.q << 0.0, -0.9, 1.8, 0.0, -0.9, 0.0;
  const ProbePose pose0 = forward_kinematics(arm, start);

  Rng rng(7);
  int solved_count = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // random axis within 80 degrees of the current heading
    const double ang = rng.uniform(0.0, 80.0 * M_PI / 180.0);
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    Vec3 ortho1 = pose0.axis.unitOrthogonal();
    Vec3 ortho2 = pose0.axis.cross(ortho1);
    const Vec3 target = (std::cos(ang) * pose0.axis +
                         std::sin(ang) * (std::cos(az) * ortho1 +
                                          std::sin(az) * ortho2))
                            .normalized();
    const JointState solved = solve_pointing(arm, start, target);
    const ProbePose after = forward_kinematics(arm, solved);
    const double err =
        std::acos(std::clamp(after.axis.dot(target), -1.0, 1.0));
    CHECK(err < 0.5 * M_PI / 180.0);
    CHECK((after.tip - pose0.tip).norm() < 2.0);
    ++solved_count;
  }
  CHECK(solved_count == 1000);
}

TEST_CASE("tip motion is Lipschitz in the joint increment") {
  const ArmModel arm;
  // bound: sum over joints of the largest lever arm each joint can swing
  const double lever = arm.link_mm[0] + arm.link_mm[1] + arm.link_mm[2];
  const double L = 3.0 * lever;  // generous frozen constant, mm per rad
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec6 q = random_joints(arm, rng, 0.8);
    Vec6 delta;
    for (int i = 0; i < 6; ++i) delta[i] = rng.uniform(-0.05, 0.05);
    const JointState a = make_joints(q);
    const JointState b = apply_action(arm, a, delta);
    const Vec3 tip_a = forward_kinematics(arm, a).tip;
    const Vec3 tip_b = forward_kinematics(arm, b).tip;
    CHECK((tip_b - tip_a).norm() <= L * b.qdot.norm());
  }
}

TEST_CASE("solve_translation moves the tip by the requested offset") {
  const ArmModel arm;
  JointState start = make_joints(Vec6::Zero());
  start.q << 0.0, -0.9, 1.8, 0.0, -0.9, 0.0;
  const ProbePose before = forward_kinematics(arm, start);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 delta(rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0),
               rng.uniform(-15.0, 15.0));
    const JointState moved = solve_translation(arm, start, delta);
    const ProbePose after = forward_kinematics(arm, moved);
    CHECK((after.tip - (before.tip + delta)).norm() < 0.1);
    // wrist joints untouched
    CHECK(moved.q.tail<3>().isApprox(start.q.tail<3>(), 1e-12));
  }
}

TEST_CASE("arm file round-trip and parse errors") {
  const std::string path = "arm_roundtrip_test.txt";
  ArmModel arm;
  arm.link_mm = {120.0, 210.0, 190.0, 0.0, 0.0, 0.0};
  arm.step_cap_rad = 0.04;
  write_arm_file(arm, path);
  const ArmModel loaded = load_arm_file(path);
  CHECK(loaded.link_mm[1] == doctest::Approx(210.0));
  CHECK(loaded.step_cap_rad == doctest::Approx(0.04));

  {
    std::ofstream bad("arm_bad_test.txt");
    bad << "link_mm = 150 240 200 0 0 0\n";
    bad << "q_min_rad = -1 -1 -1\n";  // wrong arity, line 2
  }
  try {
    load_arm_file("arm_bad_test.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "q_min_rad");
    CHECK(e.line() == 2);
  }
}
