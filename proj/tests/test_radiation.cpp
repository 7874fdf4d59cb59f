#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "radseek/config.hpp"
#include "radseek/radiation.hpp"
#include "radseek/rng.hpp"

using namespace radseek;

namespace {

constexpr double kDeg = M_PI / 180.0;

ProbePose pose_at(const Vec3& tip, const Vec3& axis) {
  ProbePose p;
  p.tip = tip;
  p.axis = axis.normalized();
  p.orientation = Quat::FromTwoVectors(Vec3::UnitX(), p.axis);
  return p;
}

ResponseParams paper_params() {
  ResponseParams p;
  p.r_mm = 5.0;
  p.l_mm = 26.50;
  p.c1_cps = 173.78;
  p.c2_cps = 0.29;
  return p;
}

}  // namespace

TEST_CASE("scale function branches and breakpoint continuity") {
  const double r = 5.0, l = 26.50;
  CHECK(scale_function(0.0, r, l) == doctest::Approx(1.0));

  const double breakpoint = std::atan(2.0 * r / l);
  CHECK(scale_function(breakpoint, r, l) == doctest::Approx(1.0));
  CHECK(scale_function(breakpoint + 1e-12, r, l) ==
        doctest::Approx(1.0).epsilon(1e-9));

  // direct arithmetic at r = 10, l = 26.50, alpha = 45 deg
  const double expected = 2.0 * 10.0 / (26.50 * std::tan(45.0 * kDeg));
  CHECK(scale_function(45.0 * kDeg, 10.0, 26.50) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.7547).epsilon(1e-4));

  // dense sweep: no jump anywhere below 90 deg
  double prev = scale_function(0.0, r, l);
  for (int i = 1; i <= 90000; ++i) {
    const double a = i * (0.5 * M_PI) / 90000.0 - 1e-12;
    const double f = scale_function(a, r, l);
    CHECK(std::abs(f - prev) < 1e-3);  // continuity at fine resolution
    CHECK(f > 0.0);
    CHECK(f <= 1.0);
    prev = f;
  }
  CHECK(scale_function(0.5 * M_PI, r, l) == doctest::Approx(0.0));
  CHECK(scale_function(120.0 * kDeg, r, l) == doctest::Approx(0.0));
}

TEST_CASE("expected cps: fitted-parameter spot value and far-field limit") {
  const ResponseParams p = paper_params();

  // on-axis at d = r: c1/2 * (1 - 1/sqrt(2)) + c2
  const double expected =
      173.78 * 0.5 * (1.0 - 1.0 / std::sqrt(2.0)) + 0.29;
  CHECK(expected == doctest::Approx(25.74).epsilon(1e-3));
  CHECK(expected_cps_at(p, p.r_mm, 0.0) ==
        doctest::Approx(expected).epsilon(1e-12));

  // geometric term vanishes at large distance
  CHECK(std::abs(expected_cps_at(p, 1e6 * p.r_mm, 0.0) - p.c2_cps) < 1e-6);

  // strictly decreasing in d
  double prev = expected_cps_at(p, 1.0, 0.3);
  for (double d = 2.0; d < 300.0; d *= 2.0) {
    const double v = expected_cps_at(p, d, 0.3);
    CHECK(v < prev);
    prev = v;
  }

  CHECK_THROWS_AS(expected_cps_at(p, 0.0, 0.0), std::domain_error);
}

TEST_CASE("expected cps >= c2 and rigid-transform equivariance") {
  const ResponseParams p = paper_params();
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 tip(rng.uniform(-100, 100), rng.uniform(-100, 100),
                   rng.uniform(-100, 100));
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() < 1e-6) continue;
    SourceTarget src;
    src.position_mm =
        tip + Vec3(rng.uniform(-80, 80), rng.uniform(-80, 80),
                   rng.uniform(-80, 80));
    if ((src.position_mm - tip).norm() < 1.0) continue;
    const ProbePose pose = pose_at(tip, axis);
    const double base = expected_cps(p, pose, src);
    CHECK(base >= p.c2_cps);

    // apply one rigid transform to probe and source together
    const Quat q =
        Quat(Eigen::AngleAxisd(rng.uniform(0, 2 * M_PI),
                               Vec3(rng.normal(), rng.normal(), rng.normal())
                                   .normalized()));
    const Vec3 t(rng.uniform(-50, 50), rng.uniform(-50, 50),
                 rng.uniform(-50, 50));
    ProbePose moved;
    moved.tip = q * pose.tip + t;
    moved.orientation = (q * pose.orientation).normalized();
    moved.axis = moved.orientation * Vec3::UnitX();
    SourceTarget moved_src = src;
    moved_src.position_mm = q * src.position_mm + t;
    CHECK(expected_cps(p, moved, moved_src) ==
          doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("distance derivative is negative (finite differences)") {
  const ResponseParams p = paper_params();
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const double d = rng.uniform(2.0, 400.0);
    const double alpha = rng.uniform(0.0, 80.0 * kDeg);
    const double h = 1e-4 * d;
    const double fd = (expected_cps_at(p, d + h, alpha) -
                       expected_cps_at(p, d - h, alpha)) /
                      (2.0 * h);
    CHECK(fd < 0.0);
    // compare against the analytic derivative of the geometric term
    const double r = p.r_mm;
    const double analytic = p.c1_cps *
                            scale_function(alpha, r, p.l_mm) * -0.5 * r * r /
                            std::pow(r * r + d * d, 1.5);
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-4));
  }
}

TEST_CASE("analytic position gradient matches finite differences") {
  const ResponseParams p = paper_params();
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const ProbePose pose = pose_at(
        Vec3(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)),
        Vec3(rng.normal(), rng.normal(), rng.normal()));
    SourceTarget src;
    src.position_mm = pose.tip + Vec3(rng.uniform(-60, 60),
                                      rng.uniform(-60, 60),
                                      rng.uniform(-60, 60));
    src.activity_scale = rng.uniform(0.5, 30.0);
    const double d = (src.position_mm - pose.tip).norm();
    if (d < 5.0) continue;
    Vec3 grad;
    double dact = 0.0;
    const double v0 = expected_cps_with_grad(p, pose, src, &grad, &dact);
    CHECK(v0 == doctest::Approx(expected_cps(p, pose, src)).epsilon(1e-12));
    for (int axis = 0; axis < 3; ++axis) {
      SourceTarget plus = src, minus = src;
      plus.position_mm[axis] += 1e-5;
      minus.position_mm[axis] -= 1e-5;
      const double fd = (expected_cps(p, pose, plus) -
                         expected_cps(p, pose, minus)) /
                        2e-5;
      CHECK(grad[axis] == doctest::Approx(fd).epsilon(1e-4));
    }
    SourceTarget act_plus = src;
    act_plus.activity_scale += 1e-6;
    const double fd_act =
        (expected_cps(p, pose, act_plus) - expected_cps(p, pose, src)) / 1e-6;
    CHECK(dact == doctest::Approx(fd_act).epsilon(1e-4));
  }
}

TEST_CASE("poisson sampler: determinism and long-run mean") {
  const ResponseParams p = paper_params();
  const ProbePose pose = pose_at(Vec3::Zero(), Vec3::UnitX());
  SourceTarget src;
  src.position_mm = Vec3(1e7, 0.0, 0.0);  // background only: mean c2 = 0.29

  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_cps(p, pose, src, a) == sample_cps(p, pose, src, b));
  }

  Rng rng(1234);
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_cps(p, pose, src, rng);
    CHECK(v >= 0.0);
    CHECK(v == std::floor(v));  // integer counts over dwell 1 s
    acc += v;
  }
  const double mean = acc / n;
  const double tol = 3.0 * std::sqrt(0.29) / std::sqrt(double(n));
  CHECK(std::abs(mean - 0.29) < tol);

  // large dwell concentrates the rate around the expectation
  src.position_mm = Vec3(30.0, 0.0, 0.0);
  const double expect = expected_cps(p, pose, src);
  Rng rng2(77);
  const double rate = sample_cps(p, pose, src, rng2, 1e6);
  CHECK(rate == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("calibration grid geometry: 40 points, noiseless passthrough") {
  const ResponseParams p = paper_params();
  CalibrationProtocol protocol;
  CHECK(calibration_grid_geometry(protocol).size() == 40);

  protocol.noise = NoiseMode::kNone;
  Rng rng(1);
  const CalibrationSet set = generate_calibration_grid(p, protocol, rng);
  CHECK(set.points.size() == 40);
  for (const auto& m : set.points) {
    CHECK(m.cps ==
          doctest::Approx(expected_cps_at(p, m.d_mm, m.alpha_rad))
              .epsilon(1e-12));
    CHECK(m.n_samples == 10);
    // validity flag consistent with the threshold rule
    CHECK(m.valid == (m.cps >= p.c2_cps + protocol.validity_margin_cps));
  }

  // the far and oblique grid corners fall below the readable threshold
  auto cps_of = [&](double v, double h) {
    return expected_cps_at(p, std::hypot(v, h), std::atan2(h, v));
  };
  CHECK(cps_of(45.0, 0.0) < p.c2_cps + 1.0);
  CHECK(cps_of(45.0, 15.0) < p.c2_cps + 1.0);
  CHECK(cps_of(5.0, 15.0) < p.c2_cps + 1.0);   // extreme oblique corner
  CHECK(cps_of(1.0, 0.0) > p.c2_cps + 1.0);    // near-field corner readable
  const int valid = set.valid_count();
  CHECK(valid >= 6);
  CHECK(valid < 40);
}

TEST_CASE("fit recovers exact parameters from noiseless data") {
  const ResponseParams truth = paper_params();
  CalibrationProtocol protocol;
  protocol.noise = NoiseMode::kNone;
  Rng rng(1);
  const CalibrationSet set = generate_calibration_grid(truth, protocol, rng);

  ResponseParams guess;
  guess.r_mm = truth.r_mm;
  guess.l_mm = truth.l_mm * 1.9;
  guess.c1_cps = truth.c1_cps * 0.55;
  guess.c2_cps = truth.c2_cps * 2.0;
  const FitReport report = fit_response(set, truth.r_mm, guess);
  CHECK(report.params.l_mm ==
        doctest::Approx(truth.l_mm).epsilon(1e-6));
  CHECK(report.params.c1_cps ==
        doctest::Approx(truth.c1_cps).epsilon(1e-6));
  CHECK(report.params.c2_cps ==
        doctest::Approx(truth.c2_cps).epsilon(1e-5));
  CHECK(report.rmse < 1e-6);
  CHECK(report.r_squared > 0.999999);
}

TEST_CASE("fit is invariant to measurement order") {
  const ResponseParams truth = paper_params();
  CalibrationProtocol protocol;
  protocol.noise = NoiseMode::kGaussian;
  Rng rng(31);
  CalibrationSet set = generate_calibration_grid(truth, protocol, rng);

  ResponseParams guess{truth.r_mm, 20.0, 100.0, 1.0};
  const FitReport a = fit_response(set, truth.r_mm, guess);

  CalibrationSet shuffled = set;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  std::rotate(shuffled.points.begin(), shuffled.points.begin() + 13,
              shuffled.points.end());
  const FitReport b = fit_response(shuffled, truth.r_mm, guess);
  CHECK(a.params.l_mm == b.params.l_mm);  // bit identical
  CHECK(a.params.c1_cps == b.params.c1_cps);
  CHECK(a.params.c2_cps == b.params.c2_cps);
}

TEST_CASE("fit statistics under gaussian noise (short statistical check)") {
  const ResponseParams truth = paper_params();
  int good = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CalibrationProtocol protocol;
    protocol.noise = NoiseMode::kGaussian;
    protocol.gaussian_sigma = 2.78;
    Rng rng(derive_seed(900, seed));
    const CalibrationSet set = generate_calibration_grid(truth, protocol, rng);
    ResponseParams guess{truth.r_mm, 20.0, 100.0, 1.0};
    const FitReport report = fit_response(set, truth.r_mm, guess);
    if (report.r_squared >= 0.95) ++good;
  }
  CHECK(good >= 8);
}

TEST_CASE("fit error paths") {
  const ResponseParams truth = paper_params();

  CalibrationSet degenerate;
  for (int i = 0; i < 10; ++i) {
    degenerate.points.push_back({10.0 + i, 0.1, 5.0, 1, true});
  }
  CHECK_THROWS_AS(fit_response(degenerate, truth.r_mm, truth), FitError);

  CalibrationSet tiny;
  tiny.points.push_back({10.0, 0.0, 25.0, 1, true});
  CHECK_THROWS_AS(fit_response(tiny, truth.r_mm, truth), FitError);

  // iteration budget too small to converge from a bad guess
  CalibrationProtocol protocol;
  protocol.noise = NoiseMode::kNone;
  Rng rng(1);
  const CalibrationSet set = generate_calibration_grid(truth, protocol, rng);
  ResponseParams far_guess{truth.r_mm, 90.0, 2000.0, 40.0};
  try {
    fit_response(set, truth.r_mm, far_guess, 1);
    FAIL("expected FitError");
  } catch (const FitError& e) {
    CHECK(e.last_iterate().l_mm > 0.0);  // carries the last iterate
  }
}

TEST_CASE("calibration file round-trip and malformed lines") {
  const ResponseParams truth = paper_params();
  CalibrationProtocol protocol;
  protocol.noise = NoiseMode::kPoisson;
  Rng rng(4);
  const CalibrationSet set = generate_calibration_grid(truth, protocol, rng);
  write_calibration_file(set, "calib_roundtrip.txt");
  const CalibrationSet loaded = read_calibration_file("calib_roundtrip.txt");
  REQUIRE(loaded.points.size() == set.points.size());
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    CHECK(loaded.points[i].d_mm ==
          doctest::Approx(set.points[i].d_mm).epsilon(1e-6));
    CHECK(loaded.points[i].valid == set.points[i].valid);
  }

  {
    std::ofstream out("calib_bad.txt");
    out << "# header\n";
    for (int i = 0; i < 5; ++i) out << "10.0 0.0 25.0 10 1\n";
    out << "10.0 oops\n";  // line 7
  }
  try {
    read_calibration_file("calib_bad.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 7);
  }
}
