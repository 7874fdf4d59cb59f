#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "radseek/kinematics.hpp"
#include "radseek/rng.hpp"

namespace radseek {

// Corrected solid-angle response coefficients. r is a known hardware
// constant (fixed, never fitted); l, c1, c2 come from calibration.
struct ResponseParams {
  double r_mm = 5.0;       // effective detector radius
  double l_mm = 26.50;     // interactive detector length
  double c1_cps = 173.78;  // geometric scale
  double c2_cps = 0.29;    // background offset

  void validate() const;
};

struct SourceTarget {
  Vec3 position_mm = Vec3::Zero();
  double activity_scale = 1.0;  // multiplier on c1
};

// One calibration record: distance/angle geometry plus the recorded mean
// count rate. Points whose signal is unreadable are kept but flagged.
struct Measurement {
  double d_mm = 0.0;
  double alpha_rad = 0.0;
  double cps = 0.0;
  int n_samples = 1;
  bool valid = true;
};

struct CalibrationSet {
  std::vector<Measurement> points;

  int valid_count() const;
};

// Angular efficiency factor of the detector. Follows the two-branch form
// (flat inside arctan(2r/l), cotangent falloff outside) and ramps linearly
// to zero between kRampStartDeg and 90 deg; at and beyond 90 deg the
// detector face sees no direct flux and the factor is 0.
double scale_function(double alpha_rad, double r_mm, double l_mm);

constexpr double kScaleRampStartDeg = 85.0;

// Expected count rate at distance d (mm) and detection angle alpha.
double expected_cps_at(const ResponseParams& params, double d_mm,
                       double alpha_rad, double activity_scale = 1.0);

// Expected count rate for a probe pose and a point source.
// d is the tip-source distance, alpha the angle between the probe axis and
// the tip-to-source direction. Throws on d = 0.
double expected_cps(const ResponseParams& params, const ProbePose& probe,
                    const SourceTarget& source);

// Poisson count over the dwell time, reported as a rate (counts / dwell).
double sample_cps(const ResponseParams& params, const ProbePose& probe,
                  const SourceTarget& source, Rng& rng, double dwell_s = 1.0);

// Model value plus analytic derivatives w.r.t. the source position (and the
// activity scale), as used by the target-position fit. The distance is
// clamped to d_min_mm so the evaluation stays total during iteration.
double expected_cps_with_grad(const ResponseParams& params,
                              const ProbePose& probe,
                              const SourceTarget& source, Vec3* d_position,
                              double* d_activity = nullptr,
                              double d_min_mm = 1e-3);

enum class NoiseMode { kNone, kPoisson, kGaussian };

// Bench-protocol description for synthetic calibration grids. The default
// values reproduce the physical collection layout: the source moves
// vertically under the probe in [5,45] mm at 5 mm steps with horizontal
// offsets [0,15] mm at 5 mm steps, plus extra on-axis points at 1..4 mm.
struct CalibrationProtocol {
  double vert_min_mm = 5.0;
  double vert_max_mm = 45.0;
  double vert_step_mm = 5.0;
  double horiz_min_mm = 0.0;
  double horiz_max_mm = 15.0;
  double horiz_step_mm = 5.0;
  double near_min_mm = 1.0;
  double near_max_mm = 5.0;
  double near_step_mm = 1.0;
  int samples_per_point = 10;
  NoiseMode noise = NoiseMode::kPoisson;
  double gaussian_sigma = 2.78;  // per-sample, kGaussian mode
  double dwell_s = 1.0;
  double activity_scale = 1.0;
  // points whose mean rate falls below c2 + this margin are unreadable
  double validity_margin_cps = 1.0;
};

// Geometry of one protocol point: d = hypot(v, h), alpha = atan2(h, v).
std::vector<std::pair<double, double>> calibration_grid_geometry(
    const CalibrationProtocol& protocol);

CalibrationSet generate_calibration_grid(const ResponseParams& params,
                                         const CalibrationProtocol& protocol,
                                         Rng& rng);

struct FitReport {
  ResponseParams params;
  double rmse = 0.0;
  double r_squared = 0.0;
  int n_valid = 0;
  int n_total = 0;
  int iterations = 0;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& msg, const ResponseParams& last_iterate,
           double last_rmse)
      : std::runtime_error(msg), last_iterate_(last_iterate),
        last_rmse_(last_rmse) {}
  const ResponseParams& last_iterate() const { return last_iterate_; }
  double last_rmse() const { return last_rmse_; }

 private:
  ResponseParams last_iterate_;
  double last_rmse_;
};

// Fits (l, c1, c2) to the valid measurements by damped least squares with
// r held fixed. Measurements are canonically ordered before fitting, so
// the result does not depend on input order.
FitReport fit_response(const CalibrationSet& data, double r_mm,
                       const ResponseParams& initial_guess,
                       int max_iters = 200);

// One record per line: d_mm alpha_deg cps_mean n_samples valid_flag.
void write_calibration_file(const CalibrationSet& data,
                            const std::string& path);
CalibrationSet read_calibration_file(const std::string& path);

std::string format_fit_report(const FitReport& report);

}  // namespace radseek
