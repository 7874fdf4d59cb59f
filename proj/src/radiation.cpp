#include "radseek/radiation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "radseek/config.hpp"
#include "radseek/levmar.hpp"

namespace radseek {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

double geometric_term(double r_mm, double d_mm) {
  // 0.5 * (1 - 1/sqrt(r^2/d^2 + 1)), written as d/sqrt(r^2+d^2) to stay
  // stable for large d
  return 0.5 * (1.0 - d_mm / std::hypot(r_mm, d_mm));
}

}  // namespace

void ResponseParams::validate() const {
  if (!(r_mm > 0.0) || !(l_mm > 0.0)) {
    throw std::invalid_argument("response params: r and l must be > 0");
  }
  if (c1_cps < 0.0 || c2_cps < 0.0) {
    throw std::invalid_argument("response params: c1 and c2 must be >= 0");
  }
}

int CalibrationSet::valid_count() const {
  return static_cast<int>(
      std::count_if(points.begin(), points.end(),
                    [](const Measurement& m) { return m.valid; }));
}

double scale_function(double alpha_rad, double r_mm, double l_mm) {
  if (!(r_mm > 0.0) || !(l_mm > 0.0)) {
    throw std::invalid_argument("scale_function: r and l must be > 0");
  }
  const double alpha = std::abs(alpha_rad);
  const double breakpoint = std::atan(2.0 * r_mm / l_mm);
  const double ramp_start = kScaleRampStartDeg * kDeg;
  const double ramp_end = 0.5 * kPi;
  if (alpha <= breakpoint) return 1.0;
  if (alpha < ramp_start) {
    return 2.0 * r_mm / (l_mm * std::tan(alpha));
  }
  if (alpha < ramp_end) {
    const double at_start =
        ramp_start <= breakpoint ? 1.0
                                 : 2.0 * r_mm / (l_mm * std::tan(ramp_start));
    return at_start * (ramp_end - alpha) / (ramp_end - ramp_start);
  }
  return 0.0;  // source behind the detector face
}

double expected_cps_at(const ResponseParams& params, double d_mm,
                       double alpha_rad, double activity_scale) {
  if (!(d_mm > 0.0)) {
    throw std::domain_error("expected_cps: probe tip coincides with source");
  }
  return activity_scale * params.c1_cps * geometric_term(params.r_mm, d_mm) *
             scale_function(alpha_rad, params.r_mm, params.l_mm) +
         params.c2_cps;
}

double expected_cps(const ResponseParams& params, const ProbePose& probe,
                    const SourceTarget& source) {
  const Vec3 offset = source.position_mm - probe.tip;
  const double d = offset.norm();
  if (!(d > 0.0)) {
    throw std::domain_error("expected_cps: probe tip coincides with source");
  }
  const double c = std::clamp(probe.axis.dot(offset / d), -1.0, 1.0);
  return expected_cps_at(params, d, std::acos(c), source.activity_scale);
}

double sample_cps(const ResponseParams& params, const ProbePose& probe,
                  const SourceTarget& source, Rng& rng, double dwell_s) {
  const double mean = expected_cps(params, probe, source);
  return static_cast<double>(rng.poisson(mean * dwell_s)) / dwell_s;
}

double expected_cps_with_grad(const ResponseParams& params,
                              const ProbePose& probe,
                              const SourceTarget& source, Vec3* d_position,
                              double* d_activity, double d_min_mm) {
  const Vec3 offset = source.position_mm - probe.tip;
  double d = offset.norm();
  Vec3 u = d > d_min_mm ? Vec3(offset / d) : probe.axis;
  d = std::max(d, d_min_mm);

  const double r = params.r_mm;
  const double l = params.l_mm;
  const double cos_a = std::clamp(probe.axis.dot(u), -1.0, 1.0);
  const double alpha = std::acos(cos_a);
  const double sin_a = std::sin(alpha);

  const double geo = geometric_term(r, d);
  const double dgeo_dd = -0.5 * r * r / std::pow(r * r + d * d, 1.5);
  const double f = scale_function(alpha, r, l);

  // piecewise dF/dalpha
  const double breakpoint = std::atan(2.0 * r / l);
  const double ramp_start = kScaleRampStartDeg * kDeg;
  const double ramp_end = 0.5 * kPi;
  double df_dalpha = 0.0;
  if (alpha > breakpoint && alpha < ramp_start) {
    df_dalpha = -2.0 * r / (l * sin_a * sin_a);
  } else if (alpha >= ramp_start && alpha < ramp_end) {
    const double at_start =
        ramp_start <= breakpoint ? 1.0
                                 : 2.0 * r / (l * std::tan(ramp_start));
    df_dalpha = -at_start / (ramp_end - ramp_start);
  }

  const double scale = source.activity_scale * params.c1_cps;
  if (d_position != nullptr) {
    Vec3 grad = scale * dgeo_dd * f * u;
    if (sin_a > 1e-9 && df_dalpha != 0.0) {
      const Vec3 dalpha_dp = -(probe.axis - cos_a * u) / (d * sin_a);
      grad += scale * geo * df_dalpha * dalpha_dp;
    }
    *d_position = grad;
  }
  if (d_activity != nullptr) {
    *d_activity = params.c1_cps * geo * f;
  }
  return scale * geo * f + params.c2_cps;
}

std::vector<std::pair<double, double>> calibration_grid_geometry(
    const CalibrationProtocol& protocol) {
  std::vector<std::pair<double, double>> out;
  const double eps = 1e-9;
  for (double v = protocol.vert_min_mm; v <= protocol.vert_max_mm + eps;
       v += protocol.vert_step_mm) {
    for (double h = protocol.horiz_min_mm; h <= protocol.horiz_max_mm + eps;
         h += protocol.horiz_step_mm) {
      out.emplace_back(std::hypot(v, h), std::atan2(h, v));
    }
  }
  // near-field on-axis points; those already covered by the main grid are
  // skipped so the default protocol produces exactly 40 points
  for (double v = protocol.near_min_mm; v <= protocol.near_max_mm + eps;
       v += protocol.near_step_mm) {
    const bool on_main_grid =
        v >= protocol.vert_min_mm - eps &&
        std::abs(std::remainder(v - protocol.vert_min_mm,
                                protocol.vert_step_mm)) < eps;
    if (!on_main_grid) out.emplace_back(v, 0.0);
  }
  return out;
}

CalibrationSet generate_calibration_grid(const ResponseParams& params,
                                         const CalibrationProtocol& protocol,
                                         Rng& rng) {
  params.validate();
  CalibrationSet set;
  for (const auto& [d, alpha] : calibration_grid_geometry(protocol)) {
    const double mean =
        expected_cps_at(params, d, alpha, protocol.activity_scale);
    double acc = 0.0;
    const int n = std::max(1, protocol.samples_per_point);
    for (int s = 0; s < n; ++s) {
      switch (protocol.noise) {
        case NoiseMode::kNone:
          acc += mean;
          break;
        case NoiseMode::kPoisson:
          acc += static_cast<double>(rng.poisson(mean * protocol.dwell_s)) /
                 protocol.dwell_s;
          break;
        case NoiseMode::kGaussian:
          acc += std::max(0.0, mean + protocol.gaussian_sigma * rng.normal());
          break;
      }
    }
    Measurement m;
    m.d_mm = d;
    m.alpha_rad = alpha;
    m.cps = acc / n;
    m.n_samples = n;
    m.valid = m.cps >= params.c2_cps + protocol.validity_margin_cps;
    set.points.push_back(m);
  }
  return set;
}

FitReport fit_response(const CalibrationSet& data, double r_mm,
                       const ResponseParams& initial_guess, int max_iters) {
  std::vector<Measurement> pts;
  for (const auto& m : data.points) {
    if (m.valid) pts.push_back(m);
  }
  if (pts.size() < 6) {
    throw FitError("fit_response: need at least 6 valid points, have " +
                       std::to_string(pts.size()),
                   initial_guess, 0.0);
  }
  // canonical ordering makes the fit independent of input order
  std::sort(pts.begin(), pts.end(), [](const Measurement& a,
                                       const Measurement& b) {
    if (a.d_mm != b.d_mm) return a.d_mm < b.d_mm;
    if (a.alpha_rad != b.alpha_rad) return a.alpha_rad < b.alpha_rad;
    return a.cps < b.cps;
  });

  double cps_min = pts.front().cps;
  double cps_max = pts.front().cps;
  for (const auto& m : pts) {
    cps_min = std::min(cps_min, m.cps);
    cps_max = std::max(cps_max, m.cps);
  }
  if (cps_max - cps_min < 1e-12) {
    throw FitError("fit_response: degenerate data (all CPS identical)",
                   initial_guess, 0.0);
  }

  auto residual = [&](const Eigen::VectorXd& p) {
    ResponseParams rp;
    rp.r_mm = r_mm;
    rp.l_mm = p[0];
    rp.c1_cps = p[1];
    rp.c2_cps = p[2];
    Eigen::VectorXd res(static_cast<int>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      res[static_cast<int>(i)] =
          expected_cps_at(rp, pts[i].d_mm, pts[i].alpha_rad) - pts[i].cps;
    }
    return res;
  };

  Eigen::VectorXd p0(3);
  p0 << initial_guess.l_mm, initial_guess.c1_cps, initial_guess.c2_cps;
  LevMarOptions opts;
  opts.max_iters = max_iters;
  opts.lower = Eigen::Vector3d(1e-3, 0.0, 0.0);
  const LevMarResult lm = levenberg_marquardt(residual, p0, opts);

  ResponseParams fitted;
  fitted.r_mm = r_mm;
  fitted.l_mm = lm.params[0];
  fitted.c1_cps = lm.params[1];
  fitted.c2_cps = lm.params[2];

  if (!lm.converged) {
    std::ostringstream os;
    os << "fit_response: no convergence in " << lm.iters
       << " iterations (rmse " << lm.rmse << ")";
    throw FitError(os.str(), fitted, lm.rmse);
  }

  double mean = 0.0;
  for (const auto& m : pts) mean += m.cps;
  mean /= static_cast<double>(pts.size());
  double ss_tot = 0.0;
  for (const auto& m : pts) ss_tot += (m.cps - mean) * (m.cps - mean);
  const double ss_res = 2.0 * lm.cost;

  FitReport report;
  report.params = fitted;
  report.rmse = lm.rmse;
  report.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  report.n_valid = static_cast<int>(pts.size());
  report.n_total = static_cast<int>(data.points.size());
  report.iterations = lm.iters;
  return report;
}

void write_calibration_file(const CalibrationSet& data,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write calibration file: " + path);
  out << "# d_mm alpha_deg cps_mean n_samples valid\n";
  char buf[160];
  for (const auto& m : data.points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d\n", m.d_mm,
                  m.alpha_rad / kDeg, m.cps, m.n_samples, m.valid ? 1 : 0);
    out << buf;
  }
}

CalibrationSet read_calibration_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open file");
  CalibrationSet set;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double d = 0.0, alpha_deg = 0.0, cps = 0.0;
    int n = 0, valid = 0;
    if (!(ls >> d)) continue;  // blank line
    if (!(ls >> alpha_deg >> cps >> n >> valid)) {
      throw ConfigError(path, lineno, "",
                        "expected 'd_mm alpha_deg cps n_samples valid'");
    }
    std::string extra;
    if (ls >> extra) {
      throw ConfigError(path, lineno, "", "trailing content: '" + extra + "'");
    }
    if (!(d > 0.0)) {
      throw ConfigError(path, lineno, "d_mm", "must be > 0");
    }
    if (alpha_deg < 0.0 || alpha_deg > 180.0) {
      throw ConfigError(path, lineno, "alpha_deg", "must be in [0, 180]");
    }
    Measurement m;
    m.d_mm = d;
    m.alpha_rad = alpha_deg * kDeg;
    m.cps = cps;
    m.n_samples = n;
    m.valid = valid != 0;
    set.points.push_back(m);
  }
  return set;
}

std::string format_fit_report(const FitReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "# response model fit report\n"
                "r_mm = %.9g\n"
                "l_mm = %.9g\n"
                "c1_cps = %.9g\n"
                "c2_cps = %.9g\n"
                "rmse = %.9g\n"
                "r_squared = %.9g\n"
                "n_valid = %d\n"
                "n_total = %d\n"
                "iterations = %d\n",
                report.params.r_mm, report.params.l_mm, report.params.c1_cps,
                report.params.c2_cps, report.rmse, report.r_squared,
                report.n_valid, report.n_total, report.iterations);
  return buf;
}

}  // namespace radseek
