#include "radseek/scanner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace radseek {

ScanConfig ScanConfig::from_config(const KeyValueConfig& cfg) {
  ScanConfig out;
  out.alpha0_rad =
      cfg.get_double("scan.alpha0_deg", out.alpha0_rad * 180.0 / M_PI) *
      M_PI / 180.0;
  out.gamma = cfg.get_double("scan.gamma", out.gamma);
  out.grid_n = static_cast<int>(cfg.get_int("scan.grid_n", out.grid_n));
  out.blur_n = static_cast<int>(cfg.get_int("scan.blur_n", out.blur_n));
  out.blur_sigma = cfg.get_double("scan.blur_sigma", out.blur_sigma);
  out.advance_step_mm =
      cfg.get_double("scan.advance_step_mm", out.advance_step_mm);
  out.base_rounds =
      static_cast<int>(cfg.get_int("scan.base_rounds", out.base_rounds));
  out.max_rounds =
      static_cast<int>(cfg.get_int("scan.max_rounds", out.max_rounds));
  out.min_contrast_cps =
      cfg.get_double("scan.min_contrast_cps", out.min_contrast_cps);
  out.validate();
  return out;
}

void ScanConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("scan: gamma must be in (0, 1)");
  }
  if (grid_n < 3 || grid_n % 2 == 0) {
    throw std::invalid_argument("scan: grid_n must be odd and >= 3");
  }
  if (!(alpha0_rad > 0.0 && alpha0_rad < 0.5 * M_PI)) {
    throw std::invalid_argument("scan: alpha0 must be in (0, 90) deg");
  }
  if (blur_n < 1 || blur_n % 2 == 0) {
    throw std::invalid_argument("scan: blur_n must be odd and >= 1");
  }
  if (base_rounds < 1 || max_rounds < base_rounds) {
    throw std::invalid_argument("scan: need max_rounds >= base_rounds >= 1");
  }
}

namespace {

std::vector<double> symmetric_offsets(int n, double alpha) {
  std::vector<double> out(n);
  const double step = 2.0 * alpha / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = -alpha + i * step;
  const int mid = n / 2;
  out[mid] = 0.0;  // keep the centre exactly on the current heading
  return out;
}

Vec3 offset_heading(const Quat& orientation, double pitch, double yaw) {
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
       Eigen::AngleAxisd(yaw, Vec3::UnitZ()))
          .toRotationMatrix();
  return orientation * (rot * Vec3::UnitX());
}

}  // namespace

ScanGrid acquire_grid(Env& env, const ScanConfig& config, double alpha_rad) {
  const int n = config.grid_n;
  ScanGrid grid;
  grid.values.setZero(n, n);
  grid.pitch_offsets = symmetric_offsets(n, alpha_rad);
  grid.yaw_offsets = symmetric_offsets(n, alpha_rad);
  grid.axes.assign(static_cast<std::size_t>(n) * n, Vec3::UnitX());
  grid.flags.assign(static_cast<std::size_t>(n) * n, 0);

  const JointState saved = env.state().robot;
  const Quat heading = env.state().probe.orientation;
  const double sentinel = env.config().response.c2_cps;

  int unreachable = 0;
  for (int i = 0; i < n && !env.done(); ++i) {
    for (int j = 0; j < n && !env.done(); ++j) {
      const int idx = grid.cell_index(i, j);
      const Vec3 axis =
          offset_heading(heading, grid.pitch_offsets[i], grid.yaw_offsets[j]);
      grid.axes[idx] = axis;
      const StepResult r = env.step_pointing(axis);
      if (r.ok()) {
        grid.values(i, j) = env.state().cps_history.back();
      } else {
        grid.values(i, j) = sentinel;
        grid.flags[idx] = 1;
        ++unreachable;
      }
    }
  }
  grid.complete = !env.done();
  if (grid.complete) {
    env.restore_joints(saved);
  }
  if (unreachable * 2 > n * n) {
    throw ScanError("acquire_grid: " + std::to_string(unreachable) + " of " +
                    std::to_string(n * n) + " headings unreachable");
  }
  return grid;
}

ScanGrid blur_grid(const ScanGrid& grid, int kernel_n, double sigma) {
  const int n = grid.n();
  const int half = kernel_n / 2;
  Eigen::MatrixXd kernel(kernel_n, kernel_n);
  for (int a = -half; a <= half; ++a) {
    for (int b = -half; b <= half; ++b) {
      kernel(a + half, b + half) =
          std::exp(-(a * a + b * b) / (2.0 * sigma * sigma));
    }
  }
  kernel /= kernel.sum();

  ScanGrid out = grid;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int a = -half; a <= half; ++a) {
        for (int b = -half; b <= half; ++b) {
          const int ii = std::clamp(i + a, 0, n - 1);  // replicate padding
          const int jj = std::clamp(j + b, 0, n - 1);
          acc += kernel(a + half, b + half) * grid.values(ii, jj);
        }
      }
      out.values(i, j) = acc;
    }
  }
  return out;
}

PeakCell find_peak(const ScanGrid& grid) {
  const int n = grid.n();
  const int mid = n / 2;
  PeakCell best;
  double best_value = -std::numeric_limits<double>::infinity();
  long best_center_d2 = std::numeric_limits<long>::max();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = grid.values(i, j);
      const long d2 = static_cast<long>(i - mid) * (i - mid) +
                      static_cast<long>(j - mid) * (j - mid);
      const bool better =
          v > best_value || (v == best_value && d2 < best_center_d2);
      if (better) {
        best_value = v;
        best_center_d2 = d2;
        best.row = i;
        best.col = j;
      }
    }
  }
  best.is_boundary = best.row == 0 || best.col == 0 || best.row == n - 1 ||
                     best.col == n - 1;
  return best;
}

RoundRecord scan_round(Env& env, const ScanConfig& config, double alpha_rad) {
  if (!(alpha_rad > 0.0)) {
    throw std::invalid_argument("scan_round: alpha must be > 0");
  }
  RoundRecord rec;
  rec.alpha_rad = alpha_rad;
  rec.alpha_next_rad = config.gamma * alpha_rad;
  rec.heading_before = env.state().probe.axis;

  rec.raw = acquire_grid(env, config, alpha_rad);
  if (!rec.raw.complete) {
    rec.heading_after = env.state().probe.axis;
    return rec;
  }
  rec.blurred = blur_grid(rec.raw, config.blur_n, config.blur_sigma);
  rec.peak = find_peak(rec.blurred);
  rec.contrast =
      rec.blurred.values.maxCoeff() - rec.blurred.values.minCoeff();
  rec.identified =
      !rec.peak.is_boundary && rec.contrast >= config.min_contrast_cps;

  const Vec3 target =
      rec.raw.axes[rec.raw.cell_index(rec.peak.row, rec.peak.col)];
  if (rec.identified || config.advance_on_unidentified) {
    env.step_move(target, config.advance_step_mm);
  } else {
    env.step_pointing(target);
  }
  rec.heading_after = env.state().probe.axis;
  return rec;
}

Phase1Result run_phase1(Env& env, const ScanConfig& config) {
  Phase1Result result;
  const int start_step = env.state().step;
  double alpha = config.alpha0_rad;

  while (!env.done()) {
    if (result.rounds_used >= config.base_rounds) {
      const bool continue_scanning =
          !result.rounds.empty() && !result.rounds.back().identified;
      if (!continue_scanning) break;
      if (result.rounds_used >= config.max_rounds) break;
    }
    RoundRecord rec;
    try {
      rec = scan_round(env, config, alpha);
    } catch (const ScanError&) {
      break;  // sweep ran against the wrist cone: hand over unresolved
    }
    alpha = rec.alpha_next_rad;
    result.rounds.push_back(std::move(rec));
    result.rounds_used += 1;
  }

  result.heading = env.state().probe.axis;
  result.steps_used = env.state().step - start_step;
  result.episode_done = env.done();
  result.resolved =
      !result.rounds.empty() && result.rounds.back().identified;
  if (env.done()) {
    // an episode that ended mid-scan (success or horizon) is not a
    // scanning failure; report it as resolved-by-termination
    result.resolved = result.resolved || env.succeeded();
  }
  return result;
}

void write_scan_trace(const std::vector<RoundRecord>& rounds,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scan trace: " + path);
  char buf[96];
  out << "# adaptive scan trace: one block per round\n";
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    const RoundRecord& r = rounds[k];
    std::snprintf(buf, sizeof(buf), "round = %zu\n", k);
    out << buf;
    std::snprintf(buf, sizeof(buf), "alpha_deg = %.9g\n",
                  r.alpha_rad * 180.0 / M_PI);
    out << buf;
    std::snprintf(buf, sizeof(buf), "peak_cell = %d %d\n", r.peak.row,
                  r.peak.col);
    out << buf;
    std::snprintf(buf, sizeof(buf), "peak_on_boundary = %d\n",
                  r.peak.is_boundary ? 1 : 0);
    out << buf;
    std::snprintf(buf, sizeof(buf), "contrast_cps = %.9g\n", r.contrast);
    out << buf;
    std::snprintf(buf, sizeof(buf), "heading_before = %.9g %.9g %.9g\n",
                  r.heading_before[0], r.heading_before[1],
                  r.heading_before[2]);
    out << buf;
    std::snprintf(buf, sizeof(buf), "heading_after = %.9g %.9g %.9g\n",
                  r.heading_after[0], r.heading_after[1], r.heading_after[2]);
    out << buf;
    out << "grid =";
    for (int i = 0; i < r.raw.n(); ++i) {
      for (int j = 0; j < r.raw.n(); ++j) {
        std::snprintf(buf, sizeof(buf), " %.9g", r.raw.values(i, j));
        out << buf;
      }
    }
    out << "\n\n";
  }
}

}  // namespace radseek
