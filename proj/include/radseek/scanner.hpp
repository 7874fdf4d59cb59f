#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "radseek/env.hpp"

namespace radseek {

struct ScanConfig {
  double alpha0_rad = 30.0 * M_PI / 180.0;  // initial half-range
  double gamma = 0.8;                       // per-round shrink factor
  int grid_n = 5;                           // points per axis (odd)
  int blur_n = 3;                           // Gaussian kernel size (odd)
  double blur_sigma = 1.0;
  double advance_step_mm = 10.0;  // translation after each round
  int base_rounds = 2;
  int max_rounds = 4;
  // blurred grids flatter than this carry no usable peak direction and
  // keep the boundary-continuation loop going
  double min_contrast_cps = 0.5;
  // when false, rounds whose peak is on the boundary (or too flat) only
  // reorient and hold position; the standalone scanning method uses this
  // so an uncertain bearing never triggers a blind advance
  bool advance_on_unidentified = true;

  static ScanConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

// One pitch/yaw sweep about a reference heading. values(i, j) is the CPS
// sample at pitch_offsets[i], yaw_offsets[j]; the centre cell is the
// reference heading itself.
struct ScanGrid {
  Eigen::MatrixXd values;
  std::vector<double> pitch_offsets;
  std::vector<double> yaw_offsets;
  std::vector<Vec3> axes;            // world heading per cell, row-major
  std::vector<unsigned char> flags;  // 1 = unreachable, sentinel-filled
  bool complete = true;              // false if the episode ended mid-sweep

  int n() const { return static_cast<int>(values.rows()); }
  int cell_index(int i, int j) const { return i * n() + j; }
};

struct PeakCell {
  int row = 0;
  int col = 0;
  bool is_boundary = false;
};

struct RoundRecord {
  double alpha_rad = 0.0;
  double alpha_next_rad = 0.0;
  ScanGrid raw;
  ScanGrid blurred;
  PeakCell peak;
  double contrast = 0.0;  // max - min of the blurred grid
  Vec3 heading_before = Vec3::UnitX();
  Vec3 heading_after = Vec3::UnitX();
  bool identified = false;  // interior peak with usable contrast
};

struct Phase1Result {
  Vec3 heading = Vec3::UnitX();
  int rounds_used = 0;
  int steps_used = 0;
  bool resolved = false;
  bool episode_done = false;
  std::vector<RoundRecord> rounds;
};

class ScanError : public std::runtime_error {
 public:
  explicit ScanError(const std::string& msg) : std::runtime_error(msg) {}
};

// Sweeps pitch/yaw offsets in [-alpha, alpha] about the current heading,
// sampling once per cell (one env step each); the probe is restored to its
// pre-scan joints afterwards. Unreachable cells are filled with the
// background level and flagged; more than half unreachable is an error.
ScanGrid acquire_grid(Env& env, const ScanConfig& config, double alpha_rad);

// Normalized Gaussian blur with replicate padding.
ScanGrid blur_grid(const ScanGrid& grid, int kernel_n = 3, double sigma = 1.0);

// Argmax cell; ties prefer the cell closest to the centre, then the lowest
// row-major index. is_boundary marks the outer ring.
PeakCell find_peak(const ScanGrid& grid);

// One full round: acquire, blur, pick the peak, reorient onto it and
// advance (one more env step). Returns the record plus alpha * gamma.
RoundRecord scan_round(Env& env, const ScanConfig& config, double alpha_rad);

// Base rounds plus boundary-continuation: keeps scanning while the peak
// sits on the grid edge (or the field is too flat to identify one), up to
// max_rounds.
Phase1Result run_phase1(Env& env, const ScanConfig& config);

void write_scan_trace(const std::vector<RoundRecord>& rounds,
                      const std::string& path);

}  // namespace radseek
