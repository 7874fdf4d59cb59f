#pragma once

#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

#include "radseek/kinematics.hpp"
#include "radseek/radiation.hpp"

namespace radseek {

struct HistorySample {
  ProbePose pose;
  double cps = 0.0;
  int step = 0;
};

// Chronological pose/CPS history. Entries recorded before pin_prefix() is
// called (the scanning phase) are kept for the whole episode; later entries
// live in a sliding window so the per-step refit cost stays bounded.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t recent_capacity = 50)
      : recent_capacity_(recent_capacity) {}

  void push(const HistorySample& sample);
  void push_pinned(const HistorySample& sample);  // scan-phase samples
  void pin_prefix();  // freeze everything recorded so far
  void clear();

  std::size_t size() const { return pinned_.size() + recent_.size(); }
  bool empty() const { return size() == 0; }
  const HistorySample& at(std::size_t i) const;
  const HistorySample& back() const;
  std::size_t pinned_count() const { return pinned_.size(); }

 private:
  std::vector<HistorySample> pinned_;
  std::deque<HistorySample> recent_;
  std::size_t recent_capacity_;
};

struct TargetEstimate {
  Vec3 position_mm = Vec3::Zero();
  double relative_angle_rad = 0.0;  // from the newest pose to the estimate
  double confidence = 0.0;          // 1 when residuals sit at the noise floor
  double activity_scale = 1.0;
  double rmse = 0.0;
  bool converged = false;
};

struct EstimatorOptions {
  bool fit_activity = false;
  double activity_scale = 1.0;  // used (and kept) when not fitted
  int max_iters = 40;
  std::size_t min_entries = 8;
  double min_heading_spread_rad = 1e-3;
  double flat_band_cps = 0.5;  // CPS spread below this means no signal
  double dwell_s = 1.0;        // sets the Poisson noise floor
};

class UnobservableError : public std::runtime_error {
 public:
  explicit UnobservableError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Detection angle between the probe axis and the direction to a point.
double relative_angle(const ProbePose& pose, const Vec3& point);

// Least-squares source-position estimate against the response model.
// Returns the initial guess with confidence 0 when the signal is flat or
// the fit fails to converge; throws UnobservableError when the history
// cannot constrain a position at all.
TargetEstimate estimate_target(const HistoryBuffer& history,
                               const ResponseParams& params,
                               const Vec3& initial_guess,
                               const EstimatorOptions& opts = {});

}  // namespace radseek
