#include "radseek/angle_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "radseek/levmar.hpp"

namespace radseek {

void HistoryBuffer::push(const HistorySample& sample) {
  recent_.push_back(sample);
  if (recent_.size() > recent_capacity_) {
    recent_.pop_front();
  }
}

void HistoryBuffer::push_pinned(const HistorySample& sample) {
  // anything already recorded predates this sample; pin it too so the
  // buffer stays chronological with the pinned block in front
  pin_prefix();
  pinned_.push_back(sample);
}

void HistoryBuffer::pin_prefix() {
  pinned_.insert(pinned_.end(), recent_.begin(), recent_.end());
  recent_.clear();
}

void HistoryBuffer::clear() {
  pinned_.clear();
  recent_.clear();
}

const HistorySample& HistoryBuffer::at(std::size_t i) const {
  if (i < pinned_.size()) return pinned_[i];
  return recent_.at(i - pinned_.size());
}

const HistorySample& HistoryBuffer::back() const {
  if (!recent_.empty()) return recent_.back();
  return pinned_.back();
}

double relative_angle(const ProbePose& pose, const Vec3& point) {
  const Vec3 offset = point - pose.tip;
  const double d = offset.norm();
  if (!(d > 0.0)) {
    throw std::domain_error("relative_angle: point coincides with probe tip");
  }
  const double c = std::clamp(pose.axis.dot(offset / d), -1.0, 1.0);
  return std::acos(c);
}

TargetEstimate estimate_target(const HistoryBuffer& history,
                               const ResponseParams& params,
                               const Vec3& initial_guess,
                               const EstimatorOptions& opts) {
  const std::size_t n = history.size();
  if (n < opts.min_entries) {
    throw UnobservableError("estimate_target: only " + std::to_string(n) +
                            " history entries, need " +
                            std::to_string(opts.min_entries));
  }

  // geometric diversity: all headings collinear means the source position
  // cannot be triangulated from angles at all
  const Vec3 axis0 = history.at(0).pose.axis;
  double max_spread = 0.0;
  double cps_min = history.at(0).cps;
  double cps_max = cps_min;
  for (std::size_t i = 0; i < n; ++i) {
    const HistorySample& s = history.at(i);
    const double c = std::clamp(axis0.dot(s.pose.axis), -1.0, 1.0);
    max_spread = std::max(max_spread, std::acos(c));
    cps_min = std::min(cps_min, s.cps);
    cps_max = std::max(cps_max, s.cps);
  }
  if (max_spread < opts.min_heading_spread_rad) {
    throw UnobservableError(
        "estimate_target: all history headings are collinear");
  }

  auto safe_angle = [&](const Vec3& point) {
    const ProbePose& pose = history.back().pose;
    return (point - pose.tip).norm() > 0.0 ? relative_angle(pose, point) : 0.0;
  };

  auto guess_result = [&](double confidence) {
    TargetEstimate est;
    est.position_mm = initial_guess;
    est.relative_angle_rad = safe_angle(initial_guess);
    est.confidence = confidence;
    est.activity_scale = opts.activity_scale;
    est.converged = false;
    return est;
  };

  if (cps_max - cps_min < opts.flat_band_cps) {
    return guess_result(0.0);  // no usable signal gradient
  }

  const bool with_activity = opts.fit_activity;
  const int np = with_activity ? 4 : 3;

  auto unpack = [&](const Eigen::VectorXd& p, SourceTarget& src) {
    src.position_mm = Vec3(p[0], p[1], p[2]);
    src.activity_scale = with_activity ? p[3] : opts.activity_scale;
  };

  auto residual = [&](const Eigen::VectorXd& p) {
    SourceTarget src;
    unpack(p, src);
    Eigen::VectorXd res(static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const HistorySample& s = history.at(i);
      res[static_cast<int>(i)] =
          expected_cps_with_grad(params, s.pose, src, nullptr) - s.cps;
    }
    return res;
  };

  auto jacobian = [&](const Eigen::VectorXd& p) {
    SourceTarget src;
    unpack(p, src);
    Eigen::MatrixXd jac(static_cast<int>(n), np);
    for (std::size_t i = 0; i < n; ++i) {
      const HistorySample& s = history.at(i);
      Vec3 dpos;
      double dact = 0.0;
      expected_cps_with_grad(params, s.pose, src, &dpos,
                             with_activity ? &dact : nullptr);
      jac.block<1, 3>(static_cast<int>(i), 0) = dpos.transpose();
      if (with_activity) jac(static_cast<int>(i), 3) = dact;
    }
    return jac;
  };

  Eigen::VectorXd p0(np);
  p0.head<3>() = initial_guess;
  if (with_activity) p0[3] = std::max(opts.activity_scale, 1e-3);

  LevMarOptions lm_opts;
  lm_opts.max_iters = opts.max_iters;
  if (with_activity) {
    lm_opts.lower = Eigen::VectorXd::Constant(4, -1e9);
    lm_opts.upper = Eigen::VectorXd::Constant(4, 1e9);
    lm_opts.lower[3] = 1e-6;
  }
  const LevMarResult lm = levenberg_marquardt(residual, p0, lm_opts, jacobian);
  if (!lm.converged) {
    return guess_result(0.0);
  }

  TargetEstimate est;
  est.position_mm = Vec3(lm.params[0], lm.params[1], lm.params[2]);
  est.activity_scale = with_activity ? lm.params[3] : opts.activity_scale;
  est.rmse = lm.rmse;
  est.converged = true;
  est.relative_angle_rad = safe_angle(est.position_mm);

  // noise floor: Poisson std of a rate with the observed mean over one dwell
  double cps_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) cps_mean += history.at(i).cps;
  cps_mean /= static_cast<double>(n);
  const double floor =
      std::sqrt(std::max(cps_mean, params.c2_cps) / opts.dwell_s);
  est.confidence = lm.rmse <= floor ? 1.0 : floor / lm.rmse;
  return est;
}

}  // namespace radseek
