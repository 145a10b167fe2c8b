#include "offemma/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "offemma/errors.hpp"

namespace offemma::kinematics {

namespace {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

void check_monotonic(std::span<const TimedPose> poses) {
  for (size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].t > poses[i - 1].t)) {
      raise(ErrorCode::NonMonotonicTimestamps,
            "pose timestamps must strictly increase (index " +
                std::to_string(i) + ")");
    }
  }
}

}  // namespace

void validate_sample(const VCSample& sample) {
  if (!std::isfinite(sample.speed) || !std::isfinite(sample.curvature)) {
    raise(ErrorCode::NonFiniteSample, "speed/curvature must be finite");
  }
  if (sample.speed < 0.0) {
    raise(ErrorCode::NegativeSpeed,
          "speed must be non-negative, got " + std::to_string(sample.speed));
  }
}

Trajectory integrate_trajectory(double initial_heading,
                                std::span<const VCSample> samples, double dt) {
  if (samples.empty()) {
    raise(ErrorCode::EmptySamples, "need at least one action sample");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    raise(ErrorCode::NonPositiveDt, "dt must be positive and finite");
  }
  for (const VCSample& s : samples) validate_sample(s);

  Trajectory out;
  out.dt = dt;
  out.waypoints.reserve(samples.size());
  double x = 0.0, y = 0.0, heading = initial_heading;
  for (size_t k = 0; k < samples.size(); ++k) {
    const double v = samples[k].speed;
    const double c = samples[k].curvature;
    const double dtheta = c * v * dt;
    if (std::fabs(dtheta) < kStraightFallbackThreshold) {
      x += v * dt * std::cos(heading);
      y += v * dt * std::sin(heading);
    } else {
      // (sin(h+dth) - sin h)/c rewritten as a product to avoid cancellation.
      const double half = 0.5 * dtheta;
      const double chord = 2.0 * std::sin(half) / c;
      x += chord * std::cos(heading + half);
      y += chord * std::sin(heading + half);
    }
    heading += dtheta;
    out.waypoints.push_back(Waypoint{(double)(k + 1) * dt, x, y, heading});
  }
  return out;
}

std::vector<VCSample> derive_ego_states(std::span<const TimedPose> poses) {
  if (poses.size() < 2) {
    raise(ErrorCode::InsufficientPoses,
          "need at least 2 poses, got " + std::to_string(poses.size()));
  }
  check_monotonic(poses);

  std::vector<VCSample> out;
  out.reserve(poses.size() - 1);
  for (size_t i = 1; i < poses.size(); ++i) {
    const double dt = poses[i].t - poses[i - 1].t;
    const double dx = poses[i].x - poses[i - 1].x;
    const double dy = poses[i].y - poses[i - 1].y;
    const double speed = std::hypot(dx, dy) / dt;
    double curvature = 0.0;
    if (speed > kStationarySpeedThreshold) {
      const double yaw_rate = wrap_angle(poses[i].yaw - poses[i - 1].yaw) / dt;
      curvature = yaw_rate / speed;
    }
    out.push_back(VCSample{speed, curvature});
  }
  return out;
}

TimedPose interpolate_pose(std::span<const TimedPose> poses, double t) {
  check_monotonic(poses);
  if (poses.empty() || t < poses.front().t || t > poses.back().t) {
    raise(ErrorCode::HorizonNotCovered,
          "pose log does not cover t=" + std::to_string(t));
  }
  auto it = std::lower_bound(
      poses.begin(), poses.end(), t,
      [](const TimedPose& p, double value) { return p.t < value; });
  if (it->t == t) return *it;
  const TimedPose& hi = *it;
  const TimedPose& lo = *(it - 1);
  const double f = (t - lo.t) / (hi.t - lo.t);
  TimedPose out;
  out.t = t;
  out.x = lo.x + f * (hi.x - lo.x);
  out.y = lo.y + f * (hi.y - lo.y);
  out.yaw = lo.yaw + f * wrap_angle(hi.yaw - lo.yaw);
  return out;
}

Trajectory resample_gt(std::span<const TimedPose> poses,
                       const TimedPose& origin_pose, double horizon,
                       double dt) {
  if (!(dt > 0.0)) {
    raise(ErrorCode::NonPositiveDt, "dt must be positive");
  }
  const double steps_exact = horizon / dt;
  const long steps = std::lround(steps_exact);
  if (steps < 1 || std::fabs(steps_exact - (double)steps) > 1e-9) {
    raise(ErrorCode::NonPositiveDt,
          "dt must divide horizon; horizon/dt = " + std::to_string(steps_exact));
  }
  check_monotonic(poses);
  if (poses.empty() || poses.front().t > origin_pose.t ||
      poses.back().t < origin_pose.t + horizon - 1e-9) {
    raise(ErrorCode::HorizonNotCovered,
          "pose log must cover [" + std::to_string(origin_pose.t) + ", " +
              std::to_string(origin_pose.t + horizon) + "]");
  }

  const double cos_yaw = std::cos(origin_pose.yaw);
  const double sin_yaw = std::sin(origin_pose.yaw);
  Trajectory out;
  out.dt = dt;
  out.waypoints.reserve((size_t)steps);
  double prev_heading = 0.0;
  for (long k = 1; k <= steps; ++k) {
    const double tk = std::min(origin_pose.t + (double)k * dt, poses.back().t);
    const TimedPose p = interpolate_pose(poses, tk);
    const double dx = p.x - origin_pose.x;
    const double dy = p.y - origin_pose.y;
    Waypoint w;
    w.t = (double)k * dt;
    w.x = cos_yaw * dx + sin_yaw * dy;
    w.y = -sin_yaw * dx + cos_yaw * dy;
    // unwrapped: continue from the previous heading by the shortest turn
    w.heading = prev_heading + wrap_angle(p.yaw - origin_pose.yaw - prev_heading);
    prev_heading = w.heading;
    out.waypoints.push_back(w);
  }
  return out;
}

}  // namespace offemma::kinematics
