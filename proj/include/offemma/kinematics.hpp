#pragma once

#include <span>
#include <vector>

namespace offemma::kinematics {

// One (speed, curvature) action pair. Speed in m/s (non-negative, forward
// only), curvature in 1/m (signed, positive turns left).
struct VCSample {
  double speed = 0.0;
  double curvature = 0.0;
};

// Ego-frame waypoint: x forward, y left, heading counter-clockwise from +x.
// Heading is kept unwrapped.
struct Waypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct Trajectory {
  std::vector<Waypoint> waypoints;
  double dt = 1.0;

  size_t size() const { return waypoints.size(); }
};

// World-frame pose sample from a pose log.
struct TimedPose {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

// |curvature * speed * dt| below this uses the straight-segment limit
// instead of the 1/c arc form.
inline constexpr double kStraightFallbackThreshold = 1e-9;

// Speeds below this are treated as stationary when deriving curvature.
inline constexpr double kStationarySpeedThreshold = 0.05;

void validate_sample(const VCSample& sample);

// Rolls out the action sequence from the origin with the given initial
// heading. Each sample is held constant over one dt interval and advanced
// along the exact circular arc; waypoint k sits at t = (k+1)*dt.
Trajectory integrate_trajectory(double initial_heading,
                                std::span<const VCSample> samples, double dt);

// Finite-difference (speed, curvature) between consecutive poses. Output
// length is poses.size() - 1.
std::vector<VCSample> derive_ego_states(std::span<const TimedPose> poses);

// Linear interpolation of the pose log at time t (yaw via shortest angle).
TimedPose interpolate_pose(std::span<const TimedPose> poses, double t);

// Samples the pose log at origin_pose.t + k*dt for k = 1..horizon/dt and
// expresses the points in the frame anchored at origin_pose.
Trajectory resample_gt(std::span<const TimedPose> poses,
                       const TimedPose& origin_pose, double horizon,
                       double dt);

}  // namespace offemma::kinematics
