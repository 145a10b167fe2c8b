#pragma once

#include <span>
#include <vector>

#include "offemma/kinematics.hpp"

namespace offemma::consistency {

inline constexpr double kDefaultEpsilon = 1e-6;

// Per-axis filter result for one timestep: population mean/std over the N
// samples plus the indices whose |value - mean| <= 2*std + epsilon.
struct AxisFilter {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<size_t> retained;

  size_t retained_count() const { return retained.size(); }
};

struct TimestepStats {
  AxisFilter x;
  AxisFilter y;
};

struct FilterStats {
  std::vector<TimestepStats> steps;
};

// N independently sampled trajectories sharing dt and step count.
struct TrajectoryEnsemble {
  std::vector<kinematics::Trajectory> samples;

  // Throws MismatchedEnsemble unless all members share dt and length and
  // there is at least one member.
  void validate() const;
};

struct AggregatedTrajectory {
  kinematics::Trajectory trajectory;
  FilterStats provenance;
};

AxisFilter filter_axis(std::span<const double> values, double epsilon);

// Per-timestep, per-axis outlier rejection and averaging of the retained
// values. x and y are filtered independently.
AggregatedTrajectory aggregate(const TrajectoryEnsemble& ensemble,
                               double epsilon);

}  // namespace offemma::consistency
