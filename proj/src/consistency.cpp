#include "offemma/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "offemma/errors.hpp"

namespace offemma::consistency {

void TrajectoryEnsemble::validate() const {
  if (samples.empty()) {
    raise(ErrorCode::MismatchedEnsemble, "ensemble must hold at least one trajectory");
  }
  const size_t len = samples.front().size();
  const double dt = samples.front().dt;
  if (len == 0) {
    raise(ErrorCode::MismatchedEnsemble, "ensemble trajectories must be non-empty");
  }
  for (size_t n = 1; n < samples.size(); ++n) {
    if (samples[n].size() != len || samples[n].dt != dt) {
      raise(ErrorCode::MismatchedEnsemble,
            "trajectory " + std::to_string(n) + " differs in length or dt");
    }
  }
}

AxisFilter filter_axis(std::span<const double> values, double epsilon) {
  if (values.empty()) {
    raise(ErrorCode::EmptyValues, "no values to filter");
  }
  if (!(epsilon >= 0.0)) {
    raise(ErrorCode::NonFiniteValue, "epsilon must be >= 0");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::NonFiniteValue, "non-finite value in filter input");
    }
  }
  // sums run over value-sorted operands so the result is exactly
  // permutation-invariant
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = (double)values.size();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  AxisFilter out;
  out.mean = sum / n;
  double sq = 0.0;
  for (double v : sorted) {
    const double d = v - out.mean;
    sq += d * d;
  }
  out.stddev = std::sqrt(sq / n);  // population form, divide by N
  const double bound = 2.0 * out.stddev + epsilon;
  for (size_t i = 0; i < values.size(); ++i) {
    if (std::fabs(values[i] - out.mean) <= bound) {
      out.retained.push_back(i);
    }
  }
  return out;
}

AggregatedTrajectory aggregate(const TrajectoryEnsemble& ensemble,
                               double epsilon) {
  ensemble.validate();
  const size_t steps = ensemble.samples.front().size();
  const double dt = ensemble.samples.front().dt;

  AggregatedTrajectory out;
  out.trajectory.dt = dt;
  out.trajectory.waypoints.reserve(steps);
  out.provenance.steps.reserve(steps);

  std::vector<double> xs(ensemble.samples.size());
  std::vector<double> ys(ensemble.samples.size());
  double prev_x = 0.0, prev_y = 0.0;
  for (size_t t = 0; t < steps; ++t) {
    for (size_t n = 0; n < ensemble.samples.size(); ++n) {
      xs[n] = ensemble.samples[n].waypoints[t].x;
      ys[n] = ensemble.samples[n].waypoints[t].y;
    }
    TimestepStats stats;
    stats.x = filter_axis(xs, epsilon);
    stats.y = filter_axis(ys, epsilon);

    auto retained_mean = [](const std::vector<double>& all,
                            const std::vector<size_t>& retained) {
      std::vector<double> kept;
      kept.reserve(retained.size());
      for (size_t i : retained) kept.push_back(all[i]);
      std::sort(kept.begin(), kept.end());
      double sum = 0.0;
      for (double v : kept) sum += v;
      return sum / (double)kept.size();
    };
    const double x_hat = retained_mean(xs, stats.x.retained);
    const double y_hat = retained_mean(ys, stats.y.retained);

    kinematics::Waypoint w;
    w.t = ensemble.samples.front().waypoints[t].t;
    w.x = x_hat;
    w.y = y_hat;
    // headings are not aggregated by the filter; report the course angle
    const double dx = x_hat - prev_x;
    const double dy = y_hat - prev_y;
    w.heading = (dx == 0.0 && dy == 0.0) ? (out.trajectory.waypoints.empty()
                                                ? 0.0
                                                : out.trajectory.waypoints.back().heading)
                                         : std::atan2(dy, dx);
    prev_x = x_hat;
    prev_y = y_hat;
    out.trajectory.waypoints.push_back(w);
    out.provenance.steps.push_back(std::move(stats));
  }
  return out;
}

}  // namespace offemma::consistency
