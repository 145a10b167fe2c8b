#pragma once

// Brute-force reference for the per-timestep, per-axis outlier-rejecting
// aggregation. Written directly from the formulas, independently of the
// library implementation; kept deliberately naive.

#include <cmath>
#include <cstddef>
#include <vector>

namespace offemma::testsupport {

struct OracleAxisResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<size_t> retained;
  double retained_mean = 0.0;
};

inline OracleAxisResult oracle_filter_axis(const std::vector<double>& values,
                                           double epsilon) {
  OracleAxisResult r;
  const size_t n = values.size();
  for (double v : values) r.mean += v;
  r.mean = r.mean / (double)n;
  double sq = 0.0;
  for (double v : values) sq += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(sq / (double)n);
  double kept_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double diff = std::fabs(values[i] - r.mean);
    if (diff <= 2.0 * r.stddev + epsilon) {
      r.retained.push_back(i);
      kept_sum += values[i];
    }
  }
  r.retained_mean = kept_sum / (double)r.retained.size();
  return r;
}

// positions[n][t] = {x, y} for sample n at timestep t.
inline std::vector<std::pair<double, double>> oracle_aggregate(
    const std::vector<std::vector<std::pair<double, double>>>& positions,
    double epsilon) {
  const size_t steps = positions.front().size();
  std::vector<std::pair<double, double>> out(steps);
  for (size_t t = 0; t < steps; ++t) {
    std::vector<double> xs, ys;
    for (const auto& sample : positions) {
      xs.push_back(sample[t].first);
      ys.push_back(sample[t].second);
    }
    out[t].first = oracle_filter_axis(xs, epsilon).retained_mean;
    out[t].second = oracle_filter_axis(ys, epsilon).retained_mean;
  }
  return out;
}

}  // namespace offemma::testsupport
