#include "offemma/consistency.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"
#include "support/consistency_oracle.hpp"

using namespace offemma;
using namespace offemma::consistency;
using kinematics::Trajectory;
using kinematics::Waypoint;

namespace {

Trajectory from_points(const std::vector<std::pair<double, double>>& pts,
                       double dt = 1.0) {
  Trajectory t;
  t.dt = dt;
  for (size_t k = 0; k < pts.size(); ++k) {
    t.waypoints.push_back(
        Waypoint{(double)(k + 1) * dt, pts[k].first, pts[k].second, 0.0});
  }
  return t;
}

TrajectoryEnsemble random_ensemble(uint64_t& state, size_t n, size_t steps) {
  TrajectoryEnsemble e;
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (size_t k = 0; k < steps; ++k) {
      double x = 20.0 * splitmix_unit(state) - 10.0;
      double y = 20.0 * splitmix_unit(state) - 10.0;
      // occasional gross outlier
      if (splitmix_unit(state) < 0.1) x *= 25.0;
      if (splitmix_unit(state) < 0.1) y *= 25.0;
      pts.push_back({x, y});
    }
    e.samples.push_back(from_points(pts));
  }
  return e;
}

}  // namespace

TEST_CASE("hand-computed filter case: nine 1.0s and one 10.0") {
  std::vector<double> values(9, 1.0);
  values.push_back(10.0);
  const AxisFilter f = filter_axis(values, 1e-6);
  CHECK(f.mean == 1.9);
  CHECK(f.stddev == doctest::Approx(2.7).epsilon(1e-12));
  REQUIRE(f.retained.size() == 9);
  for (size_t i = 0; i < 9; ++i) CHECK(f.retained[i] == i);
}

TEST_CASE("constant values: zero std, everything retained") {
  std::vector<double> values(7, 3.25);
  const AxisFilter f = filter_axis(values, 1e-6);
  CHECK(f.stddev == 0.0);
  CHECK(f.retained.size() == 7);
}

TEST_CASE("single value identity") {
  const AxisFilter f = filter_axis(std::vector<double>{5.0}, 1e-6);
  CHECK(f.mean == 5.0);
  CHECK(f.stddev == 0.0);
  REQUIRE(f.retained.size() == 1);
  CHECK(f.retained[0] == 0);
}

TEST_CASE("filter_axis errors") {
  CHECK_THROWS_AS(filter_axis(std::vector<double>{}, 1e-6), Error);
  CHECK_THROWS_AS(filter_axis(std::vector<double>{1.0, NAN}, 1e-6), Error);
  CHECK_THROWS_AS(filter_axis(std::vector<double>{1.0}, -1.0), Error);
}

TEST_CASE("aggregate identities") {
  SUBCASE("N = 1 returns the single trajectory") {
    TrajectoryEnsemble e;
    e.samples.push_back(from_points({{1.0, 2.0}, {2.0, 2.5}, {3.5, 3.0}}));
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    REQUIRE(agg.trajectory.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
      CHECK(agg.trajectory.waypoints[k].x == e.samples[0].waypoints[k].x);
      CHECK(agg.trajectory.waypoints[k].y == e.samples[0].waypoints[k].y);
    }
  }
  SUBCASE("identical members aggregate to themselves, all retained") {
    TrajectoryEnsemble e;
    for (int i = 0; i < 4; ++i) {
      e.samples.push_back(from_points({{1.0, -1.0}, {2.0, -2.0}}));
    }
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    for (size_t k = 0; k < 2; ++k) {
      CHECK(agg.trajectory.waypoints[k].x == e.samples[0].waypoints[k].x);
      CHECK(agg.provenance.steps[k].x.retained.size() == 4);
      CHECK(agg.provenance.steps[k].y.retained.size() == 4);
    }
  }
  SUBCASE("x outlier dropped while y stays clean") {
    TrajectoryEnsemble e;
    for (int i = 0; i < 10; ++i) {
      const double x = i == 9 ? 10.0 : 1.0;
      e.samples.push_back(from_points({{x, 0.0}}));
    }
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    CHECK(agg.trajectory.waypoints[0].x == 1.0);
    CHECK(agg.trajectory.waypoints[0].y == 0.0);
    CHECK(agg.provenance.steps[0].x.retained.size() == 9);
    CHECK(agg.provenance.steps[0].y.retained.size() == 10);
  }
}

TEST_CASE("mismatched ensembles are rejected") {
  TrajectoryEnsemble e;
  CHECK_THROWS_AS(aggregate(e, 1e-6), Error);
  e.samples.push_back(from_points({{1, 1}, {2, 2}}));
  e.samples.push_back(from_points({{1, 1}}));
  CHECK_THROWS_AS(aggregate(e, 1e-6), Error);
  e.samples[1] = from_points({{1, 1}, {2, 2}}, 0.5);
  CHECK_THROWS_AS(aggregate(e, 1e-6), Error);
}

TEST_CASE("matches the brute-force formula implementation") {
  uint64_t state = 31337;
  for (int trial = 0; trial < 600; ++trial) {
    const size_t n = 1 + splitmix64(state) % 8;
    const size_t steps = 1 + splitmix64(state) % 5;
    const TrajectoryEnsemble e = random_ensemble(state, n, steps);

    std::vector<std::vector<std::pair<double, double>>> raw;
    for (const Trajectory& t : e.samples) {
      std::vector<std::pair<double, double>> pts;
      for (const Waypoint& w : t.waypoints) pts.push_back({w.x, w.y});
      raw.push_back(std::move(pts));
    }
    const auto expected = testsupport::oracle_aggregate(raw, 1e-6);
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    for (size_t k = 0; k < steps; ++k) {
      CHECK(std::fabs(agg.trajectory.waypoints[k].x - expected[k].first) <
            1e-12);
      CHECK(std::fabs(agg.trajectory.waypoints[k].y - expected[k].second) <
            1e-12);
      // Chebyshev retention bound and never-empty retention
      const size_t min_keep = (3 * n + 3) / 4;
      CHECK(agg.provenance.steps[k].x.retained.size() >= std::max<size_t>(1, min_keep));
      CHECK(agg.provenance.steps[k].y.retained.size() >= std::max<size_t>(1, min_keep));
      // bounding by retained values
      double lo = 1e300, hi = -1e300;
      for (size_t i : agg.provenance.steps[k].x.retained) {
        lo = std::min(lo, e.samples[i].waypoints[k].x);
        hi = std::max(hi, e.samples[i].waypoints[k].x);
      }
      CHECK(agg.trajectory.waypoints[k].x >= lo - 1e-12);
      CHECK(agg.trajectory.waypoints[k].x <= hi + 1e-12);
    }
  }
}

TEST_CASE("no rejection is possible at N <= 5") {
  // population-std bound: max |x - mean| <= std * sqrt(N-1), so the
  // 2-sigma rule can only fire for N >= 6
  uint64_t state = 4242;
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 2 + splitmix64(state) % 4;  // 2..5
    std::vector<double> values;
    for (size_t i = 0; i < n; ++i) {
      double v = 10.0 * splitmix_unit(state) - 5.0;
      if (splitmix_unit(state) < 0.3) v *= 1000.0;
      values.push_back(v);
    }
    const AxisFilter f = filter_axis(values, 1e-6);
    CHECK(f.retained.size() == n);
  }
  // and at N = 6 a gross outlier is rejected
  std::vector<double> six = {1.0, 1.0, 1.0, 1.0, 1.0, 100.0};
  CHECK(filter_axis(six, 1e-6).retained.size() == 5);
}

TEST_CASE("permutation invariance") {
  uint64_t state = 11;
  TrajectoryEnsemble e = random_ensemble(state, 6, 4);
  const AggregatedTrajectory base = aggregate(e, 1e-6);
  std::mt19937 rng(3);
  for (int shuffle = 0; shuffle < 10; ++shuffle) {
    std::shuffle(e.samples.begin(), e.samples.end(), rng);
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    for (size_t k = 0; k < 4; ++k) {
      CHECK(agg.trajectory.waypoints[k].x == base.trajectory.waypoints[k].x);
      CHECK(agg.trajectory.waypoints[k].y == base.trajectory.waypoints[k].y);
    }
  }
}

TEST_CASE("translation equivariance") {
  uint64_t state = 12;
  const TrajectoryEnsemble e = random_ensemble(state, 7, 3);
  const double dx = 3.5, dy = -1.25;
  TrajectoryEnsemble shifted = e;
  for (Trajectory& t : shifted.samples) {
    for (Waypoint& w : t.waypoints) {
      w.x += dx;
      w.y += dy;
    }
  }
  const AggregatedTrajectory base = aggregate(e, 1e-6);
  const AggregatedTrajectory moved = aggregate(shifted, 1e-6);
  for (size_t k = 0; k < 3; ++k) {
    CHECK(moved.trajectory.waypoints[k].x ==
          doctest::Approx(base.trajectory.waypoints[k].x + dx).epsilon(1e-12));
    CHECK(moved.trajectory.waypoints[k].y ==
          doctest::Approx(base.trajectory.waypoints[k].y + dy).epsilon(1e-12));
    CHECK(moved.provenance.steps[k].x.retained ==
          base.provenance.steps[k].x.retained);
    CHECK(moved.provenance.steps[k].y.retained ==
          base.provenance.steps[k].y.retained);
  }
}

TEST_CASE("scale equivariance") {
  uint64_t state = 13;
  const TrajectoryEnsemble e = random_ensemble(state, 6, 3);
  const double lambda = 4.25;
  TrajectoryEnsemble scaled = e;
  for (Trajectory& t : scaled.samples) {
    for (Waypoint& w : t.waypoints) {
      w.x *= lambda;
      w.y *= lambda;
    }
  }
  const AggregatedTrajectory base = aggregate(e, 1e-6);
  const AggregatedTrajectory out = aggregate(scaled, 1e-6);
  for (size_t k = 0; k < 3; ++k) {
    CHECK(out.trajectory.waypoints[k].x ==
          doctest::Approx(lambda * base.trajectory.waypoints[k].x)
              .epsilon(1e-9));
    CHECK(out.provenance.steps[k].x.retained ==
          base.provenance.steps[k].x.retained);
  }
}

TEST_CASE("contamination benefit versus the plain mean") {
  // gt + zero-mean noise with a fraction of gross outliers; with N = 8 the
  // filter fires and the aggregate must beat the plain per-axis mean in
  // expectation over seeded trials
  const size_t n = 8, steps = 5;
  const int trials = 400;
  double agg_error = 0.0, mean_error = 0.0;
  uint64_t state = 777;
  auto normal = [&state]() {
    double u1 = splitmix_unit(state);
    while (u1 <= 0.0) u1 = splitmix_unit(state);
    const double u2 = splitmix_unit(state);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<std::pair<double, double>> gt;
    for (size_t k = 0; k < steps; ++k) {
      gt.push_back({0.4 * (double)(k + 1), 0.05 * (double)(k + 1)});
    }
    TrajectoryEnsemble e;
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, double>> pts = gt;
      if (splitmix_unit(state) < 0.15) {
        for (auto& p : pts) {
          p.first *= 5.0;
          p.second *= -5.0;
        }
      } else {
        for (auto& p : pts) {
          p.first += 0.05 * normal();
          p.second += 0.02 * normal();
        }
      }
      e.samples.push_back(from_points(pts));
    }
    const AggregatedTrajectory agg = aggregate(e, 1e-6);
    for (size_t k = 0; k < steps; ++k) {
      double mx = 0.0, my = 0.0;
      for (const Trajectory& t : e.samples) {
        mx += t.waypoints[k].x;
        my += t.waypoints[k].y;
      }
      mx /= (double)n;
      my /= (double)n;
      agg_error += std::hypot(agg.trajectory.waypoints[k].x - gt[k].first,
                              agg.trajectory.waypoints[k].y - gt[k].second);
      mean_error += std::hypot(mx - gt[k].first, my - gt[k].second);
    }
  }
  CHECK(agg_error < mean_error);
}
