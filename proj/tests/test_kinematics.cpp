#include "offemma/kinematics.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

using namespace offemma;
using namespace offemma::kinematics;

namespace {

// closed-form single arc step, straight from the formulas; evaluated in
// long double so the 1/c form stays accurate near the fallback threshold
Waypoint arc_oracle(double theta, double v, double c, double dt) {
  Waypoint w;
  const long double h = (long double)c * v * dt;
  const long double th = theta;
  if (fabsl(h) < 1e-9L) {
    w.x = (double)((long double)v * dt * cosl(th));
    w.y = (double)((long double)v * dt * sinl(th));
  } else {
    w.x = (double)((sinl(th + h) - sinl(th)) / (long double)c);
    w.y = (double)((cosl(th) - cosl(th + h)) / (long double)c);
  }
  w.heading = (double)(th + h);
  return w;
}

std::vector<TimedPose> circle_poses(double radius, double speed, double dt,
                                    int count) {
  std::vector<TimedPose> poses;
  const double omega = speed / radius;
  for (int i = 0; i < count; ++i) {
    const double t = i * dt;
    const double ang = omega * t;
    poses.push_back(TimedPose{t, radius * std::sin(ang),
                              radius * (1.0 - std::cos(ang)), ang});
  }
  return poses;
}

}  // namespace

TEST_CASE("straight line from repeated (0.3, 0.0) pairs") {
  std::vector<VCSample> samples(5, VCSample{0.3, 0.0});
  const Trajectory t = integrate_trajectory(0.0, samples, 1.0);
  REQUIRE(t.size() == 5);
  double expected_x = 0.0;
  for (size_t k = 0; k < 5; ++k) {
    expected_x += 0.3;
    CHECK(t.waypoints[k].x == expected_x);
    CHECK(t.waypoints[k].y == 0.0);
    CHECK(t.waypoints[k].heading == 0.0);
    CHECK(t.waypoints[k].t == (double)(k + 1));
  }
}

TEST_CASE("zero speed is a fixed point with unchanged heading") {
  std::vector<VCSample> samples(3, VCSample{0.0, 0.5});
  const Trajectory t = integrate_trajectory(0.7, samples, 1.0);
  for (const Waypoint& w : t.waypoints) {
    CHECK(w.x == 0.0);
    CHECK(w.y == 0.0);
    CHECK(w.heading == 0.7);
  }
}

TEST_CASE("unit-radius arc single step") {
  const Trajectory t =
      integrate_trajectory(0.0, std::vector<VCSample>{{1.0, 1.0}}, 1.0);
  CHECK(t.waypoints[0].x == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(t.waypoints[0].y ==
        doctest::Approx(1.0 - std::cos(1.0)).epsilon(1e-12));
  CHECK(t.waypoints[0].heading == doctest::Approx(1.0));
}

TEST_CASE("integrator errors") {
  CHECK_THROWS_AS(integrate_trajectory(0.0, std::vector<VCSample>{}, 1.0),
                  Error);
  CHECK_THROWS_AS(
      integrate_trajectory(0.0, std::vector<VCSample>{{1.0, 0.0}}, 0.0), Error);
  CHECK_THROWS_AS(
      integrate_trajectory(0.0, std::vector<VCSample>{{-1.0, 0.0}}, 1.0),
      Error);
  CHECK_THROWS_AS(
      integrate_trajectory(0.0, std::vector<VCSample>{{1.0, NAN}}, 1.0), Error);
}

TEST_CASE("matches the closed-form arc oracle on random steps") {
  uint64_t state = 2024;
  for (int i = 0; i < 2000; ++i) {
    const double v = 10.0 * splitmix_unit(state);
    const double c = -1.0 + 2.0 * splitmix_unit(state);
    const double theta = -3.0 + 6.0 * splitmix_unit(state);
    const Trajectory t =
        integrate_trajectory(theta, std::vector<VCSample>{{v, c}}, 1.0);
    const Waypoint expected = arc_oracle(theta, v, c, 1.0);
    CHECK(std::fabs(t.waypoints[0].x - expected.x) < 1e-9);
    CHECK(std::fabs(t.waypoints[0].y - expected.y) < 1e-9);
    CHECK(std::fabs(t.waypoints[0].heading - expected.heading) < 1e-12);
  }
}

TEST_CASE("rotational equivariance") {
  uint64_t state = 7;
  std::vector<VCSample> samples;
  for (int i = 0; i < 6; ++i) {
    samples.push_back({3.0 * splitmix_unit(state), -0.4 + 0.8 * splitmix_unit(state)});
  }
  const double phi = 1.234;
  const Trajectory base = integrate_trajectory(0.3, samples, 0.5);
  const Trajectory rotated = integrate_trajectory(0.3 + phi, samples, 0.5);
  for (size_t k = 0; k < base.size(); ++k) {
    const double rx = std::cos(phi) * base.waypoints[k].x -
                      std::sin(phi) * base.waypoints[k].y;
    const double ry = std::sin(phi) * base.waypoints[k].x +
                      std::cos(phi) * base.waypoints[k].y;
    CHECK(std::fabs(rotated.waypoints[k].x - rx) < 1e-9);
    CHECK(std::fabs(rotated.waypoints[k].y - ry) < 1e-9);
    CHECK(rotated.waypoints[k].heading ==
          doctest::Approx(base.waypoints[k].heading + phi));
  }
}

TEST_CASE("mirror symmetry under curvature negation") {
  uint64_t state = 99;
  std::vector<VCSample> samples, mirrored;
  for (int i = 0; i < 5; ++i) {
    const double v = 2.0 * splitmix_unit(state);
    const double c = -0.5 + splitmix_unit(state);
    samples.push_back({v, c});
    mirrored.push_back({v, -c});
  }
  const Trajectory a = integrate_trajectory(0.0, samples, 1.0);
  const Trajectory b = integrate_trajectory(0.0, mirrored, 1.0);
  for (size_t k = 0; k < a.size(); ++k) {
    CHECK(a.waypoints[k].x == doctest::Approx(b.waypoints[k].x).epsilon(1e-12));
    CHECK(a.waypoints[k].y == doctest::Approx(-b.waypoints[k].y).epsilon(1e-12));
  }
}

TEST_CASE("chord lengths never exceed commanded arc length") {
  uint64_t state = 5;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<VCSample> samples;
    double arc_total = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double v = 5.0 * splitmix_unit(state);
      samples.push_back({v, -1.0 + 2.0 * splitmix_unit(state)});
      arc_total += v * 1.0;
    }
    const Trajectory t = integrate_trajectory(0.0, samples, 1.0);
    double chord_total = 0.0;
    double px = 0.0, py = 0.0;
    for (const Waypoint& w : t.waypoints) {
      chord_total += std::hypot(w.x - px, w.y - py);
      px = w.x;
      py = w.y;
    }
    CHECK(chord_total <= arc_total + 1e-9);
  }
  // equality iff all curvatures are zero
  std::vector<VCSample> straight(4, VCSample{1.5, 0.0});
  const Trajectory t = integrate_trajectory(0.2, straight, 1.0);
  double chord_total = 0.0;
  double px = 0.0, py = 0.0;
  for (const Waypoint& w : t.waypoints) {
    chord_total += std::hypot(w.x - px, w.y - py);
    px = w.x;
    py = w.y;
  }
  CHECK(chord_total == doctest::Approx(4 * 1.5).epsilon(1e-12));
}

TEST_CASE("straight fallback is continuous at the threshold") {
  // |c*v*dt| lands exactly on the 1e-9 threshold with v*dt = 1
  const double v = 1.0, dt = 1.0;
  for (double theta : {0.0, 0.4, -1.2}) {
    const double c = kStraightFallbackThreshold / (v * dt);
    const Waypoint arc = arc_oracle(theta, v, c, dt);
    Waypoint straight;
    straight.x = v * dt * std::cos(theta);
    straight.y = v * dt * std::sin(theta);
    CHECK(std::fabs(arc.x - straight.x) < 1e-9);
    CHECK(std::fabs(arc.y - straight.y) < 1e-9);
    const Trajectory t =
        integrate_trajectory(theta, std::vector<VCSample>{{v, c}}, dt);
    CHECK(std::fabs(t.waypoints[0].x - arc.x) < 1e-9);
    CHECK(std::fabs(t.waypoints[0].y - arc.y) < 1e-9);
  }
}

TEST_CASE("sub-step refinement reaches the same endpoints") {
  std::vector<VCSample> samples = {{2.0, 0.3}, {1.0, -0.7}, {3.0, 0.05}};
  const Trajectory coarse = integrate_trajectory(0.1, samples, 1.0);
  for (int m : {2, 3, 5, 8}) {
    std::vector<VCSample> fine;
    for (const VCSample& s : samples) {
      for (int i = 0; i < m; ++i) fine.push_back(s);
    }
    const Trajectory refined = integrate_trajectory(0.1, fine, 1.0 / m);
    for (size_t k = 0; k < samples.size(); ++k) {
      const Waypoint& a = coarse.waypoints[k];
      const Waypoint& b = refined.waypoints[(k + 1) * (size_t)m - 1];
      CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
      CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
      CHECK(a.heading == doctest::Approx(b.heading).epsilon(1e-12));
    }
  }
}

TEST_CASE("derive_ego_states on a straight unit-speed line") {
  std::vector<TimedPose> poses = {
      {0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 0.0, 0.0}, {2.0, 2.0, 0.0, 0.0}};
  const auto states = derive_ego_states(poses);
  REQUIRE(states.size() == 2);
  for (const VCSample& s : states) {
    CHECK(s.speed == doctest::Approx(1.0));
    CHECK(s.curvature == 0.0);
  }
}

TEST_CASE("derive_ego_states recovers circle curvature") {
  const auto poses = circle_poses(2.0, 1.0, 1.0, 8);
  const auto states = derive_ego_states(poses);
  for (const VCSample& s : states) {
    CHECK(std::fabs(s.curvature - 0.5) < 0.05);
  }

  // against a fine-step oracle the discretization error shrinks with dt
  const auto fine = circle_poses(2.0, 1.0, 0.01, 200);
  const auto fine_states = derive_ego_states(fine);
  for (const VCSample& s : fine_states) {
    CHECK(std::fabs(s.curvature - 0.5) < 1e-3);
  }
}

TEST_CASE("derive_ego_states applied to the arc generator recovers (v, c)") {
  const double v = 1.8, c = 0.25;
  for (double dt : {0.5, 0.1, 0.02}) {
    std::vector<TimedPose> poses;
    double theta = 0.0, x = 0.0, y = 0.0;
    poses.push_back({0.0, x, y, theta});
    for (int i = 0; i < 20; ++i) {
      const double h = c * v * dt;
      const double half = 0.5 * h;
      x += 2.0 * std::sin(half) * std::cos(theta + half) / c;
      y += 2.0 * std::sin(half) * std::sin(theta + half) / c;
      theta += h;
      poses.push_back({(double)(i + 1) * dt, x, y, theta});
    }
    const auto states = derive_ego_states(poses);
    for (const VCSample& s : states) {
      CHECK(std::fabs(s.speed - v) < v * dt);  // O(dt) chord shortening
      CHECK(std::fabs(s.curvature - c) < 0.1 * dt + 1e-9);
    }
  }
}

TEST_CASE("derive_ego_states precondition violations") {
  CHECK_THROWS_AS(derive_ego_states(std::vector<TimedPose>{{0, 0, 0, 0}}),
                  Error);
  std::vector<TimedPose> bad = {{0, 0, 0, 0}, {0, 1, 0, 0}};
  CHECK_THROWS_AS(derive_ego_states(bad), Error);
}

TEST_CASE("resample_gt on straight world motion") {
  std::vector<TimedPose> poses;
  for (int i = 0; i <= 8; ++i) {
    poses.push_back({(double)i, 2.0 * i, 0.0, 0.0});
  }
  const TimedPose origin{2.0, 4.0, 0.0, 0.0};

  SUBCASE("identity frame") {
    const Trajectory gt = resample_gt(poses, origin, 3.0, 1.0);
    REQUIRE(gt.size() == 3);
    CHECK(gt.waypoints[0].x == doctest::Approx(2.0));
    CHECK(gt.waypoints[1].x == doctest::Approx(4.0));
    CHECK(gt.waypoints[2].x == doctest::Approx(6.0));
    for (const Waypoint& w : gt.waypoints) CHECK(w.y == doctest::Approx(0.0));
  }

  SUBCASE("origin yaw pi/2 rotates into (0, -2k)") {
    TimedPose rotated = origin;
    rotated.yaw = M_PI / 2.0;
    const Trajectory gt = resample_gt(poses, rotated, 3.0, 1.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::fabs(gt.waypoints[(size_t)k].x) < 1e-12);
      CHECK(gt.waypoints[(size_t)k].y ==
            doctest::Approx(-2.0 * (k + 1)).epsilon(1e-12));
    }
  }

  SUBCASE("pose log ending before the horizon") {
    const TimedPose late{6.5, 13.0, 0.0, 0.0};
    CHECK_THROWS_AS(resample_gt(poses, late, 3.0, 1.0), Error);
    try {
      resample_gt(poses, late, 3.0, 1.0);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HorizonNotCovered);
    }
  }
}

TEST_CASE("interpolate_pose takes the shortest yaw path") {
  std::vector<TimedPose> poses = {{0.0, 0.0, 0.0, 3.0},
                                  {1.0, 1.0, 0.0, -3.0}};
  const TimedPose mid = interpolate_pose(poses, 0.5);
  // wrapping through pi, not through zero
  CHECK(std::fabs(std::fabs(mid.yaw) - M_PI) < 0.15);
}
