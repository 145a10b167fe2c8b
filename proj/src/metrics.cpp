#include "offemma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma::metrics {

namespace {

const kinematics::Waypoint& waypoint_at(const kinematics::Trajectory& traj,
                                        double t, int horizon_label) {
  const double index_exact = t / traj.dt;
  const long index = std::lround(index_exact) - 1;
  if (std::fabs(index_exact - std::round(index_exact)) > 1e-9 || index < 0 ||
      (size_t)index >= traj.size()) {
    raise(ErrorCode::HorizonMissing,
          "no waypoint at t=" + std::to_string(horizon_label) + "s");
  }
  return traj.waypoints[(size_t)index];
}

double point_segment_distance(double px, double py, const std::array<double, 2>& a,
                              const std::array<double, 2>& b) {
  const double abx = b[0] - a[0];
  const double aby = b[1] - a[1];
  const double len2 = abx * abx + aby * aby;
  double f = 0.0;
  if (len2 > 0.0) {
    f = std::clamp(((px - a[0]) * abx + (py - a[1]) * aby) / len2, 0.0, 1.0);
  }
  const double cx = a[0] + f * abx;
  const double cy = a[1] + f * aby;
  return std::hypot(px - cx, py - cy);
}

}  // namespace

HorizonErrors l2_errors(const kinematics::Trajectory& pred,
                        const kinematics::Trajectory& gt) {
  HorizonErrors out;
  double* slots[3] = {&out.l2_1s, &out.l2_2s, &out.l2_3s};
  for (int h = 1; h <= 3; ++h) {
    const auto& p = waypoint_at(pred, (double)h, h);
    const auto& g = waypoint_at(gt, (double)h, h);
    *slots[h - 1] = std::hypot(p.x - g.x, p.y - g.y);
  }
  out.l2_avg = (out.l2_1s + out.l2_2s + out.l2_3s) / 3.0;
  return out;
}

bool is_failure(const HorizonErrors& errors) {
  return errors.l2_avg > kFailureThresholdMeters;
}

double polygon_distance(double x, double y,
                        std::span<const std::array<double, 2>> region) {
  if (region.size() < 3) {
    raise(ErrorCode::DegeneratePolygon,
          "polygon needs at least 3 vertices, got " +
              std::to_string(region.size()));
  }
  const size_t n = region.size();
  int sign = 0;
  bool inside = true;
  for (size_t i = 0; i < n; ++i) {
    const auto& a = region[i];
    const auto& b = region[(i + 1) % n];
    const double cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    if (cross != 0.0) {
      const int s = cross > 0.0 ? 1 : -1;
      if (sign == 0) {
        sign = s;
      } else if (s != sign) {
        inside = false;
      }
    }
  }
  if (sign == 0) {
    raise(ErrorCode::DegeneratePolygon, "polygon has zero area");
  }
  if (inside) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    best = std::min(best,
                    point_segment_distance(x, y, region[i], region[(i + 1) % n]));
  }
  return best;
}

bool obstacle_success(const kinematics::Trajectory& pred,
                      const dataset::ObstacleAnnotation& obstacle,
                      double clearance) {
  if (clearance < 0.0) {
    raise(ErrorCode::ConfigInvalid, "clearance must be >= 0");
  }
  if (obstacle.region.size() < 3) {
    raise(ErrorCode::DegeneratePolygon, "obstacle polygon needs >= 3 vertices");
  }
  constexpr double kMaxSpacing = 0.25;  // meters between sampled points

  double prev_x = 0.0, prev_y = 0.0, prev_t = 0.0;  // trajectory origin
  for (const kinematics::Waypoint& w : pred.waypoints) {
    const double seg_len = std::hypot(w.x - prev_x, w.y - prev_y);
    const int pieces = std::max(1, (int)std::ceil(seg_len / kMaxSpacing));
    for (int i = 1; i <= pieces; ++i) {
      const double f = (double)i / (double)pieces;
      const double t = prev_t + f * (w.t - prev_t);
      if (t < obstacle.active_from) continue;
      const double x = prev_x + f * (w.x - prev_x);
      const double y = prev_y + f * (w.y - prev_y);
      if (polygon_distance(x, y, obstacle.region) < clearance) {
        return false;
      }
    }
    prev_x = w.x;
    prev_y = w.y;
    prev_t = w.t;
  }
  return true;
}

SummaryReport summarize(std::span<const FrameRecord> records,
                        const SummarizeOptions& options) {
  if (records.empty()) {
    raise(ErrorCode::EmptyRecords, "no frame records to summarize");
  }

  auto group_key = [&](const FrameRecord& r) -> std::string {
    switch (options.group_by) {
      case GroupBy::Overall: return "all";
      case GroupBy::Scene: return r.scene_id;
      case GroupBy::SceneKind: return r.scene_kind.value_or("all");
    }
    return "all";
  };

  struct Accum {
    GroupSummary summary;
    double sum_1s = 0.0, sum_2s = 0.0, sum_3s = 0.0, sum_avg = 0.0;
    size_t successes = 0;
  };
  std::map<std::string, Accum> groups;  // ordered -> deterministic output

  for (const FrameRecord& r : records) {
    Accum& acc = groups[group_key(r)];
    GroupSummary& g = acc.summary;
    g.method = r.method;
    g.model = r.model;
    ++g.frames;
    if (r.failed) ++g.failures;
    const bool in_means =
        r.has_prediction && std::isfinite(r.errors.l2_avg) &&
        !(options.exclude_failed_from_means && r.failed);
    if (in_means) {
      ++g.evaluated;
      acc.sum_1s += r.errors.l2_1s;
      acc.sum_2s += r.errors.l2_2s;
      acc.sum_3s += r.errors.l2_3s;
      acc.sum_avg += r.errors.l2_avg;
    }
    if (r.obstacle_ok.has_value()) {
      ++g.obstacle_frames;
      if (*r.obstacle_ok) ++acc.successes;
    }
  }

  SummaryReport report;
  for (auto& [key, acc] : groups) {
    GroupSummary& g = acc.summary;
    g.group = key;
    if (g.evaluated > 0) {
      g.mean_l2_1s = acc.sum_1s / (double)g.evaluated;
      g.mean_l2_2s = acc.sum_2s / (double)g.evaluated;
      g.mean_l2_3s = acc.sum_3s / (double)g.evaluated;
      g.mean_l2_avg = acc.sum_avg / (double)g.evaluated;
    }
    g.failure_rate_pct = 100.0 * (double)g.failures / (double)g.frames;
    if (g.obstacle_frames > 0) {
      g.success_rate_pct =
          100.0 * (double)acc.successes / (double)g.obstacle_frames;
    }
    report.groups.push_back(std::move(g));
  }
  return report;
}

std::string summary_csv(const SummaryReport& report) {
  std::string out =
      "Method,Model,L2 1s,L2 2s,L2 3s,L2 Avg,Failure Rate (%)\n";
  for (const GroupSummary& g : report.groups) {
    const std::string method =
        g.group == "all" ? g.method : g.method + " [" + g.group + "]";
    out += method + "," + g.model + "," + format_fixed(g.mean_l2_1s, 2) + "," +
           format_fixed(g.mean_l2_2s, 2) + "," + format_fixed(g.mean_l2_3s, 2) +
           "," + format_fixed(g.mean_l2_avg, 2) + "," +
           format_fixed(g.failure_rate_pct, 2) + "\n";
  }
  return out;
}

std::string obstacle_csv(const SummaryReport& report) {
  std::string out =
      "Model,Scene Type,Success Rate (%),L2 Avg,Failure Rate (%)\n";
  for (const GroupSummary& g : report.groups) {
    if (!g.success_rate_pct.has_value()) continue;
    out += g.model + "," + g.group + "," +
           format_fixed(*g.success_rate_pct, 2) + "," +
           format_fixed(g.mean_l2_avg, 2) + "," +
           format_fixed(g.failure_rate_pct, 2) + "\n";
  }
  return out;
}

}  // namespace offemma::metrics
