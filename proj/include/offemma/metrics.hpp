#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offemma/consistency.hpp"
#include "offemma/dataset.hpp"
#include "offemma/kinematics.hpp"

namespace offemma::metrics {

inline constexpr double kFailureThresholdMeters = 10.0;
inline constexpr double kDefaultClearanceMeters = 0.5;

struct HorizonErrors {
  double l2_1s = 0.0;
  double l2_2s = 0.0;
  double l2_3s = 0.0;
  double l2_avg = 0.0;  // mean of the three horizon errors
};

// Euclidean distance between pred and gt at t = 1, 2, 3 s. Both
// trajectories must contain those waypoints (dt divides 1 s).
HorizonErrors l2_errors(const kinematics::Trajectory& pred,
                        const kinematics::Trajectory& gt);

// Strict: l2_avg must exceed 10 m; equality is not a failure.
bool is_failure(const HorizonErrors& errors);

// Distance from a point to a convex polygon; 0 inside.
double polygon_distance(double x, double y,
                        std::span<const std::array<double, 2>> region);

// True iff every trajectory point with t >= active_from keeps at least
// `clearance` meters from the polygon. Segments (including origin to the
// first waypoint) are densified at <= 0.25 m spacing.
bool obstacle_success(const kinematics::Trajectory& pred,
                      const dataset::ObstacleAnnotation& obstacle,
                      double clearance);

// Per-frame result with the raw responses and parses kept for audit.
struct SampleAudit {
  int sample_index = 0;
  std::string response_text;
  std::string backend;
  bool cache_hit = false;
  double latency_s = 0.0;
  bool parse_ok = false;
  std::string error;                  // backend or parse failure
  std::vector<std::string> warnings;  // e.g. truncation
  kinematics::Trajectory trajectory;  // integrated member (when parse_ok)
};

struct FrameRecord {
  std::string frame_id;
  std::string scene_id;
  std::string method;
  std::string model;
  std::optional<std::string> scene_kind;  // obstacle kind when annotated
  bool has_prediction = false;
  consistency::AggregatedTrajectory predicted;
  kinematics::Trajectory gt;
  HorizonErrors errors;  // +inf sentinel when no sample parsed
  bool failed = false;
  std::optional<dataset::ObstacleAnnotation> obstacle;
  std::optional<bool> obstacle_ok;
  int ensemble_size = 0;  // valid parses that entered aggregation
  std::vector<SampleAudit> samples;
};

enum class GroupBy { Overall, SceneKind, Scene };

struct GroupSummary {
  std::string method;
  std::string model;
  std::string group;  // "all", scene id, or obstacle kind
  size_t frames = 0;
  size_t evaluated = 0;  // frames entering the L2 means
  size_t failures = 0;
  double mean_l2_1s = 0.0;
  double mean_l2_2s = 0.0;
  double mean_l2_3s = 0.0;
  double mean_l2_avg = 0.0;
  double failure_rate_pct = 0.0;
  size_t obstacle_frames = 0;
  std::optional<double> success_rate_pct;
};

struct SummaryReport {
  std::vector<GroupSummary> groups;
};

struct SummarizeOptions {
  GroupBy group_by = GroupBy::Overall;
  // Frames that failed the 10 m rule stay in the L2 means by default;
  // frames without any prediction never enter them.
  bool exclude_failed_from_means = false;
};

SummaryReport summarize(std::span<const FrameRecord> records,
                        const SummarizeOptions& options);

// CSV mirroring the trajectory-prediction table: Method, Model, L2 1s/2s/3s
// /Avg, Failure Rate (%). Percentages use half-up 2-decimal formatting.
std::string summary_csv(const SummaryReport& report);

// CSV mirroring the obstacle table: Model, Scene Type, Success Rate (%),
// L2 Avg, Failure Rate (%).
std::string obstacle_csv(const SummaryReport& report);

}  // namespace offemma::metrics
