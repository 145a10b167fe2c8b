#include "offemma/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma::dataset {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_num(const std::string& token, const std::string& context) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    raise(ErrorCode::MalformedScenario,
          context + ": expected a number, got '" + token + "'");
  }
  return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

// Signed area times two; also rejects self-intersection for convex input.
void validate_polygon(const std::vector<std::array<double, 2>>& region,
                      const std::string& context) {
  if (region.size() < 3) {
    raise(ErrorCode::MalformedScenario,
          context + ": polygon needs at least 3 vertices");
  }
  const size_t n = region.size();
  int sign = 0;
  double area2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto& a = region[i];
    const auto& b = region[(i + 1) % n];
    const auto& c = region[(i + 2) % n];
    const double cross =
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    if (cross != 0.0) {
      const int s = cross > 0.0 ? 1 : -1;
      if (sign == 0) {
        sign = s;
      } else if (s != sign) {
        raise(ErrorCode::MalformedScenario,
              context + ": polygon must be convex and non-self-intersecting");
      }
    }
    area2 += a[0] * b[1] - b[0] * a[1];
  }
  if (sign == 0 || area2 == 0.0) {
    raise(ErrorCode::MalformedScenario, context + ": polygon is degenerate");
  }
}

}  // namespace

const char* obstacle_kind_name(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::Static: return "static";
    case ObstacleKind::Dynamic: return "dynamic";
    case ObstacleKind::Sudden: return "sudden";
  }
  return "unknown";
}

ObstacleKind obstacle_kind_from_name(const std::string& name) {
  if (name == "static") return ObstacleKind::Static;
  if (name == "dynamic") return ObstacleKind::Dynamic;
  if (name == "sudden") return ObstacleKind::Sudden;
  raise(ErrorCode::MalformedScenario, "unknown obstacle kind '" + name + "'");
}

std::vector<std::string> list_scenes(const std::filesystem::path& root) {
  const auto scenes_dir = root / "scenes";
  if (!std::filesystem::is_directory(scenes_dir)) {
    raise(ErrorCode::MissingManifest,
          "no scenes directory under " + root.string());
  }
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(scenes_dir)) {
    if (entry.is_directory() &&
        std::filesystem::exists(entry.path() / "manifest.tsv")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Frame> load_scene(const std::filesystem::path& root,
                              const std::string& scene_id) {
  const auto scene_dir = root / "scenes" / scene_id;
  const auto manifest = scene_dir / "manifest.tsv";
  if (!std::filesystem::exists(manifest)) {
    raise(ErrorCode::MissingManifest, manifest.string());
  }
  std::vector<Frame> frames;
  for (const std::string& line : read_lines(manifest)) {
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      raise(ErrorCode::MissingManifest,
            manifest.string() + ": expected 4 tab-separated fields, got " +
                std::to_string(fields.size()));
    }
    Frame f;
    f.frame_id = fields[0];
    f.timestamp = parse_num(fields[1], "manifest timestamp");
    f.image_path = scene_dir / fields[2];
    f.labelmap_path = scene_dir / fields[3];
    f.scene_id = scene_id;
    if (!std::filesystem::exists(f.image_path)) {
      raise(ErrorCode::MissingFile, f.image_path.string());
    }
    if (!std::filesystem::exists(f.labelmap_path)) {
      raise(ErrorCode::MissingFile, f.labelmap_path.string());
    }
    frames.push_back(std::move(f));
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const Frame& a, const Frame& b) {
                     return a.timestamp < b.timestamp;
                   });
  for (size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      raise(ErrorCode::NonMonotonicTimestamps,
            scene_id + ": frames " + frames[i - 1].frame_id + " and " +
                frames[i].frame_id + " share timestamp");
    }
  }
  return frames;
}

std::vector<TimedPose> load_poses(const std::filesystem::path& root,
                                  const std::string& scene_id) {
  const auto path = root / "scenes" / scene_id / "poses.txt";
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  std::vector<TimedPose> poses;
  for (const std::string& line : read_lines(path)) {
    std::istringstream ss(line);
    TimedPose p;
    if (!(ss >> p.t >> p.x >> p.y >> p.yaw)) {
      raise(ErrorCode::MissingFile,
            path.string() + ": malformed pose line '" + line + "'");
    }
    poses.push_back(p);
  }
  for (size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].t > poses[i - 1].t)) {
      raise(ErrorCode::NonMonotonicTimestamps,
            path.string() + " at line " + std::to_string(i + 1));
    }
  }
  return poses;
}

std::vector<ObstacleAnnotation> load_scenarios(
    const std::filesystem::path& root) {
  const auto path = root / "scenarios.txt";
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  std::vector<ObstacleAnnotation> out;
  size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    const std::string context = path.string() + ":" + std::to_string(line_no);
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      raise(ErrorCode::MalformedScenario,
            context + ": expected frame_id, kind, active_from, vertices");
    }
    ObstacleAnnotation a;
    a.frame_id = fields[0];
    a.kind = obstacle_kind_from_name(fields[1]);
    if (fields[2] == "-") {
      if (a.kind == ObstacleKind::Sudden) {
        raise(ErrorCode::MalformedScenario,
              context + ": sudden obstacles need active_from");
      }
      a.active_from = 0.0;
    } else {
      a.active_from = parse_num(fields[2], context + " active_from");
      if (a.active_from < 0.0) {
        raise(ErrorCode::MalformedScenario,
              context + ": active_from must be >= 0");
      }
    }
    std::istringstream ss(fields[3]);
    double x, y;
    while (ss >> x >> y) {
      a.region.push_back({x, y});
    }
    if (!ss.eof()) {
      raise(ErrorCode::MalformedScenario, context + ": malformed vertex list");
    }
    validate_polygon(a.region, context);
    out.push_back(std::move(a));
  }
  return out;
}

std::map<std::string, std::vector<VCSample>> load_actions(
    const std::filesystem::path& root, const std::string& scene_id) {
  const auto path = root / "scenes" / scene_id / "actions.tsv";
  std::map<std::string, std::vector<VCSample>> out;
  if (!std::filesystem::exists(path)) return out;
  for (const std::string& line : read_lines(path)) {
    const auto fields = split(line, '\t');
    if (fields.size() != 2) {
      raise(ErrorCode::MalformedScenario,
            path.string() + ": expected frame_id <TAB> v0 c0 v1 c1 ...");
    }
    std::istringstream ss(fields[1]);
    std::vector<VCSample> actions;
    double v, c;
    while (ss >> v >> c) {
      actions.push_back(VCSample{v, c});
    }
    if (actions.empty() || !ss.eof()) {
      raise(ErrorCode::MalformedScenario,
            path.string() + ": malformed action list for " + fields[0]);
    }
    out[fields[0]] = std::move(actions);
  }
  return out;
}

CaseSet build_cases(std::span<const Frame> frames,
                    std::span<const TimedPose> poses,
                    const CaseParams& params) {
  if (params.history_len < 1 || !(params.dt > 0.0) || !(params.horizon > 0.0)) {
    raise(ErrorCode::ConfigInvalid, "history_len, dt and horizon must be positive");
  }
  CaseSet out;
  for (const Frame& frame : frames) {
    const double t0 = frame.timestamp;
    const double past = t0 - params.history_len * params.dt;
    const double future = t0 + params.horizon;
    if (poses.empty() || poses.front().t > past + 1e-9) {
      out.skipped.push_back({frame.frame_id, "insufficient past poses"});
      continue;
    }
    if (poses.back().t < future - 1e-9) {
      out.skipped.push_back({frame.frame_id, "insufficient future poses"});
      continue;
    }

    EvalCase c;
    c.frame = frame;
    const TimedPose origin = kinematics::interpolate_pose(poses, t0);

    std::vector<TimedPose> history_grid;
    history_grid.reserve((size_t)params.history_len + 1);
    for (int k = params.history_len; k >= 0; --k) {
      history_grid.push_back(
          kinematics::interpolate_pose(poses, t0 - (double)k * params.dt));
    }
    c.ego_history.states = kinematics::derive_ego_states(history_grid);
    c.ego_history.dt = params.dt;
    c.gt = kinematics::resample_gt(poses, origin, params.horizon, params.dt);
    out.cases.push_back(std::move(c));
  }
  if (out.cases.empty()) {
    raise(ErrorCode::EmptyResult, "no frame had pose coverage");
  }
  return out;
}

void attach_annotations(
    CaseSet& cases, std::span<const ObstacleAnnotation> scenarios,
    const std::map<std::string, std::vector<VCSample>>& actions) {
  for (EvalCase& c : cases.cases) {
    for (const ObstacleAnnotation& a : scenarios) {
      if (a.frame_id == c.frame.frame_id) {
        c.obstacle = a;
        break;
      }
    }
    auto it = actions.find(c.frame.frame_id);
    if (it != actions.end()) {
      c.gt_actions = it->second;
    }
  }
}

}  // namespace offemma::dataset
