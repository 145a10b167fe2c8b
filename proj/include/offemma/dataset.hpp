#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offemma/kinematics.hpp"
#include "offemma/prompting.hpp"

namespace offemma::dataset {

using kinematics::TimedPose;
using kinematics::VCSample;

// On-disk layout under a dataset root:
//   scenes/<scene_id>/manifest.tsv   frame_id <TAB> timestamp <TAB> image <TAB> labelmap
//   scenes/<scene_id>/poses.txt      t x y yaw, one per line
//   scenes/<scene_id>/actions.tsv    frame_id <TAB> v0 c0 v1 c1 ...   (optional)
//   scenarios.txt                    frame_id <TAB> kind <TAB> active_from|- <TAB> x1 y1 x2 y2 ...
// Paths in manifests are relative to the scene directory.

struct Frame {
  std::string frame_id;
  double timestamp = 0.0;
  std::filesystem::path image_path;
  std::filesystem::path labelmap_path;
  std::string scene_id;
};

enum class ObstacleKind { Static, Dynamic, Sudden };

const char* obstacle_kind_name(ObstacleKind kind);
ObstacleKind obstacle_kind_from_name(const std::string& name);

struct ObstacleAnnotation {
  std::string frame_id;
  ObstacleKind kind = ObstacleKind::Static;
  std::vector<std::array<double, 2>> region;  // ego-frame meters, convex
  double active_from = 0.0;                   // seconds; > 0 only for sudden
};

struct EvalCase {
  Frame frame;
  prompting::EgoHistory ego_history;
  kinematics::Trajectory gt;
  std::optional<ObstacleAnnotation> obstacle;
  // Ground-truth future actions from actions.tsv; consumed by the oracle
  // backend so prompt->respond->parse->integrate can round-trip exactly.
  std::optional<std::vector<VCSample>> gt_actions;
};

std::vector<std::string> list_scenes(const std::filesystem::path& root);

std::vector<Frame> load_scene(const std::filesystem::path& root,
                              const std::string& scene_id);

std::vector<TimedPose> load_poses(const std::filesystem::path& root,
                                  const std::string& scene_id);

std::vector<ObstacleAnnotation> load_scenarios(
    const std::filesystem::path& root);

std::map<std::string, std::vector<VCSample>> load_actions(
    const std::filesystem::path& root, const std::string& scene_id);

struct SkippedFrame {
  std::string frame_id;
  std::string reason;
};

struct CaseSet {
  std::vector<EvalCase> cases;
  std::vector<SkippedFrame> skipped;
};

struct CaseParams {
  int history_len = 5;
  double dt = 1.0;
  double horizon = 5.0;
};

// One EvalCase per frame whose pose log covers
// [t - history_len*dt, t + horizon]; frames without coverage are skipped
// with a reason. Throws EmptyResult when nothing survives.
CaseSet build_cases(std::span<const Frame> frames,
                    std::span<const TimedPose> poses,
                    const CaseParams& params);

// Joins scenario annotations and gt actions onto cases by frame_id.
void attach_annotations(
    CaseSet& cases, std::span<const ObstacleAnnotation> scenarios,
    const std::map<std::string, std::vector<VCSample>>& actions);

}  // namespace offemma::dataset
