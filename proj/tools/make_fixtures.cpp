// Regenerates the committed demo fixtures: a 3-frame dataset scene with
// pose log, label maps, obstacle scenarios and gt actions; replay response
// fixtures keyed by request digest; demo run configs; and the frozen
// replay-run digest golden. Deterministic — rerunning must reproduce the
// committed bytes.
//
// Usage: make_fixtures [repo_root]

#include <array>
#include <cmath>
#include <iostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "offemma/dataset.hpp"
#include "offemma/image.hpp"
#include "offemma/kinematics.hpp"
#include "offemma/pipeline.hpp"
#include "offemma/prompting.hpp"
#include "offemma/util.hpp"
#include "offemma/visual_prompt.hpp"
#include "offemma/vlm_backend.hpp"

using namespace offemma;
using nlohmann::json;

namespace {

// 1 Hz piecewise-constant driving plan for the demo scene, t = 0..13 s.
const std::vector<kinematics::VCSample> kPlan = {
    {0.30, 0.00},  {0.32, 0.02},  {0.34, 0.05},  {0.36, 0.08},
    {0.38, 0.05},  {0.40, 0.00},  {0.38, -0.04}, {0.36, -0.08},
    {0.34, -0.05}, {0.32, 0.00},  {0.30, 0.04},  {0.30, 0.08},
    {0.28, 0.04},  {0.28, 0.00},
};

// Exact arc step shared with the integrator's math.
kinematics::TimedPose arc_step(const kinematics::TimedPose& p, double v,
                               double c, double dt) {
  kinematics::TimedPose out;
  out.t = p.t + dt;
  const double h = c * v * dt;
  if (std::fabs(h) < kinematics::kStraightFallbackThreshold) {
    out.x = p.x + v * dt * std::cos(p.yaw);
    out.y = p.y + v * dt * std::sin(p.yaw);
  } else {
    const double half = 0.5 * h;
    const double chord = 2.0 * std::sin(half) / c;
    out.x = p.x + chord * std::cos(p.yaw + half);
    out.y = p.y + chord * std::sin(p.yaw + half);
  }
  out.yaw = p.yaw + h;
  return out;
}

std::vector<kinematics::TimedPose> make_pose_log(double sub_dt) {
  std::vector<kinematics::TimedPose> poses;
  kinematics::TimedPose p{0.0, 0.0, 0.0, 0.0};
  poses.push_back(p);
  const int subs = (int)std::lround(1.0 / sub_dt);
  for (const auto& action : kPlan) {
    for (int s = 0; s < subs; ++s) {
      p = arc_step(p, action.speed, action.curvature, sub_dt);
      poses.push_back(p);
    }
  }
  return poses;
}

// Terrain-like frame: sky band, grass, a tree blob, mud and puddle patches
// whose placement varies per frame.
void make_frame_assets(int frame_index, ImageU8& image,
                       visual_prompt::LabelMap& map) {
  const int width = 64, height = 48;
  map.width = width;
  map.height = height;
  map.labels.assign((size_t)width * height, 3);
  auto label_at = [&](int x, int y) -> uint8_t& {
    return map.labels[(size_t)y * width + x];
  };
  for (int y = 0; y < 14 + frame_index; ++y) {
    for (int x = 0; x < width; ++x) label_at(x, y) = 7;
  }
  const int tree_cx = 14 + 12 * frame_index;
  for (int y = 8; y < 32; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x - tree_cx) / 5.5, dy = (y - 19.0) / 9.5;
      if (dx * dx + dy * dy <= 1.0) label_at(x, y) = 4;
    }
  }
  for (int y = 34; y < 40; ++y) {
    for (int x = 6 + 4 * frame_index; x < 30 + 4 * frame_index; ++x) {
      label_at(x, y) = 33;  // mud
    }
  }
  for (int y = 41; y < 47; ++y) {
    for (int x = 44 - 6 * frame_index; x < 60 - 6 * frame_index; ++x) {
      label_at(x, y) = 31;  // puddle
    }
  }

  image = make_image(width, height);
  auto base_color = [](uint8_t id) -> std::array<int, 3> {
    switch (id) {
      case 7: return {150, 185, 222};
      case 4: return {34, 84, 36};
      case 33: return {112, 82, 52};
      case 31: return {96, 114, 134};
      default: return {76, 112, 58};
    }
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto base = base_color(label_at(x, y));
      uint8_t* px = image.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        uint64_t state =
            (((uint64_t)frame_index * height + y) * width + x) * 3u + ch;
        const int noise = (int)(splitmix64(state) % 23) - 11;
        px[ch] = (uint8_t)std::clamp(base[(size_t)ch] + noise, 0, 255);
      }
    }
  }
}

// Replay text: a plausible four-stage reply ending in the pair list.
std::string make_response_text(const std::vector<kinematics::VCSample>& actions,
                               const std::string& frame_id, int sample) {
  static const char* kSceneLines[] = {
      "Mostly flat grassland with a muddy strip ahead and a tree off the "
      "track; the marked corridor stays clear.",
      "Open grass field; standing water on the right edge of the view and "
      "soft ground in the midfield.",
      "Gently undulating grass with one prominent tree; surface looks firm "
      "along the intended path.",
  };
  std::string text;
  text += "## Step 1: Scene Description\n";
  text += kSceneLines[sample % 3];
  text += "\n\n## Step 2: Object Description\n";
  text += "The tree trunk is the only solid obstacle; it sits outside the "
          "driving corridor for " + frame_id + ". No moving agents.\n\n";
  text += "## Step 3: Intent Description\n";
  text += "Proceed at crawl speed and follow the gentle bend, staying on "
          "grass and off the mud.\n\n";
  text += "## Step 4: Generate Motion\n";
  text += prompting::serialize_samples(actions);
  text += "\n";
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : ".";
  const auto fixtures = root / "data" / "fixtures";
  const auto scene_dir = fixtures / "dataset" / "scenes" / "demo";

  // ---- pose log, manifest, actions, images, label maps
  const auto poses = make_pose_log(0.25);
  std::string pose_text;
  for (const auto& p : poses) {
    pose_text += format_double(p.t) + " " + format_double(p.x) + " " +
                 format_double(p.y) + " " + format_double(p.yaw) + "\n";
  }
  write_file(scene_dir / "poses.txt", pose_text);

  const std::array<int, 3> frame_times = {6, 7, 8};
  std::string manifest;
  std::string actions_tsv;
  for (int i = 0; i < 3; ++i) {
    const int t = frame_times[(size_t)i];
    char frame_id[32];
    std::snprintf(frame_id, sizeof frame_id, "frame_%04d", t);

    ImageU8 image;
    visual_prompt::LabelMap map;
    make_frame_assets(i, image, map);
    const std::string image_rel = std::string("images/") + frame_id + ".png";
    save_png(scene_dir / image_rel, image);

    std::string labelmap_rel;
    if (i == 1) {
      labelmap_rel = std::string("labelmaps/") + frame_id + ".vprl";
      write_file(scene_dir / labelmap_rel, visual_prompt::encode_vprl(map));
    } else {
      labelmap_rel = std::string("labelmaps/") + frame_id + ".png";
      write_file(scene_dir / labelmap_rel,
                 visual_prompt::encode_labelmap_png(map));
    }
    manifest += std::string(frame_id) + "\t" + format_double((double)t) +
                "\t" + image_rel + "\t" + labelmap_rel + "\n";

    actions_tsv += frame_id;
    actions_tsv += "\t";
    for (int k = 0; k < 5; ++k) {
      const auto& a = kPlan[(size_t)(t + k)];
      if (k > 0) actions_tsv += " ";
      actions_tsv += format_double(a.speed) + " " + format_double(a.curvature);
    }
    actions_tsv += "\n";
  }
  write_file(scene_dir / "manifest.tsv", manifest);
  write_file(scene_dir / "actions.tsv", actions_tsv);

  // obstacle scenarios: one per kind, mixed outcomes
  std::string scenarios;
  scenarios += "frame_0006\tstatic\t-\t2.5 2.0 3.5 2.2 3.0 3.0\n";
  scenarios += "frame_0007\tdynamic\t-\t0.5 -0.3 1.2 -0.3 1.2 0.3 0.5 0.3\n";
  scenarios += "frame_0008\tsudden\t2.0\t0.8 -0.7 1.4 -0.7 1.4 -0.3 0.8 -0.3\n";
  write_file(fixtures / "dataset" / "scenarios.txt", scenarios);

  // ---- replay response fixtures keyed by request digest
  pipeline::RunConfig config;
  config.dataset_root = (fixtures / "dataset").string();
  config.scene = "demo";
  config.backend = "replay";
  config.fixture_dir = (fixtures / "replay").string();
  config.model_id = "demo-vlm";
  config.n_paths = 3;
  config.seed = 7;
  config.prompt_dir = (root / "data" / "prompts").string();
  config.class_table = (root / "data" / "class_table.json").string();
  config.output_dir = (root / "out" / "replay_demo").string();

  const auto templates = prompting::PromptTemplates::load(config.prompt_dir);
  const auto table = visual_prompt::ClassTable::load(config.class_table);

  const auto frames = dataset::load_scene(config.dataset_root, "demo");
  const auto pose_log = dataset::load_poses(config.dataset_root, "demo");
  auto cases = dataset::build_cases(
      frames, pose_log, {config.history_len, config.dt, config.horizon});
  dataset::attach_annotations(cases, dataset::load_scenarios(config.dataset_root),
                              dataset::load_actions(config.dataset_root, "demo"));

  json replay_manifest = json::object();
  for (const auto& eval_case : cases.cases) {
    vlm::VlmRequest request =
        pipeline::build_frame_request(config, eval_case, templates, table);
    for (int k = 0; k < config.n_paths; ++k) {
      request.sample_index = k;
      // small per-sample perturbations so aggregation has work to do;
      // sample 2 of frame_0007 answers with an extra pair (truncation path)
      std::vector<kinematics::VCSample> actions = *eval_case.gt_actions;
      for (size_t s = 0; s < actions.size(); ++s) {
        const double sgn = ((s + (size_t)k) % 2 == 0) ? 1.0 : -1.0;
        actions[s].speed =
            std::max(0.0, actions[s].speed + sgn * 0.01 * (double)k);
        actions[s].curvature += -sgn * 0.002 * (double)k;
      }
      if (eval_case.frame.frame_id == "frame_0007" && k == 2) {
        actions.push_back(actions.back());
      }
      const std::string digest = vlm::request_digest(request);
      write_file(fixtures / "replay" / (digest + ".txt"),
                 make_response_text(actions, eval_case.frame.frame_id, k));
      replay_manifest[digest] =
          eval_case.frame.frame_id + " sample " + std::to_string(k);
    }
  }
  write_file(fixtures / "replay" / "manifest.json",
             replay_manifest.dump(2) + "\n");

  // ---- demo configs (paths relative to the repo root)
  const json replay_config = {
      {"dataset_root", "data/fixtures/dataset"},
      {"scene", "demo"},
      {"backend", "replay"},
      {"fixture_dir", "data/fixtures/replay"},
      {"model_id", "demo-vlm"},
      {"n_paths", 3},
      {"seed", 7},
      {"prompt_dir", "data/prompts"},
      {"class_table", "data/class_table.json"},
      {"output_dir", "out/replay_demo"},
  };
  write_file(root / "data" / "configs" / "replay_demo.json",
             replay_config.dump(2) + "\n");
  const json oracle_config = {
      {"backend", "oracle"},
      {"oracle",
       {{"synthetic_frames", 50},
        {"speed_noise_std", 0.2},
        {"curvature_noise_std", 0.02},
        {"outlier_prob", 0.15},
        {"outlier_scale", 5.0}}},
      {"model_id", "offemma-sim"},
      {"n_paths", 5},
      {"seed", 1},
      {"prompt_dir", "data/prompts"},
      {"class_table", "data/class_table.json"},
      {"output_dir", "out/oracle_demo"},
  };
  write_file(root / "data" / "configs" / "oracle_demo.json",
             oracle_config.dump(2) + "\n");

  // ---- frozen golden: the replay run digest
  pipeline::RunConfig golden_config = config;
  const pipeline::RunReport report = pipeline::run_eval(golden_config);
  write_file(root / "data" / "goldens" / "replay_run.digest",
             report.digest + "\n");
  write_file(root / "data" / "goldens" / "replay_summary.csv",
             metrics::summary_csv(report.summary));

  std::cout << "fixtures written under " << fixtures.string() << "\n";
  std::cout << "replay run digest: " << report.digest << "\n";
  return 0;
}
