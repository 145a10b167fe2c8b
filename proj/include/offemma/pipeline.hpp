#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "offemma/consistency.hpp"
#include "offemma/dataset.hpp"
#include "offemma/metrics.hpp"
#include "offemma/visual_prompt.hpp"
#include "offemma/vlm_backend.hpp"

namespace offemma::pipeline {

// Noisy-oracle backend parameters; synthetic_frames > 0 generates that many
// synthetic cases instead of reading a dataset.
struct OracleParams {
  double speed_noise_std = 0.0;
  double curvature_noise_std = 0.0;
  double outlier_prob = 0.0;
  double outlier_scale = 1.0;
  int synthetic_frames = 0;
};

struct RunConfig {
  // dataset
  std::string dataset_root;
  std::string scene;  // scene filter; empty = all scenes

  // backend selection + params
  std::string backend = "oracle";  // http | replay | oracle
  vlm::HttpConfig http;
  std::string fixture_dir;
  OracleParams oracle;

  // sampling & aggregation
  std::string model_id = "offemma-sim";
  int n_paths = 5;
  double epsilon = consistency::kDefaultEpsilon;
  double temperature = 0.7;
  int max_tokens = 1024;

  // rollout & metrics
  double dt = 1.0;
  double horizon = 5.0;  // seconds; must cover the 3 s metric horizon
  int history_len = 5;
  double alpha = visual_prompt::kDefaultAlpha;
  double clearance = metrics::kDefaultClearanceMeters;
  bool overlay_categories = false;
  bool staged_turns = false;
  bool exclude_failed_from_means = false;

  // assets & io
  std::string prompt_dir = "data/prompts";
  std::string class_table = "data/class_table.json";
  std::string cache_dir;  // empty -> OFFEMMA_CACHE_DIR env or memory-only
  std::string output_dir = "out";
  uint64_t seed = 0;

  // concurrency
  int frame_workers = 4;
  int max_in_flight = 4;  // sample fan-out per frame

  int horizon_steps() const { return (int)std::lround(horizon / dt); }

  void validate() const;  // ConfigInvalid
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct RunReport {
  RunConfig config;
  std::vector<metrics::FrameRecord> records;  // sorted by frame_id
  metrics::SummaryReport summary;
  std::vector<dataset::SkippedFrame> skipped;
  std::string digest;
};

// Full evaluation: VP-Block -> prompt -> N-path sampling -> parse ->
// integrate -> CoT-SC aggregate -> metrics. Deterministic for replay and
// oracle backends given the config seed.
RunReport run_eval(const RunConfig& config);

// Runs the sampled ensembles once and scores them twice: single-path
// (sample index 0 only) vs CoT-SC aggregation over all valid samples.
struct PairedReport {
  RunReport single_path;  // method "cot"
  RunReport cot_sc;       // method "cot-sc"
};
PairedReport compare_single_vs_sc(const RunConfig& config);

// Content hash of the evaluation-relevant config and all frame records.
// Transport details (backend kind, latency, cache hits, local paths) are
// excluded so replay and warm-cache http runs over the same responses
// produce the same digest.
std::string run_digest(const RunConfig& config,
                       std::span<const metrics::FrameRecord> records);

nlohmann::json record_to_json(const metrics::FrameRecord& record);
metrics::FrameRecord record_from_json(const nlohmann::json& j);

// Writes frames.jsonl, summary.json, summary.csv and, when obstacle
// results exist, obstacles.csv.
void write_report(const RunReport& report,
                  const std::filesystem::path& out_dir);

std::vector<metrics::FrameRecord> read_frames_jsonl(
    const std::filesystem::path& path);

// Deterministic synthetic cases (and the shared synthetic camera frame)
// for dataset-free oracle runs.
std::vector<dataset::EvalCase> make_synthetic_cases(const RunConfig& config);
void synthetic_frame_asset(ImageU8& image, visual_prompt::LabelMap& map);

// Builds the frame's VLM request exactly as run_eval does: VP-Block
// overlay, legend, four-stage prompt, encoded PNG attachment. Fixture
// digests and stub servers rely on this being the single construction path.
vlm::VlmRequest build_frame_request(const RunConfig& config,
                                    const dataset::EvalCase& eval_case,
                                    const prompting::PromptTemplates& templates,
                                    const visual_prompt::ClassTable& table);

std::unique_ptr<vlm::Backend> make_backend(
    const RunConfig& config, std::shared_ptr<vlm::ResponseCache> cache);

}  // namespace offemma::pipeline
