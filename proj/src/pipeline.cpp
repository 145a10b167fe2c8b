#include "offemma/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "offemma/errors.hpp"
#include "offemma/prompting.hpp"
#include "offemma/util.hpp"

namespace offemma::pipeline {

using nlohmann::json;

namespace {

// ---- strict config parsing -------------------------------------------------

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) {
      raise(ErrorCode::ConfigInvalid,
            "unknown key '" + (scope.empty() ? key : scope + "." + key) + "'");
    }
  }
}

template <typename T>
T get_field(const json& j, const char* key, T fallback,
            const std::string& scope) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    raise(ErrorCode::ConfigInvalid,
          "bad value for key '" + (scope.empty() ? std::string(key)
                                                 : scope + "." + key) + "'");
  }
}

json num_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double num_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

json trajectory_to_json(const kinematics::Trajectory& t) {
  json waypoints = json::array();
  for (const auto& w : t.waypoints) {
    waypoints.push_back({w.t, w.x, w.y, w.heading});
  }
  return {{"dt", t.dt}, {"waypoints", waypoints}};
}

kinematics::Trajectory trajectory_from_json(const json& j) {
  kinematics::Trajectory t;
  t.dt = j.at("dt").get<double>();
  for (const json& w : j.at("waypoints")) {
    t.waypoints.push_back(kinematics::Waypoint{
        w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
        w.at(3).get<double>()});
  }
  return t;
}

json axis_filter_to_json(const consistency::AxisFilter& f) {
  return {{"mean", f.mean}, {"std", f.stddev}, {"retained", f.retained}};
}

consistency::AxisFilter axis_filter_from_json(const json& j) {
  consistency::AxisFilter f;
  f.mean = j.at("mean").get<double>();
  f.stddev = j.at("std").get<double>();
  f.retained = j.at("retained").get<std::vector<size_t>>();
  return f;
}

// ---- per-frame work --------------------------------------------------------

struct FrameWork {
  std::vector<metrics::SampleAudit> audits;
  std::vector<kinematics::Trajectory> members;  // valid, sample_index order
  std::vector<int> member_indices;
};

struct RunContext {
  const RunConfig* config = nullptr;
  prompting::PromptTemplates templates;
  visual_prompt::ClassTable table;
  std::vector<dataset::EvalCase> cases;
  std::vector<dataset::SkippedFrame> skipped;
};

FrameWork process_case(const RunContext& ctx, vlm::Backend& backend,
                       const dataset::EvalCase& eval_case) {
  const RunConfig& cfg = *ctx.config;
  const vlm::VlmRequest request =
      build_frame_request(cfg, eval_case, ctx.templates, ctx.table);

  if (auto* oracle = dynamic_cast<vlm::OracleBackend*>(&backend)) {
    oracle->register_actions(vlm::request_group_digest(request),
                             *eval_case.gt_actions);
  }

  const auto results = backend.sample_n(request, cfg.n_paths, cfg.max_in_flight);

  FrameWork work;
  work.audits.reserve(results.size());
  for (const vlm::SampleResult& r : results) {
    metrics::SampleAudit audit;
    audit.sample_index = r.sample_index;
    if (!r.ok()) {
      audit.error = r.error;
      work.audits.push_back(std::move(audit));
      continue;
    }
    audit.response_text = r.response->text;
    audit.backend = vlm::backend_name(r.response->backend);
    audit.cache_hit = r.response->cache_hit;
    audit.latency_s = r.response->latency_s;
    try {
      prompting::MotionParse parse =
          prompting::parse_motion(audit.response_text, cfg.horizon_steps());
      audit.warnings = parse.warnings;
      audit.trajectory = kinematics::integrate_trajectory(0.0, parse.samples, cfg.dt);
      audit.parse_ok = true;
      work.members.push_back(audit.trajectory);
      work.member_indices.push_back(r.sample_index);
    } catch (const Error& e) {
      audit.error = e.what();
    }
    work.audits.push_back(std::move(audit));
  }
  return work;
}

metrics::FrameRecord make_record(const RunContext& ctx,
                                 const dataset::EvalCase& eval_case,
                                 const FrameWork& work,
                                 const std::string& method,
                                 bool single_sample_only) {
  const RunConfig& cfg = *ctx.config;
  metrics::FrameRecord record;
  record.frame_id = eval_case.frame.frame_id;
  record.scene_id = eval_case.frame.scene_id;
  record.method = method;
  record.model = cfg.model_id;
  record.obstacle = eval_case.obstacle;
  if (eval_case.obstacle) {
    record.scene_kind = dataset::obstacle_kind_name(eval_case.obstacle->kind);
  }
  record.gt = eval_case.gt;
  record.samples = work.audits;

  consistency::TrajectoryEnsemble ensemble;
  for (size_t i = 0; i < work.members.size(); ++i) {
    if (single_sample_only && work.member_indices[i] != 0) continue;
    ensemble.samples.push_back(work.members[i]);
  }
  record.ensemble_size = (int)ensemble.samples.size();

  if (ensemble.samples.empty()) {
    // zero valid parses: counted as a failure with sentinel errors
    const double inf = std::numeric_limits<double>::infinity();
    record.errors = metrics::HorizonErrors{inf, inf, inf, inf};
    record.failed = true;
    return record;
  }

  record.predicted = consistency::aggregate(ensemble, cfg.epsilon);
  record.has_prediction = true;
  record.errors = metrics::l2_errors(record.predicted.trajectory, record.gt);
  record.failed = metrics::is_failure(record.errors);
  if (eval_case.obstacle) {
    record.obstacle_ok = metrics::obstacle_success(
        record.predicted.trajectory, *eval_case.obstacle, cfg.clearance);
  }
  return record;
}

std::vector<FrameWork> process_frames(const RunContext& ctx,
                                      vlm::Backend& backend) {
  const size_t count = ctx.cases.size();
  std::vector<FrameWork> works(count);
  const int workers =
      std::max(1, std::min((int)count, ctx.config->frame_workers));
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) {
      works[i] = process_case(ctx, backend, ctx.cases[i]);
    }
    return works;
  }
  std::atomic<size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count && !abort.load();
           i = next.fetch_add(1)) {
        try {
          works[i] = process_case(ctx, backend, ctx.cases[i]);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          abort.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return works;
}

RunContext build_context(const RunConfig& config) {
  config.validate();
  RunContext ctx;
  ctx.config = &config;
  ctx.templates = prompting::PromptTemplates::load(config.prompt_dir);
  ctx.table = visual_prompt::ClassTable::load(config.class_table);

  if (config.backend == "oracle" && config.oracle.synthetic_frames > 0) {
    ctx.cases = make_synthetic_cases(config);
  } else {
    const std::filesystem::path root = config.dataset_root;
    std::vector<std::string> scenes = dataset::list_scenes(root);
    if (!config.scene.empty()) {
      if (std::find(scenes.begin(), scenes.end(), config.scene) ==
          scenes.end()) {
        raise(ErrorCode::EmptyResult,
              "scene filter '" + config.scene + "' matched nothing");
      }
      scenes = {config.scene};
    }
    if (scenes.empty()) {
      raise(ErrorCode::EmptyResult, "dataset has no scenes");
    }
    std::vector<dataset::ObstacleAnnotation> scenarios;
    if (std::filesystem::exists(root / "scenarios.txt")) {
      scenarios = dataset::load_scenarios(root);
    }
    dataset::CaseParams params{config.history_len, config.dt, config.horizon};
    for (const std::string& scene : scenes) {
      const auto frames = dataset::load_scene(root, scene);
      const auto poses = dataset::load_poses(root, scene);
      dataset::CaseSet set;
      try {
        set = dataset::build_cases(frames, poses, params);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyResult) throw;
        for (const auto& f : frames) {
          ctx.skipped.push_back({f.frame_id, "no pose coverage"});
        }
        continue;
      }
      dataset::attach_annotations(set, scenarios,
                                  dataset::load_actions(root, scene));
      for (auto& c : set.cases) ctx.cases.push_back(std::move(c));
      for (auto& s : set.skipped) ctx.skipped.push_back(std::move(s));
    }
    if (ctx.cases.empty()) {
      raise(ErrorCode::EmptyResult, "no frame had pose coverage");
    }
  }

  if (config.backend == "oracle") {
    for (const auto& c : ctx.cases) {
      if (!c.gt_actions.has_value()) {
        raise(ErrorCode::ConfigInvalid,
              "oracle backend needs gt actions for frame " + c.frame.frame_id +
                  " (actions.tsv or synthetic_frames)");
      }
    }
  }
  return ctx;
}

RunReport assemble_report(const RunContext& ctx,
                          const std::vector<FrameWork>& works,
                          const std::string& method, bool single_sample_only) {
  RunReport report;
  report.config = *ctx.config;
  report.skipped = ctx.skipped;
  report.records.reserve(works.size());
  for (size_t i = 0; i < works.size(); ++i) {
    report.records.push_back(
        make_record(ctx, ctx.cases[i], works[i], method, single_sample_only));
  }
  std::sort(report.records.begin(), report.records.end(),
            [](const metrics::FrameRecord& a, const metrics::FrameRecord& b) {
              return a.frame_id < b.frame_id;
            });
  report.summary = metrics::summarize(
      report.records, {metrics::GroupBy::Overall,
                       ctx.config->exclude_failed_from_means});
  report.digest = run_digest(report.config, report.records);
  return report;
}

}  // namespace

// ---- RunConfig --------------------------------------------------------------

void RunConfig::validate() const {
  if (backend != "http" && backend != "replay" && backend != "oracle") {
    raise(ErrorCode::ConfigInvalid, "backend must be http, replay or oracle");
  }
  if (n_paths < 1) raise(ErrorCode::ConfigInvalid, "n_paths must be >= 1");
  if (!(dt > 0.0)) raise(ErrorCode::ConfigInvalid, "dt must be > 0");
  if (!(horizon >= 3.0)) {
    raise(ErrorCode::ConfigInvalid, "horizon must cover the 3 s metric horizon");
  }
  const double steps = horizon / dt;
  if (std::fabs(steps - std::round(steps)) > 1e-9 || steps < 1.0) {
    raise(ErrorCode::ConfigInvalid, "dt must divide horizon");
  }
  if (history_len < 1) raise(ErrorCode::ConfigInvalid, "history_len must be >= 1");
  if (!(epsilon >= 0.0)) raise(ErrorCode::ConfigInvalid, "epsilon must be >= 0");
  if (!(temperature >= 0.0)) {
    raise(ErrorCode::ConfigInvalid, "temperature must be >= 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    raise(ErrorCode::ConfigInvalid, "alpha must be in [0,1]");
  }
  if (clearance < 0.0) raise(ErrorCode::ConfigInvalid, "clearance must be >= 0");
  if (max_tokens < 1) raise(ErrorCode::ConfigInvalid, "max_tokens must be >= 1");
  if (frame_workers < 1 || max_in_flight < 1) {
    raise(ErrorCode::ConfigInvalid, "worker counts must be >= 1");
  }
  if (oracle.synthetic_frames < 0) {
    raise(ErrorCode::ConfigInvalid, "synthetic_frames must be >= 0");
  }
  if (!(oracle.outlier_prob >= 0.0 && oracle.outlier_prob <= 1.0)) {
    raise(ErrorCode::ConfigInvalid, "outlier_prob must be in [0,1]");
  }
  if (oracle.speed_noise_std < 0.0 || oracle.curvature_noise_std < 0.0) {
    raise(ErrorCode::ConfigInvalid, "noise stds must be >= 0");
  }
  if (backend == "replay" && fixture_dir.empty()) {
    raise(ErrorCode::ConfigInvalid, "replay backend needs fixture_dir");
  }
  if (backend != "oracle" || oracle.synthetic_frames == 0) {
    if (dataset_root.empty()) {
      raise(ErrorCode::ConfigInvalid, "dataset_root is required");
    }
  }
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j,
             {"dataset_root", "scene", "backend", "http", "fixture_dir",
              "oracle", "model_id", "n_paths", "epsilon", "temperature",
              "max_tokens", "dt", "horizon", "history_len", "alpha",
              "clearance", "overlay_categories", "staged_turns",
              "exclude_failed_from_means", "prompt_dir", "class_table",
              "cache_dir", "output_dir", "seed", "frame_workers",
              "max_in_flight"},
             "");
  c.dataset_root = get_field<std::string>(j, "dataset_root", c.dataset_root, "");
  c.scene = get_field<std::string>(j, "scene", c.scene, "");
  c.backend = get_field<std::string>(j, "backend", c.backend, "");
  c.fixture_dir = get_field<std::string>(j, "fixture_dir", c.fixture_dir, "");
  c.model_id = get_field<std::string>(j, "model_id", c.model_id, "");
  c.n_paths = get_field<int>(j, "n_paths", c.n_paths, "");
  c.epsilon = get_field<double>(j, "epsilon", c.epsilon, "");
  c.temperature = get_field<double>(j, "temperature", c.temperature, "");
  c.max_tokens = get_field<int>(j, "max_tokens", c.max_tokens, "");
  c.dt = get_field<double>(j, "dt", c.dt, "");
  c.horizon = get_field<double>(j, "horizon", c.horizon, "");
  c.history_len = get_field<int>(j, "history_len", c.history_len, "");
  c.alpha = get_field<double>(j, "alpha", c.alpha, "");
  c.clearance = get_field<double>(j, "clearance", c.clearance, "");
  c.overlay_categories =
      get_field<bool>(j, "overlay_categories", c.overlay_categories, "");
  c.staged_turns = get_field<bool>(j, "staged_turns", c.staged_turns, "");
  c.exclude_failed_from_means = get_field<bool>(
      j, "exclude_failed_from_means", c.exclude_failed_from_means, "");
  c.prompt_dir = get_field<std::string>(j, "prompt_dir", c.prompt_dir, "");
  c.class_table = get_field<std::string>(j, "class_table", c.class_table, "");
  c.cache_dir = get_field<std::string>(j, "cache_dir", c.cache_dir, "");
  c.output_dir = get_field<std::string>(j, "output_dir", c.output_dir, "");
  c.seed = get_field<uint64_t>(j, "seed", c.seed, "");
  c.frame_workers = get_field<int>(j, "frame_workers", c.frame_workers, "");
  c.max_in_flight = get_field<int>(j, "max_in_flight", c.max_in_flight, "");
  if (j.contains("http")) {
    const json& h = j.at("http");
    check_keys(h,
               {"url", "api_key", "timeout_s", "max_retries",
                "backoff_initial_s", "backoff_cap_s"},
               "http");
    c.http.url = get_field<std::string>(h, "url", c.http.url, "http");
    c.http.api_key = get_field<std::string>(h, "api_key", c.http.api_key, "http");
    c.http.timeout_s = get_field<double>(h, "timeout_s", c.http.timeout_s, "http");
    c.http.max_retries =
        get_field<int>(h, "max_retries", c.http.max_retries, "http");
    c.http.backoff_initial_s = get_field<double>(h, "backoff_initial_s",
                                                 c.http.backoff_initial_s, "http");
    c.http.backoff_cap_s =
        get_field<double>(h, "backoff_cap_s", c.http.backoff_cap_s, "http");
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    check_keys(o,
               {"speed_noise_std", "curvature_noise_std", "outlier_prob",
                "outlier_scale", "synthetic_frames"},
               "oracle");
    c.oracle.speed_noise_std = get_field<double>(
        o, "speed_noise_std", c.oracle.speed_noise_std, "oracle");
    c.oracle.curvature_noise_std = get_field<double>(
        o, "curvature_noise_std", c.oracle.curvature_noise_std, "oracle");
    c.oracle.outlier_prob =
        get_field<double>(o, "outlier_prob", c.oracle.outlier_prob, "oracle");
    c.oracle.outlier_scale =
        get_field<double>(o, "outlier_scale", c.oracle.outlier_scale, "oracle");
    c.oracle.synthetic_frames = get_field<int>(o, "synthetic_frames",
                                               c.oracle.synthetic_frames, "oracle");
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::ConfigInvalid, "config file not found: " + path.string());
  }
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigInvalid,
          path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  return {
      {"dataset_root", dataset_root},
      {"scene", scene},
      {"backend", backend},
      {"http",
       {{"url", http.url},
        {"timeout_s", http.timeout_s},
        {"max_retries", http.max_retries},
        {"backoff_initial_s", http.backoff_initial_s},
        {"backoff_cap_s", http.backoff_cap_s}}},
      {"fixture_dir", fixture_dir},
      {"oracle",
       {{"speed_noise_std", oracle.speed_noise_std},
        {"curvature_noise_std", oracle.curvature_noise_std},
        {"outlier_prob", oracle.outlier_prob},
        {"outlier_scale", oracle.outlier_scale},
        {"synthetic_frames", oracle.synthetic_frames}}},
      {"model_id", model_id},
      {"n_paths", n_paths},
      {"epsilon", epsilon},
      {"temperature", temperature},
      {"max_tokens", max_tokens},
      {"dt", dt},
      {"horizon", horizon},
      {"history_len", history_len},
      {"alpha", alpha},
      {"clearance", clearance},
      {"overlay_categories", overlay_categories},
      {"staged_turns", staged_turns},
      {"exclude_failed_from_means", exclude_failed_from_means},
      {"prompt_dir", prompt_dir},
      {"class_table", class_table},
      {"cache_dir", cache_dir},
      {"output_dir", output_dir},
      {"seed", seed},
      {"frame_workers", frame_workers},
      {"max_in_flight", max_in_flight},
  };
}

// ---- synthetic cases ---------------------------------------------------------

void synthetic_frame_asset(ImageU8& image, visual_prompt::LabelMap& map) {
  const int width = 64, height = 48;
  map.width = width;
  map.height = height;
  map.labels.assign((size_t)width * height, 3);  // grass
  image = make_image(width, height);

  auto label_at = [&](int x, int y) -> uint8_t& {
    return map.labels[(size_t)y * width + x];
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (y < 16) label_at(x, y) = 7;  // sky
    }
  }
  // tree blob on the right, mud band, puddle patch
  for (int y = 10; y < 30; ++y) {
    for (int x = 46; x < 58; ++x) {
      const double dx = (x - 52) / 6.0, dy = (y - 20) / 10.0;
      if (dx * dx + dy * dy <= 1.0) label_at(x, y) = 4;
    }
  }
  for (int y = 36; y < 42; ++y) {
    for (int x = 10; x < 34; ++x) label_at(x, y) = 33;
  }
  for (int y = 42; y < 47; ++y) {
    for (int x = 40; x < 56; ++x) label_at(x, y) = 31;
  }

  auto base_color = [](uint8_t id) -> std::array<int, 3> {
    switch (id) {
      case 7: return {140, 180, 220};   // sky
      case 4: return {30, 80, 30};      // tree
      case 33: return {110, 80, 50};    // mud
      case 31: return {90, 110, 130};   // puddle
      default: return {70, 110, 60};    // grass
    }
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto base = base_color(label_at(x, y));
      uint64_t h = ((uint64_t)y << 32) | (uint64_t)(uint32_t)x;
      uint8_t* px = image.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        uint64_t state = h * 3 + (uint64_t)ch + 0x51ed270b;
        const int noise = (int)(splitmix64(state) % 25) - 12;
        px[ch] = (uint8_t)std::clamp(base[(size_t)ch] + noise, 0, 255);
      }
    }
  }
}

std::vector<dataset::EvalCase> make_synthetic_cases(const RunConfig& config) {
  uint64_t state = mix_seed(config.seed, "synthetic-cases");
  const int steps = config.horizon_steps();
  std::vector<dataset::EvalCase> cases;
  cases.reserve((size_t)config.oracle.synthetic_frames);
  for (int i = 0; i < config.oracle.synthetic_frames; ++i) {
    // slow off-road crawl speeds; gentle curvatures
    const double base_speed = 0.05 + 0.20 * splitmix_unit(state);
    const double base_curv = -0.15 + 0.30 * splitmix_unit(state);

    std::vector<kinematics::VCSample> actions;
    actions.reserve((size_t)steps);
    for (int k = 0; k < steps; ++k) {
      actions.push_back(kinematics::VCSample{
          base_speed * (0.8 + 0.4 * splitmix_unit(state)),
          base_curv * (0.8 + 0.4 * splitmix_unit(state))});
    }

    dataset::EvalCase c;
    char frame_id[32];
    std::snprintf(frame_id, sizeof frame_id, "synthetic_%05d", i);
    c.frame.frame_id = frame_id;
    c.frame.scene_id = "synthetic";
    c.frame.timestamp = (double)i;
    c.ego_history.dt = config.dt;
    for (int k = 0; k < config.history_len; ++k) {
      c.ego_history.states.push_back(kinematics::VCSample{
          std::max(0.0, base_speed * (0.8 + 0.4 * splitmix_unit(state))),
          base_curv * (0.8 + 0.4 * splitmix_unit(state))});
    }
    c.gt = kinematics::integrate_trajectory(0.0, actions, config.dt);
    c.gt_actions = std::move(actions);
    cases.push_back(std::move(c));
  }
  return cases;
}

vlm::VlmRequest build_frame_request(const RunConfig& config,
                                    const dataset::EvalCase& eval_case,
                                    const prompting::PromptTemplates& templates,
                                    const visual_prompt::ClassTable& table) {
  ImageU8 image;
  visual_prompt::LabelMap map;
  if (eval_case.frame.image_path.empty()) {
    synthetic_frame_asset(image, map);
  } else {
    image = load_image(eval_case.frame.image_path);
    map = visual_prompt::load_labelmap(eval_case.frame.labelmap_path);
  }
  if (config.overlay_categories) {
    map = visual_prompt::consolidate_labels(map, table);
  }
  const visual_prompt::Legend legend = visual_prompt::build_legend(map, table);
  const visual_prompt::AnnotatedImage annotated =
      visual_prompt::overlay(image, map, table, config.alpha);

  prompting::PromptBundle bundle = prompting::build_prompt(
      templates, eval_case.ego_history, legend, config.horizon_steps());
  bundle.image_ref = eval_case.frame.image_path.empty()
                         ? eval_case.frame.frame_id
                         : eval_case.frame.image_path.string();
  bundle.staged_turns = config.staged_turns;

  vlm::VlmRequest request;
  request.model_id = config.model_id;
  request.prompt = std::move(bundle);
  request.image = encode_png(annotated.pixels);
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  return request;
}

std::unique_ptr<vlm::Backend> make_backend(
    const RunConfig& config, std::shared_ptr<vlm::ResponseCache> cache) {
  if (!cache) {
    std::string dir = config.cache_dir;
    if (dir.empty()) {
      if (const char* env = std::getenv("OFFEMMA_CACHE_DIR")) dir = env;
    }
    cache = dir.empty() ? std::make_shared<vlm::ResponseCache>()
                        : std::make_shared<vlm::ResponseCache>(dir);
  }
  if (config.backend == "http") {
    return std::make_unique<vlm::HttpBackend>(config.http, cache);
  }
  if (config.backend == "replay") {
    return std::make_unique<vlm::ReplayBackend>(config.fixture_dir, cache);
  }
  if (config.backend == "oracle") {
    vlm::OracleConfig oc;
    oc.speed_noise_std = config.oracle.speed_noise_std;
    oc.curvature_noise_std = config.oracle.curvature_noise_std;
    oc.outlier_prob = config.oracle.outlier_prob;
    oc.outlier_scale = config.oracle.outlier_scale;
    oc.seed = config.seed;
    return std::make_unique<vlm::OracleBackend>(std::move(oc), cache);
  }
  raise(ErrorCode::ConfigInvalid, "unknown backend '" + config.backend + "'");
}

// ---- runs --------------------------------------------------------------------

RunReport run_eval(const RunConfig& config) {
  RunContext ctx = build_context(config);
  auto backend = make_backend(config, nullptr);
  const auto works = process_frames(ctx, *backend);
  const std::string method = config.n_paths > 1 ? "cot-sc" : "cot";
  return assemble_report(ctx, works, method, false);
}

PairedReport compare_single_vs_sc(const RunConfig& config) {
  if (config.backend != "oracle") {
    raise(ErrorCode::ConfigInvalid,
          "compare_single_vs_sc needs the oracle backend");
  }
  RunContext ctx = build_context(config);
  auto backend = make_backend(config, nullptr);
  const auto works = process_frames(ctx, *backend);
  PairedReport out;
  out.single_path = assemble_report(ctx, works, "cot", true);
  out.cot_sc = assemble_report(ctx, works, "cot-sc", false);
  return out;
}

// ---- reports -----------------------------------------------------------------

std::string run_digest(const RunConfig& config,
                       std::span<const metrics::FrameRecord> records) {
  json payload;
  payload["version"] = "offemma-run-v1";
  payload["config"] = {
      {"scene", config.scene},
      {"model_id", config.model_id},
      {"n_paths", config.n_paths},
      {"epsilon", config.epsilon},
      {"temperature", config.temperature},
      {"max_tokens", config.max_tokens},
      {"dt", config.dt},
      {"horizon", config.horizon},
      {"history_len", config.history_len},
      {"alpha", config.alpha},
      {"clearance", config.clearance},
      {"overlay_categories", config.overlay_categories},
      {"staged_turns", config.staged_turns},
      {"exclude_failed_from_means", config.exclude_failed_from_means},
      {"seed", config.seed},
      {"oracle",
       {{"speed_noise_std", config.oracle.speed_noise_std},
        {"curvature_noise_std", config.oracle.curvature_noise_std},
        {"outlier_prob", config.oracle.outlier_prob},
        {"outlier_scale", config.oracle.outlier_scale},
        {"synthetic_frames", config.oracle.synthetic_frames}}},
  };
  json frames = json::array();
  for (const metrics::FrameRecord& r : records) {
    json responses = json::array();
    for (const metrics::SampleAudit& a : r.samples) {
      responses.push_back({{"i", a.sample_index},
                           {"text", a.response_text},
                           {"parse_ok", a.parse_ok},
                           {"warnings", a.warnings}});
    }
    json rec = {
        {"frame_id", r.frame_id},
        {"scene_id", r.scene_id},
        {"method", r.method},
        {"responses", responses},
        {"ensemble_size", r.ensemble_size},
        {"has_prediction", r.has_prediction},
        {"errors",
         {num_or_null(r.errors.l2_1s), num_or_null(r.errors.l2_2s),
          num_or_null(r.errors.l2_3s), num_or_null(r.errors.l2_avg)}},
        {"failed", r.failed},
        {"gt", trajectory_to_json(r.gt)},
    };
    rec["predicted"] = r.has_prediction
                           ? trajectory_to_json(r.predicted.trajectory)
                           : json(nullptr);
    rec["obstacle_ok"] =
        r.obstacle_ok.has_value() ? json(*r.obstacle_ok) : json(nullptr);
    frames.push_back(std::move(rec));
  }
  payload["records"] = std::move(frames);
  return sha256_hex(payload.dump());
}

json record_to_json(const metrics::FrameRecord& r) {
  json samples = json::array();
  for (const metrics::SampleAudit& a : r.samples) {
    json s = {
        {"sample_index", a.sample_index}, {"response_text", a.response_text},
        {"backend", a.backend},           {"cache_hit", a.cache_hit},
        {"latency_s", a.latency_s},       {"parse_ok", a.parse_ok},
        {"error", a.error},               {"warnings", a.warnings},
    };
    s["trajectory"] =
        a.parse_ok ? trajectory_to_json(a.trajectory) : json(nullptr);
    samples.push_back(std::move(s));
  }
  json j = {
      {"frame_id", r.frame_id},
      {"scene_id", r.scene_id},
      {"method", r.method},
      {"model", r.model},
      {"scene_kind", r.scene_kind ? json(*r.scene_kind) : json(nullptr)},
      {"has_prediction", r.has_prediction},
      {"ensemble_size", r.ensemble_size},
      {"errors",
       {{"l2_1s", num_or_null(r.errors.l2_1s)},
        {"l2_2s", num_or_null(r.errors.l2_2s)},
        {"l2_3s", num_or_null(r.errors.l2_3s)},
        {"l2_avg", num_or_null(r.errors.l2_avg)}}},
      {"failed", r.failed},
      {"gt", trajectory_to_json(r.gt)},
      {"samples", samples},
  };
  if (r.has_prediction) {
    json provenance = json::array();
    for (const auto& step : r.predicted.provenance.steps) {
      provenance.push_back({{"x", axis_filter_to_json(step.x)},
                            {"y", axis_filter_to_json(step.y)}});
    }
    j["predicted"] = {{"trajectory", trajectory_to_json(r.predicted.trajectory)},
                      {"provenance", provenance}};
  } else {
    j["predicted"] = nullptr;
  }
  if (r.obstacle) {
    json region = json::array();
    for (const auto& v : r.obstacle->region) region.push_back({v[0], v[1]});
    j["obstacle"] = {{"frame_id", r.obstacle->frame_id},
                     {"kind", dataset::obstacle_kind_name(r.obstacle->kind)},
                     {"active_from", r.obstacle->active_from},
                     {"region", region}};
  } else {
    j["obstacle"] = nullptr;
  }
  j["obstacle_ok"] =
      r.obstacle_ok.has_value() ? json(*r.obstacle_ok) : json(nullptr);
  return j;
}

metrics::FrameRecord record_from_json(const json& j) {
  metrics::FrameRecord r;
  r.frame_id = j.at("frame_id").get<std::string>();
  r.scene_id = j.value("scene_id", "");
  r.method = j.value("method", "");
  r.model = j.value("model", "");
  if (j.contains("scene_kind") && !j.at("scene_kind").is_null()) {
    r.scene_kind = j.at("scene_kind").get<std::string>();
  }
  r.has_prediction = j.at("has_prediction").get<bool>();
  r.ensemble_size = j.at("ensemble_size").get<int>();
  const json& e = j.at("errors");
  r.errors.l2_1s = num_from(e.at("l2_1s"));
  r.errors.l2_2s = num_from(e.at("l2_2s"));
  r.errors.l2_3s = num_from(e.at("l2_3s"));
  r.errors.l2_avg = num_from(e.at("l2_avg"));
  r.failed = j.at("failed").get<bool>();
  r.gt = trajectory_from_json(j.at("gt"));
  if (r.has_prediction) {
    const json& p = j.at("predicted");
    r.predicted.trajectory = trajectory_from_json(p.at("trajectory"));
    for (const json& step : p.at("provenance")) {
      consistency::TimestepStats stats;
      stats.x = axis_filter_from_json(step.at("x"));
      stats.y = axis_filter_from_json(step.at("y"));
      r.predicted.provenance.steps.push_back(std::move(stats));
    }
  }
  if (j.contains("obstacle") && !j.at("obstacle").is_null()) {
    const json& o = j.at("obstacle");
    dataset::ObstacleAnnotation a;
    a.frame_id = o.at("frame_id").get<std::string>();
    a.kind = dataset::obstacle_kind_from_name(o.at("kind").get<std::string>());
    a.active_from = o.at("active_from").get<double>();
    for (const json& v : o.at("region")) {
      a.region.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    r.obstacle = std::move(a);
  }
  if (j.contains("obstacle_ok") && !j.at("obstacle_ok").is_null()) {
    r.obstacle_ok = j.at("obstacle_ok").get<bool>();
  }
  for (const json& s : j.at("samples")) {
    metrics::SampleAudit a;
    a.sample_index = s.at("sample_index").get<int>();
    a.response_text = s.at("response_text").get<std::string>();
    a.backend = s.value("backend", "");
    a.cache_hit = s.value("cache_hit", false);
    a.latency_s = s.value("latency_s", 0.0);
    a.parse_ok = s.at("parse_ok").get<bool>();
    a.error = s.value("error", "");
    a.warnings = s.value("warnings", std::vector<std::string>{});
    if (a.parse_ok) a.trajectory = trajectory_from_json(s.at("trajectory"));
    r.samples.push_back(std::move(a));
  }
  return r;
}

void write_report(const RunReport& report,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::string jsonl;
  for (const metrics::FrameRecord& r : report.records) {
    jsonl += record_to_json(r).dump();
    jsonl += '\n';
  }
  write_file(out_dir / "frames.jsonl", jsonl);

  json skipped = json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"frame_id", s.frame_id}, {"reason", s.reason}});
  }
  json groups = json::array();
  for (const auto& g : report.summary.groups) {
    json gj = {{"method", g.method},
               {"model", g.model},
               {"group", g.group},
               {"frames", g.frames},
               {"evaluated", g.evaluated},
               {"failures", g.failures},
               {"mean_l2_1s", g.mean_l2_1s},
               {"mean_l2_2s", g.mean_l2_2s},
               {"mean_l2_3s", g.mean_l2_3s},
               {"mean_l2_avg", g.mean_l2_avg},
               {"failure_rate_pct", g.failure_rate_pct},
               {"obstacle_frames", g.obstacle_frames}};
    gj["success_rate_pct"] =
        g.success_rate_pct ? json(*g.success_rate_pct) : json(nullptr);
    groups.push_back(std::move(gj));
  }
  const json summary = {{"config", report.config.to_json()},
                        {"digest", report.digest},
                        {"groups", groups},
                        {"skipped", skipped}};
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  write_file(out_dir / "summary.csv", metrics::summary_csv(report.summary));

  const bool any_obstacle =
      std::any_of(report.records.begin(), report.records.end(),
                  [](const auto& r) { return r.obstacle_ok.has_value(); });
  if (any_obstacle) {
    const auto by_kind = metrics::summarize(
        report.records, {metrics::GroupBy::SceneKind,
                         report.config.exclude_failed_from_means});
    write_file(out_dir / "obstacles.csv", metrics::obstacle_csv(by_kind));
  }
}

std::vector<metrics::FrameRecord> read_frames_jsonl(
    const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  std::istringstream in(read_file(path));
  std::vector<metrics::FrameRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      raise(ErrorCode::IoError,
            path.string() + ": bad frame record: " + e.what());
    }
  }
  return records;
}

}  // namespace offemma::pipeline
