// Command-line front end: run evaluations, render VP-Block overlays, plot
// per-frame trajectories, and pretty-print report tables.
//
// Exit codes: 0 ok, 2 usage/input error, 3 backend error, 4 dataset error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include "offemma/errors.hpp"
#include "offemma/image.hpp"
#include "offemma/metrics.hpp"
#include "offemma/pipeline.hpp"
#include "offemma/plot.hpp"
#include "offemma/util.hpp"
#include "offemma/visual_prompt.hpp"

namespace {

using namespace offemma;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;
constexpr int kExitDataset = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EndpointUnreachable:
    case ErrorCode::BadStatus:
    case ErrorCode::FixtureMissing:
    case ErrorCode::Timeout:
    case ErrorCode::AllBackendsFailed:
      return kExitBackend;
    case ErrorCode::MissingManifest:
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedScenario:
    case ErrorCode::EmptyResult:
    case ErrorCode::NonMonotonicTimestamps:
    case ErrorCode::HorizonNotCovered:
      return kExitDataset;
    default:
      return kExitInput;
  }
}

// Renders CSV text as an aligned table.
std::string align_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  std::vector<size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], row[i].size());
    }
  }
  std::string out;
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      if (i + 1 < row.size()) {
        out += std::string(widths[i] - row[i].size() + 2, ' ');
      }
    }
    out += '\n';
  }
  return out;
}

struct RunFlags {
  std::string config_path;
  std::optional<std::string> backend, scene, dataset_root, fixture_dir,
      output_dir, model_id, cache_dir, prompt_dir, class_table, http_url;
  std::optional<int> n_paths, synthetic_frames;
  std::optional<uint64_t> seed;
  std::optional<double> alpha, temperature;
};

int cmd_run(const RunFlags& flags) {
  pipeline::RunConfig config = pipeline::RunConfig::from_file(flags.config_path);
  if (flags.backend) config.backend = *flags.backend;
  if (flags.scene) config.scene = *flags.scene;
  if (flags.dataset_root) config.dataset_root = *flags.dataset_root;
  if (flags.fixture_dir) config.fixture_dir = *flags.fixture_dir;
  if (flags.output_dir) config.output_dir = *flags.output_dir;
  if (flags.model_id) config.model_id = *flags.model_id;
  if (flags.cache_dir) config.cache_dir = *flags.cache_dir;
  if (flags.prompt_dir) config.prompt_dir = *flags.prompt_dir;
  if (flags.class_table) config.class_table = *flags.class_table;
  if (flags.http_url) config.http.url = *flags.http_url;
  if (flags.n_paths) config.n_paths = *flags.n_paths;
  if (flags.synthetic_frames) config.oracle.synthetic_frames = *flags.synthetic_frames;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.alpha) config.alpha = *flags.alpha;
  if (flags.temperature) config.temperature = *flags.temperature;

  const pipeline::RunReport report = pipeline::run_eval(config);
  pipeline::write_report(report, config.output_dir);

  std::cout << "frames: " << report.records.size()
            << "  skipped: " << report.skipped.size() << "\n";
  std::cout << align_csv(metrics::summary_csv(report.summary));
  std::cout << "run digest: " << report.digest << "\n";
  std::cout << "report written to " << config.output_dir << "\n";
  return kExitOk;
}

struct OverlayFlags {
  std::string image, labelmap, table, out;
  double alpha = visual_prompt::kDefaultAlpha;
  bool categories = false;
};

int cmd_overlay(const OverlayFlags& flags) {
  const ImageU8 image = load_image(flags.image);
  visual_prompt::LabelMap map = visual_prompt::load_labelmap(flags.labelmap);
  const auto table = visual_prompt::ClassTable::load(flags.table);
  if (image.width != map.width || image.height != map.height) {
    std::cerr << "error: image is " << image.width << "x" << image.height
              << " but label map is " << map.width << "x" << map.height
              << "\n";
    return kExitInput;
  }
  if (flags.categories) {
    map = visual_prompt::consolidate_labels(map, table);
  }
  const auto annotated = visual_prompt::overlay(image, map, table, flags.alpha);
  save_png(flags.out, annotated.pixels);
  const auto legend = visual_prompt::build_legend(map, table);
  write_file(flags.out + ".legend.txt", legend.to_text());
  std::cout << "wrote " << flags.out << " and " << flags.out
            << ".legend.txt\n";
  return kExitOk;
}

struct PlotFlags {
  std::string report;  // report directory or frames.jsonl path
  std::string frame_id;
  std::string out;
  std::string layers = "gt,predicted,obstacle";
  std::string format = "svg";
  double extent = 20.0;
  int size = 400;
};

int cmd_plot(const PlotFlags& flags) {
  std::filesystem::path path = flags.report;
  if (std::filesystem::is_directory(path)) path /= "frames.jsonl";
  const auto records = pipeline::read_frames_jsonl(path);
  const metrics::FrameRecord* record = nullptr;
  for (const auto& r : records) {
    if (r.frame_id == flags.frame_id) {
      record = &r;
      break;
    }
  }
  if (!record) {
    raise(ErrorCode::FrameNotFound,
          "frame '" + flags.frame_id + "' not in " + path.string());
  }

  plot::PlotSpec spec;
  spec.extent = flags.extent;
  spec.size = flags.size;
  spec.layers = plot::PlotLayers{false, false, false, false};
  std::istringstream ls(flags.layers);
  std::string layer;
  while (std::getline(ls, layer, ',')) {
    if (layer == "gt") spec.layers.gt = true;
    else if (layer == "predicted") spec.layers.predicted = true;
    else if (layer == "ensemble") spec.layers.ensemble = true;
    else if (layer == "obstacle") spec.layers.obstacle = true;
    else raise(ErrorCode::ConfigInvalid, "unknown layer '" + layer + "'");
  }

  if (flags.format == "svg") {
    write_file(flags.out, plot::render_svg(*record, spec));
  } else if (flags.format == "png") {
    save_png(flags.out, plot::render_png_image(*record, spec));
  } else {
    raise(ErrorCode::ConfigInvalid, "format must be svg or png");
  }
  std::cout << "wrote " << flags.out << "\n";
  return kExitOk;
}

int cmd_report(const std::string& summary_path) {
  std::cout << align_csv(read_file(summary_path));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"off-road trajectory planning evaluation harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run an evaluation and write reports");
  run->add_option("--config", run_flags.config_path, "JSON run config")
      ->required();
  run->add_option("--backend", run_flags.backend, "http | replay | oracle");
  run->add_option("--scene", run_flags.scene, "scene filter");
  run->add_option("--dataset-root", run_flags.dataset_root, "dataset root");
  run->add_option("--fixture-dir", run_flags.fixture_dir, "replay fixtures");
  run->add_option("--output", run_flags.output_dir, "report output directory");
  run->add_option("--model-id", run_flags.model_id, "model identifier");
  run->add_option("--cache-dir", run_flags.cache_dir, "response cache dir");
  run->add_option("--prompts", run_flags.prompt_dir, "prompt template dir");
  run->add_option("--class-table", run_flags.class_table, "class table JSON");
  run->add_option("--url", run_flags.http_url, "chat-completion endpoint URL");
  run->add_option("--n-paths", run_flags.n_paths, "reasoning paths per frame");
  run->add_option("--synthetic-frames", run_flags.synthetic_frames,
                  "oracle synthetic frame count");
  run->add_option("--seed", run_flags.seed, "run seed");
  run->add_option("--alpha", run_flags.alpha, "overlay blend factor");
  run->add_option("--temperature", run_flags.temperature, "sampling temperature");

  OverlayFlags overlay_flags;
  auto* overlay = app.add_subcommand("overlay", "render a VP-Block overlay");
  overlay->add_option("--image", overlay_flags.image, "input PNG/JPEG")->required();
  overlay->add_option("--labelmap", overlay_flags.labelmap, "label map (PNG or VPRL)")
      ->required();
  overlay->add_option("--table", overlay_flags.table, "class table JSON")->required();
  overlay->add_option("--alpha", overlay_flags.alpha, "blend factor [0,1]");
  overlay->add_option("--out", overlay_flags.out, "output PNG")->required();
  overlay->add_flag("--categories", overlay_flags.categories,
                    "consolidate to broad categories first");

  PlotFlags plot_flags;
  auto* plot_cmd = app.add_subcommand("plot", "plot one frame from a report");
  plot_cmd->add_option("--report", plot_flags.report, "report dir or frames.jsonl")
      ->required();
  plot_cmd->add_option("--frame", plot_flags.frame_id, "frame id")->required();
  plot_cmd->add_option("--out", plot_flags.out, "output file")->required();
  plot_cmd->add_option("--layers", plot_flags.layers,
                       "comma list: gt,predicted,ensemble,obstacle");
  plot_cmd->add_option("--format", plot_flags.format, "svg | png");
  plot_cmd->add_option("--extent", plot_flags.extent, "meters center to edge");
  plot_cmd->add_option("--size", plot_flags.size, "image size in pixels");

  std::string summary_path;
  auto* report = app.add_subcommand("report", "pretty-print a summary CSV");
  report->add_option("--summary", summary_path, "summary.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (overlay->parsed()) return cmd_overlay(overlay_flags);
    if (plot_cmd->parsed()) return cmd_plot(plot_flags);
    if (report->parsed()) return cmd_report(summary_path);
  } catch (const offemma::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
