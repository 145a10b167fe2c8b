// Compares the serial reference kernels against their OpenMP variants on a
// camera-sized frame: overlay blending, label consolidation, histogram, and
// batched CoT-SC aggregation across frames.
//
// Usage: bench_kernels [width height reps]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "offemma/consistency.hpp"
#include "offemma/util.hpp"
#include "offemma/visual_prompt.hpp"

using namespace offemma;
using visual_prompt::Exec;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(int reps, F&& fn) {
  fn();  // warm up
  const double start = now_ms();
  for (int i = 0; i < reps; ++i) fn();
  return (now_ms() - start) / reps;
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-22s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int width = argc > 1 ? std::atoi(argv[1]) : 1920;
  const int height = argc > 2 ? std::atoi(argv[2]) : 1200;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 20;
  std::printf("frame %dx%d, %d reps, %d omp threads\n", width, height, reps,
              omp_get_max_threads());

  const char* table_json = R"({
    "categories": [
      {"id": 200, "name": "sky", "color": [135,206,235], "note": "background"},
      {"id": 201, "name": "traversable", "color": [60,179,75], "note": "drivable"},
      {"id": 202, "name": "non_traversable", "color": [180,120,40], "note": "avoid"},
      {"id": 203, "name": "obstacle", "color": [220,20,60], "note": "keep clear"}
    ],
    "classes": [
      {"id": 0, "name": "void", "color": [0,0,0], "category": "sky"},
      {"id": 3, "name": "grass", "color": [0,102,0], "category": "traversable"},
      {"id": 4, "name": "tree", "color": [0,255,0], "category": "obstacle"},
      {"id": 7, "name": "sky_px", "color": [0,0,255], "category": "sky"},
      {"id": 33, "name": "mud", "color": [99,66,34], "category": "traversable"}
    ]})";
  const auto table = visual_prompt::ClassTable::from_json(table_json);

  ImageU8 image = make_image(width, height);
  visual_prompt::LabelMap map;
  map.width = width;
  map.height = height;
  map.labels.resize(map.size());
  const uint8_t ids[5] = {0, 3, 4, 7, 33};
  uint64_t state = 42;
  for (size_t i = 0; i < map.size(); ++i) {
    map.labels[i] = ids[splitmix64(state) % 5];
    image.rgb[3 * i + 0] = (uint8_t)splitmix64(state);
    image.rgb[3 * i + 1] = (uint8_t)splitmix64(state);
    image.rgb[3 * i + 2] = (uint8_t)splitmix64(state);
  }

  {
    visual_prompt::AnnotatedImage serial_out, parallel_out;
    const double s = time_ms(reps, [&] {
      serial_out = visual_prompt::overlay(image, map, table, 0.45, Exec::Serial);
    });
    const double p = time_ms(reps, [&] {
      parallel_out =
          visual_prompt::overlay(image, map, table, 0.45, Exec::Parallel);
    });
    report("overlay", s, p, serial_out.pixels == parallel_out.pixels);
  }
  {
    visual_prompt::LabelMap serial_out, parallel_out;
    const double s = time_ms(reps, [&] {
      serial_out = visual_prompt::consolidate_labels(map, table, Exec::Serial);
    });
    const double p = time_ms(reps, [&] {
      parallel_out =
          visual_prompt::consolidate_labels(map, table, Exec::Parallel);
    });
    report("consolidate_labels", s, p, serial_out == parallel_out);
  }
  {
    std::vector<size_t> serial_out, parallel_out;
    const double s = time_ms(reps, [&] {
      serial_out = visual_prompt::count_labels(map, Exec::Serial);
    });
    const double p = time_ms(reps, [&] {
      parallel_out = visual_prompt::count_labels(map, Exec::Parallel);
    });
    report("count_labels", s, p, serial_out == parallel_out);
  }
  {
    // batched aggregation: many frames of N=8 trajectories, T=5
    const size_t frames = 2000;
    std::vector<consistency::TrajectoryEnsemble> ensembles(frames);
    for (auto& e : ensembles) {
      for (int n = 0; n < 8; ++n) {
        kinematics::Trajectory t;
        t.dt = 1.0;
        for (int k = 1; k <= 5; ++k) {
          t.waypoints.push_back({(double)k, splitmix_unit(state) * 10.0,
                                 splitmix_unit(state) * 10.0, 0.0});
        }
        e.samples.push_back(std::move(t));
      }
    }
    std::vector<double> serial_sums(frames), parallel_sums(frames);
    const double s = time_ms(reps, [&] {
      for (size_t i = 0; i < frames; ++i) {
        serial_sums[i] =
            consistency::aggregate(ensembles[i], 1e-6).trajectory.waypoints[4].x;
      }
    });
    const double p = time_ms(reps, [&] {
#pragma omp parallel for
      for (long i = 0; i < (long)frames; ++i) {
        parallel_sums[(size_t)i] =
            consistency::aggregate(ensembles[(size_t)i], 1e-6)
                .trajectory.waypoints[4]
                .x;
      }
    });
    report("aggregate x2000", s, p, serial_sums == parallel_sums);
  }
  return 0;
}
