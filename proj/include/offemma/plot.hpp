#pragma once

#include <string>

#include "offemma/image.hpp"
#include "offemma/metrics.hpp"

namespace offemma::plot {

struct PlotLayers {
  bool gt = true;
  bool predicted = true;
  bool ensemble = false;
  bool obstacle = true;
};

// Top-down orthographic view. World-to-pixel transform, documented and
// test-pinned: scale = (size/2)/extent, col = size/2 - scale*y,
// row = size/2 - scale*x (ego x points up, ego y points left).
struct PlotSpec {
  double extent = 20.0;  // meters from the ego origin to an image edge
  int size = 400;        // square output, pixels
  PlotLayers layers;
};

// Layer colors: gt #2ca02c, predicted #d62728, ensemble members #9e9e9e,
// obstacle region #ff9800.
std::string render_svg(const metrics::FrameRecord& record,
                       const PlotSpec& spec);

ImageU8 render_png_image(const metrics::FrameRecord& record,
                         const PlotSpec& spec);

}  // namespace offemma::plot
