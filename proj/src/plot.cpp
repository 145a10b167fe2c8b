#include "offemma/plot.hpp"

#include <cmath>
#include <vector>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma::plot {

namespace {

struct Transform {
  double center;
  double scale;

  std::pair<double, double> to_pixel(double x, double y) const {
    return {center - scale * y, center - scale * x};  // (col, row)
  }
};

void validate(const PlotSpec& spec) {
  if (!(spec.extent > 0.0)) {
    raise(ErrorCode::ConfigInvalid, "plot extent must be > 0");
  }
  if (spec.size < 16) {
    raise(ErrorCode::ConfigInvalid, "plot size must be >= 16 px");
  }
  if (!spec.layers.gt && !spec.layers.predicted && !spec.layers.ensemble &&
      !spec.layers.obstacle) {
    raise(ErrorCode::ConfigInvalid, "at least one plot layer must be enabled");
  }
}

// Polylines start at the ego origin.
std::vector<std::pair<double, double>> trajectory_points(
    const kinematics::Trajectory& t, const Transform& tf) {
  std::vector<std::pair<double, double>> out;
  out.push_back(tf.to_pixel(0.0, 0.0));
  for (const auto& w : t.waypoints) out.push_back(tf.to_pixel(w.x, w.y));
  return out;
}

std::string points_attr(const std::vector<std::pair<double, double>>& pts) {
  std::string out;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) out += ' ';
    out += format_double(pts[i].first) + "," + format_double(pts[i].second);
  }
  return out;
}

struct RgbColor {
  uint8_t r, g, b;
};

constexpr RgbColor kGtColor{0x2c, 0xa0, 0x2c};
constexpr RgbColor kPredictedColor{0xd6, 0x27, 0x28};
constexpr RgbColor kEnsembleColor{0x9e, 0x9e, 0x9e};
constexpr RgbColor kObstacleColor{0xff, 0x98, 0x00};

void draw_line(ImageU8& img, double x0, double y0, double x1, double y1,
               RgbColor color) {
  int ix0 = (int)std::lround(x0), iy0 = (int)std::lround(y0);
  const int ix1 = (int)std::lround(x1), iy1 = (int)std::lround(y1);
  const int dx = std::abs(ix1 - ix0), dy = -std::abs(iy1 - iy0);
  const int sx = ix0 < ix1 ? 1 : -1, sy = iy0 < iy1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (ix0 >= 0 && ix0 < img.width && iy0 >= 0 && iy0 < img.height) {
      uint8_t* px = img.pixel(ix0, iy0);
      px[0] = color.r;
      px[1] = color.g;
      px[2] = color.b;
    }
    if (ix0 == ix1 && iy0 == iy1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      ix0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      iy0 += sy;
    }
  }
}

void draw_polyline(ImageU8& img,
                   const std::vector<std::pair<double, double>>& pts,
                   RgbColor color) {
  for (size_t i = 1; i < pts.size(); ++i) {
    draw_line(img, pts[i - 1].first, pts[i - 1].second, pts[i].first,
              pts[i].second, color);
  }
}

}  // namespace

std::string render_svg(const metrics::FrameRecord& record,
                       const PlotSpec& spec) {
  validate(spec);
  const Transform tf{(double)spec.size / 2.0,
                     ((double)spec.size / 2.0) / spec.extent};
  const std::string size = std::to_string(spec.size);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + size +
         "\" height=\"" + size + "\" viewBox=\"0 0 " + size + " " + size +
         "\">\n";
  svg += "<rect width=\"" + size + "\" height=\"" + size +
         "\" fill=\"#ffffff\"/>\n";
  svg += "<title>" + record.frame_id + "</title>\n";

  if (spec.layers.obstacle && record.obstacle) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& v : record.obstacle->region) {
      pts.push_back(tf.to_pixel(v[0], v[1]));
    }
    svg += "<polygon id=\"obstacle\" points=\"" + points_attr(pts) +
           "\" fill=\"#ff9800\" fill-opacity=\"0.5\" stroke=\"#ff9800\"/>\n";
  }
  if (spec.layers.ensemble) {
    int n = 0;
    for (const auto& a : record.samples) {
      if (!a.parse_ok) continue;
      svg += "<polyline id=\"member" + std::to_string(n++) + "\" points=\"" +
             points_attr(trajectory_points(a.trajectory, tf)) +
             "\" fill=\"none\" stroke=\"#9e9e9e\" stroke-width=\"1\"/>\n";
    }
  }
  if (spec.layers.gt) {
    svg += "<polyline id=\"gt\" points=\"" +
           points_attr(trajectory_points(record.gt, tf)) +
           "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";
  }
  if (spec.layers.predicted && record.has_prediction) {
    svg += "<polyline id=\"predicted\" points=\"" +
           points_attr(trajectory_points(record.predicted.trajectory, tf)) +
           "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

ImageU8 render_png_image(const metrics::FrameRecord& record,
                         const PlotSpec& spec) {
  validate(spec);
  const Transform tf{(double)spec.size / 2.0,
                     ((double)spec.size / 2.0) / spec.extent};
  ImageU8 img = make_image(spec.size, spec.size, 255, 255, 255);

  if (spec.layers.obstacle && record.obstacle) {
    const auto& region = record.obstacle->region;
    for (size_t i = 0; i < region.size(); ++i) {
      const auto a = tf.to_pixel(region[i][0], region[i][1]);
      const auto b = tf.to_pixel(region[(i + 1) % region.size()][0],
                                 region[(i + 1) % region.size()][1]);
      draw_line(img, a.first, a.second, b.first, b.second, kObstacleColor);
    }
  }
  if (spec.layers.ensemble) {
    for (const auto& a : record.samples) {
      if (!a.parse_ok) continue;
      draw_polyline(img, trajectory_points(a.trajectory, tf), kEnsembleColor);
    }
  }
  if (spec.layers.gt) {
    draw_polyline(img, trajectory_points(record.gt, tf), kGtColor);
  }
  if (spec.layers.predicted && record.has_prediction) {
    draw_polyline(img, trajectory_points(record.predicted.trajectory, tf),
                  kPredictedColor);
  }
  return img;
}

}  // namespace offemma::plot
