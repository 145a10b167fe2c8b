#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "offemma/image.hpp"

namespace offemma::visual_prompt {

struct Rgb {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
  auto operator<=>(const Rgb&) const = default;
};

struct ClassDef {
  uint8_t id = 0;
  std::string name;
  std::string color_name;
  Rgb color;
  uint8_t category_id = 0;
};

struct CategoryInfo {
  uint8_t id = 0;
  std::string name;
  std::string note;  // traversability note injected into legends
};

// Class-id -> (name, color, broad category) table. Every broad category is
// itself a class mapped to its own id, so consolidation is idempotent under
// one table.
class ClassTable {
 public:
  static ClassTable from_json(const std::string& text);
  static ClassTable load(const std::filesystem::path& path);

  bool has_class(uint8_t id) const { return classes_.count(id) != 0; }
  const ClassDef& class_def(uint8_t id) const;           // UnknownClassId
  const CategoryInfo& category_info(uint8_t id) const;   // UnknownClassId
  const std::map<uint8_t, ClassDef>& classes() const { return classes_; }
  const std::map<uint8_t, CategoryInfo>& categories() const {
    return categories_;
  }

 private:
  std::map<uint8_t, ClassDef> classes_;
  std::map<uint8_t, CategoryInfo> categories_;
  void validate() const;
};

// Row-major grid of class ids paired with an equally sized camera image.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> labels;

  size_t size() const { return (size_t)width * (size_t)height; }
  bool operator==(const LabelMap&) const = default;
};

// On disk: single-channel PNG of ids, or the "VPRL" run-length sidecar
// (magic "VPRL", u32 width, u32 height, then (u32 count, u32 id) pairs,
// all little-endian).
LabelMap load_labelmap(const std::filesystem::path& path);
LabelMap decode_labelmap_png(const std::string& bytes);
LabelMap decode_vprl(const std::string& bytes);
std::string encode_vprl(const LabelMap& map);
std::string encode_labelmap_png(const LabelMap& map);

struct AnnotatedImage {
  ImageU8 pixels;
  double alpha = 0.0;
};

struct LegendEntry {
  uint8_t class_id = 0;
  std::string class_name;
  std::string color_name;
  Rgb color;
  std::string note;
  size_t pixel_count = 0;
};

struct Legend {
  std::vector<LegendEntry> entries;

  // One line per entry: "<color_name> (rgb r,g,b) = <class>: <note>".
  std::string to_text() const;
};

// Kernels come in a serial reference and an OpenMP variant; both produce
// bit-identical results. The *Exec* argument picks the path.
enum class Exec { Serial, Parallel };

inline constexpr double kDefaultAlpha = 0.45;

// Replaces every class id with its broad-category id.
LabelMap consolidate_labels(const LabelMap& map, const ClassTable& table,
                            Exec exec = Exec::Parallel);

// Per channel: round-half-up((1-alpha)*image + alpha*class_color).
AnnotatedImage overlay(const ImageU8& image, const LabelMap& map,
                       const ClassTable& table, double alpha,
                       Exec exec = Exec::Parallel);

// One entry per id present in the map, ordered by descending pixel count,
// ties by ascending class id.
Legend build_legend(const LabelMap& map, const ClassTable& table,
                    Exec exec = Exec::Parallel);

// 256-bin histogram of class ids.
std::vector<size_t> count_labels(const LabelMap& map,
                                 Exec exec = Exec::Parallel);

}  // namespace offemma::visual_prompt
