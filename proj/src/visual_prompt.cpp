#include "offemma/visual_prompt.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma::visual_prompt {

using nlohmann::json;

namespace {

Rgb parse_rgb(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    raise(ErrorCode::BadClassTable, where + ": color must be [r, g, b]");
  }
  Rgb out;
  int vals[3];
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer()) {
      raise(ErrorCode::BadClassTable, where + ": color channels must be integers");
    }
    vals[i] = j[i].get<int>();
    if (vals[i] < 0 || vals[i] > 255) {
      raise(ErrorCode::BadClassTable, where + ": color channel out of [0,255]");
    }
  }
  out.r = (uint8_t)vals[0];
  out.g = (uint8_t)vals[1];
  out.b = (uint8_t)vals[2];
  return out;
}

uint8_t parse_id(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<int>() < 0 || j.get<int>() > 255) {
    raise(ErrorCode::BadClassTable, where + ": id must be an integer in [0,255]");
  }
  return (uint8_t)j.get<int>();
}

// Throws UnknownClassId for the first id present in the map but not in the
// table. Shared precheck so the kernels can run without error paths.
void require_known(const std::vector<size_t>& histogram,
                   const ClassTable& table) {
  for (size_t id = 0; id < histogram.size(); ++id) {
    if (histogram[id] > 0 && !table.has_class((uint8_t)id)) {
      raise(ErrorCode::UnknownClassId,
            "label map contains id " + std::to_string(id) +
                " absent from the class table");
    }
  }
}

uint32_t read_u32le(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;  // little-endian hosts only; asserted in encode_vprl
}

void append_u32le(std::string& out, uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

}  // namespace

const ClassDef& ClassTable::class_def(uint8_t id) const {
  auto it = classes_.find(id);
  if (it == classes_.end()) {
    raise(ErrorCode::UnknownClassId, "class id " + std::to_string(id));
  }
  return it->second;
}

const CategoryInfo& ClassTable::category_info(uint8_t id) const {
  auto it = categories_.find(id);
  if (it == categories_.end()) {
    raise(ErrorCode::UnknownClassId, "category id " + std::to_string(id));
  }
  return it->second;
}

void ClassTable::validate() const {
  if (categories_.empty() || categories_.size() > 4) {
    raise(ErrorCode::BadClassTable,
          "need 1..4 broad categories, got " +
              std::to_string(categories_.size()));
  }
  std::set<Rgb> colors;
  for (const auto& [id, cls] : classes_) {
    if (!colors.insert(cls.color).second) {
      raise(ErrorCode::BadClassTable,
            "duplicate color for class '" + cls.name + "'");
    }
    if (categories_.count(cls.category_id) == 0) {
      raise(ErrorCode::BadClassTable,
            "class '" + cls.name + "' references unknown category");
    }
  }
  for (const auto& [id, cat] : categories_) {
    auto it = classes_.find(id);
    if (it == classes_.end() || it->second.category_id != id) {
      raise(ErrorCode::BadClassTable,
            "category '" + cat.name + "' must be a self-mapped class");
    }
  }
}

ClassTable ClassTable::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::BadClassTable, std::string("invalid JSON: ") + e.what());
  }
  ClassTable table;
  std::map<std::string, uint8_t> category_by_name;
  if (!j.contains("categories") || !j["categories"].is_array()) {
    raise(ErrorCode::BadClassTable, "missing 'categories' array");
  }
  for (const json& c : j["categories"]) {
    CategoryInfo cat;
    cat.id = parse_id(c.at("id"), "category");
    cat.name = c.at("name").get<std::string>();
    cat.note = c.value("note", "");
    ClassDef cls;
    cls.id = cat.id;
    cls.name = cat.name;
    cls.color = parse_rgb(c.at("color"), "category " + cat.name);
    cls.color_name = c.value("color_name", "");
    cls.category_id = cat.id;
    if (!table.categories_.emplace(cat.id, cat).second) {
      raise(ErrorCode::BadClassTable, "duplicate category id");
    }
    table.classes_.emplace(cls.id, cls);
    category_by_name[cat.name] = cat.id;
  }
  for (const json& c : j.value("classes", json::array())) {
    ClassDef cls;
    cls.id = parse_id(c.at("id"), "class");
    cls.name = c.at("name").get<std::string>();
    cls.color = parse_rgb(c.at("color"), "class " + cls.name);
    cls.color_name = c.value("color_name", "");
    const std::string cat_name = c.at("category").get<std::string>();
    auto it = category_by_name.find(cat_name);
    if (it == category_by_name.end()) {
      raise(ErrorCode::BadClassTable,
            "class '" + cls.name + "' references unknown category '" +
                cat_name + "'");
    }
    cls.category_id = it->second;
    if (!table.classes_.emplace(cls.id, cls).second) {
      raise(ErrorCode::BadClassTable,
            "duplicate class id " + std::to_string(cls.id));
    }
  }
  table.validate();
  return table;
}

ClassTable ClassTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  return from_json(read_file(path));
}

LabelMap decode_labelmap_png(const std::string& bytes) {
  LabelMap out;
  out.labels = decode_gray_png(bytes, out.width, out.height);
  return out;
}

std::string encode_labelmap_png(const LabelMap& map) {
  return encode_gray_png(map.labels, map.width, map.height);
}

LabelMap decode_vprl(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "VPRL") != 0) {
    raise(ErrorCode::BadImage, "not a VPRL label map");
  }
  LabelMap out;
  out.width = (int)read_u32le(bytes.data() + 4);
  out.height = (int)read_u32le(bytes.data() + 8);
  if (out.width <= 0 || out.height <= 0 ||
      (bytes.size() - 12) % 8 != 0) {
    raise(ErrorCode::BadImage, "malformed VPRL header or payload");
  }
  const size_t total = out.size();
  out.labels.reserve(total);
  for (size_t off = 12; off + 8 <= bytes.size(); off += 8) {
    const uint32_t count = read_u32le(bytes.data() + off);
    const uint32_t id = read_u32le(bytes.data() + off + 4);
    if (id > 255 || out.labels.size() + count > total) {
      raise(ErrorCode::BadImage, "VPRL run exceeds image size or id range");
    }
    out.labels.insert(out.labels.end(), count, (uint8_t)id);
  }
  if (out.labels.size() != total) {
    raise(ErrorCode::BadImage, "VPRL runs do not cover the image");
  }
  return out;
}

std::string encode_vprl(const LabelMap& map) {
  static_assert(std::endian::native == std::endian::little,
                "VPRL codec assumes a little-endian host");
  if (map.labels.size() != map.size() || map.width <= 0 || map.height <= 0) {
    raise(ErrorCode::BadImage, "label buffer does not match dimensions");
  }
  std::string out = "VPRL";
  append_u32le(out, (uint32_t)map.width);
  append_u32le(out, (uint32_t)map.height);
  size_t i = 0;
  while (i < map.labels.size()) {
    const uint8_t id = map.labels[i];
    size_t j = i;
    while (j < map.labels.size() && map.labels[j] == id) ++j;
    append_u32le(out, (uint32_t)(j - i));
    append_u32le(out, id);
    i = j;
  }
  return out;
}

LabelMap load_labelmap(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && bytes.compare(0, 4, "VPRL") == 0) {
    return decode_vprl(bytes);
  }
  return decode_labelmap_png(bytes);
}

std::string Legend::to_text() const {
  std::string out;
  for (const LegendEntry& e : entries) {
    out += "- " + e.color_name + " (rgb " + std::to_string(e.color.r) + "," +
           std::to_string(e.color.g) + "," + std::to_string(e.color.b) +
           ") = " + e.class_name + ": " + e.note + "\n";
  }
  return out;
}

std::vector<size_t> count_labels(const LabelMap& map, Exec exec) {
  if (map.labels.size() != map.size()) {
    raise(ErrorCode::DimensionMismatch, "label buffer does not match dimensions");
  }
  std::vector<size_t> histogram(256, 0);
  if (exec == Exec::Serial) {
    for (uint8_t id : map.labels) ++histogram[id];
    return histogram;
  }
#pragma omp parallel
  {
    std::vector<size_t> local(256, 0);
#pragma omp for nowait
    for (long i = 0; i < (long)map.labels.size(); ++i) {
      ++local[map.labels[i]];
    }
#pragma omp critical
    for (size_t id = 0; id < 256; ++id) histogram[id] += local[id];
  }
  return histogram;
}

LabelMap consolidate_labels(const LabelMap& map, const ClassTable& table,
                            Exec exec) {
  require_known(count_labels(map, exec), table);
  // dense id -> category lookup so the pixel loop stays branch-free
  std::array<uint8_t, 256> category{};
  for (const auto& [id, cls] : table.classes()) category[id] = cls.category_id;

  LabelMap out;
  out.width = map.width;
  out.height = map.height;
  out.labels.resize(map.size());
  if (exec == Exec::Serial) {
    for (size_t i = 0; i < map.labels.size(); ++i) {
      out.labels[i] = category[map.labels[i]];
    }
  } else {
#pragma omp parallel for
    for (long i = 0; i < (long)map.labels.size(); ++i) {
      out.labels[i] = category[map.labels[i]];
    }
  }
  return out;
}

AnnotatedImage overlay(const ImageU8& image, const LabelMap& map,
                       const ClassTable& table, double alpha, Exec exec) {
  if (image.width != map.width || image.height != map.height) {
    raise(ErrorCode::DimensionMismatch,
          "image " + std::to_string(image.width) + "x" +
              std::to_string(image.height) + " vs label map " +
              std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    raise(ErrorCode::AlphaOutOfRange, "alpha must be in [0,1]");
  }
  require_known(count_labels(map, exec), table);

  std::array<Rgb, 256> palette{};
  for (const auto& [id, cls] : table.classes()) palette[id] = cls.color;

  AnnotatedImage out;
  out.alpha = alpha;
  out.pixels.width = image.width;
  out.pixels.height = image.height;
  out.pixels.rgb.resize(image.rgb.size());

  auto blend = [&](size_t i) {
    const Rgb color = palette[map.labels[i]];
    const uint8_t* src = image.rgb.data() + 3 * i;
    uint8_t* dst = out.pixels.rgb.data() + 3 * i;
    const double keep = 1.0 - alpha;
    // round-half-up per channel, pinned for bit-exact goldens
    dst[0] = (uint8_t)std::floor(keep * src[0] + alpha * color.r + 0.5);
    dst[1] = (uint8_t)std::floor(keep * src[1] + alpha * color.g + 0.5);
    dst[2] = (uint8_t)std::floor(keep * src[2] + alpha * color.b + 0.5);
  };

  if (exec == Exec::Serial) {
    for (size_t i = 0; i < map.labels.size(); ++i) blend(i);
  } else {
#pragma omp parallel for
    for (long i = 0; i < (long)map.labels.size(); ++i) blend((size_t)i);
  }
  return out;
}

Legend build_legend(const LabelMap& map, const ClassTable& table, Exec exec) {
  const std::vector<size_t> histogram = count_labels(map, exec);
  require_known(histogram, table);

  Legend legend;
  for (size_t id = 0; id < histogram.size(); ++id) {
    if (histogram[id] == 0) continue;
    const ClassDef& cls = table.class_def((uint8_t)id);
    LegendEntry e;
    e.class_id = cls.id;
    e.class_name = cls.name;
    e.color_name = cls.color_name;
    e.color = cls.color;
    e.note = table.category_info(cls.category_id).note;
    e.pixel_count = histogram[id];
    legend.entries.push_back(std::move(e));
  }
  std::sort(legend.entries.begin(), legend.entries.end(),
            [](const LegendEntry& a, const LegendEntry& b) {
              if (a.pixel_count != b.pixel_count) {
                return a.pixel_count > b.pixel_count;
              }
              return a.class_id < b.class_id;
            });
  return legend;
}

}  // namespace offemma::visual_prompt
