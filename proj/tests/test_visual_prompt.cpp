#include "offemma/visual_prompt.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include "offemma/errors.hpp"
#include "offemma/image.hpp"
#include "offemma/util.hpp"
#include "support/test_util.hpp"

using namespace offemma;
using namespace offemma::visual_prompt;

namespace {

ClassTable demo_table() {
  return ClassTable::from_json(R"({
    "categories": [
      {"id": 200, "name": "sky", "color": [135, 206, 235], "color_name": "pale blue", "note": "background"},
      {"id": 201, "name": "traversable", "color": [60, 179, 75], "color_name": "bright green", "note": "drivable"},
      {"id": 203, "name": "obstacle", "color": [220, 20, 60], "color_name": "crimson", "note": "keep clear"}
    ],
    "classes": [
      {"id": 3, "name": "grass", "color": [0, 102, 0], "color_name": "green", "category": "traversable"},
      {"id": 33, "name": "mud", "color": [99, 66, 34], "color_name": "umber", "category": "traversable"},
      {"id": 4, "name": "tree", "color": [0, 255, 0], "color_name": "lime", "category": "obstacle"},
      {"id": 7, "name": "sky", "color": [0, 0, 255], "color_name": "blue", "category": "sky"}
    ]})");
}

LabelMap map_2x2(std::initializer_list<uint8_t> ids) {
  LabelMap m;
  m.width = 2;
  m.height = 2;
  m.labels.assign(ids);
  return m;
}

LabelMap random_map(uint64_t& state, int width, int height) {
  const uint8_t ids[4] = {3, 33, 4, 7};
  LabelMap m;
  m.width = width;
  m.height = height;
  m.labels.resize(m.size());
  for (auto& l : m.labels) l = ids[splitmix64(state) % 4];
  return m;
}

ImageU8 random_image(uint64_t& state, int width, int height) {
  ImageU8 img = make_image(width, height);
  for (auto& b : img.rgb) b = (uint8_t)splitmix64(state);
  return img;
}

}  // namespace

TEST_CASE("shipped class table loads and is self-consistent") {
  const auto table = ClassTable::load(testsupport::data_dir() / "class_table.json");
  CHECK(table.categories().size() == 4);
  for (const auto& [id, cat] : table.categories()) {
    const ClassDef& self = table.class_def(id);
    CHECK(self.category_id == id);
  }
  CHECK(table.class_def(3).name == "grass");
}

TEST_CASE("class table validation failures") {
  CHECK_THROWS_AS(ClassTable::from_json("{"), Error);
  // duplicate colors
  CHECK_THROWS_AS(ClassTable::from_json(R"({
    "categories": [{"id": 0, "name": "a", "color": [1,2,3], "note": ""},
                    {"id": 1, "name": "b", "color": [1,2,3], "note": ""}],
    "classes": []})"),
                  Error);
  // unknown category reference
  CHECK_THROWS_AS(ClassTable::from_json(R"({
    "categories": [{"id": 0, "name": "a", "color": [1,2,3], "note": ""}],
    "classes": [{"id": 5, "name": "x", "color": [4,5,6], "category": "zz"}]})"),
                  Error);
  // more than four categories
  CHECK_THROWS_AS(ClassTable::from_json(R"({
    "categories": [{"id": 0, "name": "a", "color": [1,0,0], "note": ""},
                    {"id": 1, "name": "b", "color": [2,0,0], "note": ""},
                    {"id": 2, "name": "c", "color": [3,0,0], "note": ""},
                    {"id": 3, "name": "d", "color": [4,0,0], "note": ""},
                    {"id": 4, "name": "e", "color": [5,0,0], "note": ""}],
    "classes": []})"),
                  Error);
}

TEST_CASE("consolidate_labels maps classes to their categories") {
  const auto table = demo_table();
  const LabelMap in = map_2x2({3, 4, 33, 7});
  const LabelMap out = consolidate_labels(in, table);
  CHECK(out.labels == std::vector<uint8_t>{201, 203, 201, 200});

  SUBCASE("idempotent under the same table") {
    const LabelMap again = consolidate_labels(out, table);
    CHECK(again == out);
  }
  SUBCASE("identity table leaves maps unchanged") {
    const auto identity = ClassTable::from_json(R"({
      "categories": [
        {"id": 1, "name": "a", "color": [10, 0, 0], "note": ""},
        {"id": 2, "name": "b", "color": [0, 10, 0], "note": ""}
      ], "classes": []})");
    const LabelMap m = map_2x2({1, 2, 2, 1});
    CHECK(consolidate_labels(m, identity) == m);
  }
  SUBCASE("unknown id raises") {
    const LabelMap bad = map_2x2({3, 4, 99, 7});
    CHECK_THROWS_AS(consolidate_labels(bad, table), Error);
  }
}

TEST_CASE("overlay blend arithmetic") {
  const auto table = demo_table();

  SUBCASE("alpha 0 is the identity") {
    uint64_t state = 1;
    const ImageU8 img = random_image(state, 8, 6);
    const LabelMap map = random_map(state, 8, 6);
    const AnnotatedImage out = overlay(img, map, table, 0.0);
    CHECK(out.pixels == img);
  }
  SUBCASE("alpha 1 is the pure palette") {
    ImageU8 img = make_image(4, 4, 17, 80, 200);
    LabelMap map;
    map.width = 4;
    map.height = 4;
    map.labels.assign(16, 4);  // tree, lime (0, 255, 0)
    const AnnotatedImage out = overlay(img, map, table, 1.0);
    for (size_t i = 0; i < out.pixels.pixel_count(); ++i) {
      CHECK(out.pixels.rgb[3 * i + 0] == 0);
      CHECK(out.pixels.rgb[3 * i + 1] == 255);
      CHECK(out.pixels.rgb[3 * i + 2] == 0);
    }
  }
  SUBCASE("alpha 0.5 blends round-half-up") {
    const auto custom = ClassTable::from_json(R"({
      "categories": [{"id": 9, "name": "c", "color": [200, 0, 0], "note": ""}],
      "classes": []})");
    ImageU8 img = make_image(1, 1, 100, 100, 100);
    LabelMap map;
    map.width = map.height = 1;
    map.labels = {9};
    const AnnotatedImage out = overlay(img, map, custom, 0.5);
    CHECK(out.pixels.rgb[0] == 150);
    CHECK(out.pixels.rgb[1] == 50);
    CHECK(out.pixels.rgb[2] == 50);
  }
  SUBCASE("idempotent at alpha 1") {
    uint64_t state = 3;
    const ImageU8 img = random_image(state, 9, 5);
    const LabelMap map = random_map(state, 9, 5);
    const AnnotatedImage once = overlay(img, map, table, 1.0);
    const AnnotatedImage twice = overlay(once.pixels, map, table, 1.0);
    CHECK(once.pixels == twice.pixels);
  }
  SUBCASE("output stays channel-wise between input and class color") {
    uint64_t state = 4;
    const ImageU8 img = random_image(state, 16, 12);
    const LabelMap map = random_map(state, 16, 12);
    for (double alpha : {0.1, 0.45, 0.8}) {
      const AnnotatedImage out = overlay(img, map, table, alpha);
      for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
          const Rgb c = table.class_def(map.labels[(size_t)y * 16 + x]).color;
          const uint8_t channels[3] = {c.r, c.g, c.b};
          for (int ch = 0; ch < 3; ++ch) {
            const uint8_t in = img.pixel(x, y)[ch];
            const uint8_t ov = out.pixels.pixel(x, y)[ch];
            CHECK(ov >= std::min(in, channels[ch]));
            CHECK(ov <= std::max(in, channels[ch]));
          }
        }
      }
    }
  }
  SUBCASE("errors") {
    uint64_t state = 5;
    const ImageU8 img = random_image(state, 4, 4);
    const LabelMap small = random_map(state, 3, 4);
    CHECK_THROWS_AS(overlay(img, small, table, 0.5), Error);
    const LabelMap map = random_map(state, 4, 4);
    CHECK_THROWS_AS(overlay(img, map, table, -0.1), Error);
    CHECK_THROWS_AS(overlay(img, map, table, 1.1), Error);
  }
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
  uint64_t state = 99;
  const ImageU8 img = random_image(state, 321, 123);
  const LabelMap map = random_map(state, 321, 123);
  const auto table = demo_table();
  CHECK(overlay(img, map, table, 0.45, Exec::Serial).pixels ==
        overlay(img, map, table, 0.45, Exec::Parallel).pixels);
  CHECK(consolidate_labels(map, table, Exec::Serial) ==
        consolidate_labels(map, table, Exec::Parallel));
  CHECK(count_labels(map, Exec::Serial) == count_labels(map, Exec::Parallel));
}

TEST_CASE("legend ordering and contents") {
  const auto table = demo_table();

  SUBCASE("uniform map yields one entry") {
    LabelMap m;
    m.width = 3;
    m.height = 2;
    m.labels.assign(6, 3);
    const Legend legend = build_legend(m, table);
    REQUIRE(legend.entries.size() == 1);
    CHECK(legend.entries[0].class_name == "grass");
    CHECK(legend.entries[0].pixel_count == 6);
    CHECK(legend.entries[0].note == "drivable");
  }
  SUBCASE("2x2 map: four entries, tie broken by ascending id") {
    const Legend legend = build_legend(map_2x2({3, 4, 33, 7}), table);
    REQUIRE(legend.entries.size() == 4);
    CHECK(legend.entries[0].class_id == 3);
    CHECK(legend.entries[1].class_id == 4);
    CHECK(legend.entries[2].class_id == 7);
    CHECK(legend.entries[3].class_id == 33);
  }
  SUBCASE("ordering by descending pixel count") {
    LabelMap m;
    m.width = 4;
    m.height = 1;
    m.labels = {33, 33, 33, 4};
    const Legend legend = build_legend(m, table);
    REQUIRE(legend.entries.size() == 2);
    CHECK(legend.entries[0].class_name == "mud");
    CHECK(legend.entries[1].class_name == "tree");
  }
  SUBCASE("legend text carries color names and class names") {
    const std::string text = build_legend(map_2x2({3, 3, 4, 4}), table).to_text();
    CHECK(text.find("green") != std::string::npos);
    CHECK(text.find("grass") != std::string::npos);
    CHECK(text.find("lime") != std::string::npos);
    CHECK(text.find("tree") != std::string::npos);
  }
  SUBCASE("entry count equals distinct ids present") {
    uint64_t state = 123;
    for (int trial = 0; trial < 20; ++trial) {
      const LabelMap m = random_map(state, 13, 7);
      std::set<uint8_t> distinct(m.labels.begin(), m.labels.end());
      CHECK(build_legend(m, table).entries.size() == distinct.size());
    }
  }
}

TEST_CASE("VPRL round trip and malformed payloads") {
  uint64_t state = 6;
  const LabelMap m = random_map(state, 37, 11);
  const std::string bytes = encode_vprl(m);
  CHECK(bytes.substr(0, 4) == "VPRL");
  CHECK(decode_vprl(bytes) == m);

  CHECK_THROWS_AS(decode_vprl("VPRL"), Error);
  CHECK_THROWS_AS(decode_vprl("NOPE1234123412341234"), Error);
  // runs that do not cover the image
  std::string truncated = bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(decode_vprl(truncated), Error);
}

TEST_CASE("label map PNG round trip") {
  uint64_t state = 61;
  const LabelMap m = random_map(state, 24, 18);
  const LabelMap back = decode_labelmap_png(encode_labelmap_png(m));
  CHECK(back == m);
}

TEST_CASE("image PNG round trip is lossless") {
  uint64_t state = 77;
  const ImageU8 img = random_image(state, 31, 17);
  CHECK(decode_image(encode_png(img)) == img);
}
