#include "offemma/prompting.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"
#include "support/test_util.hpp"

using namespace offemma;
using namespace offemma::prompting;

namespace {

visual_prompt::Legend demo_legend() {
  visual_prompt::Legend legend;
  legend.entries.push_back({3, "grass", "green", {0, 102, 0},
                            "generally safe to drive over", 900});
  legend.entries.push_back({33, "mud", "brown", {99, 66, 34},
                            "generally safe to drive over", 120});
  return legend;
}

EgoHistory demo_history() {
  EgoHistory h;
  h.dt = 1.0;
  h.states = {{1.8, 0.02}, {1.9, 0.01}, {2.0, 0.0}};
  return h;
}

PromptTemplates load_templates() {
  return PromptTemplates::load(testsupport::data_dir() / "prompts");
}

}  // namespace

TEST_CASE("build_prompt produces the four stages in order") {
  const PromptBundle b =
      build_prompt(load_templates(), demo_history(), demo_legend(), 5);
  CHECK(b.stages.size() == 4);
  CHECK(b.stages[0].title == "Scene Description");
  CHECK(b.stages[1].title == "Object Description");
  CHECK(b.stages[2].title == "Intent Description");
  CHECK(b.stages[3].title == "Generate Motion");
  // the action stage pins the format and the step count
  CHECK(b.stages[3].body.find("[(v1, c1), (v2, c2), ..., (vn, cn)]") !=
        std::string::npos);
  CHECK(b.stages[3].body.find("5") != std::string::npos);
  // history with units
  CHECK(b.stages[3].body.find("2.000 m/s") != std::string::npos);
  CHECK(b.stages[3].body.find("1/m") != std::string::npos);
}

TEST_CASE("legend text reaches the prompt with color and class names") {
  const PromptBundle b =
      build_prompt(load_templates(), demo_history(), demo_legend(), 5);
  for (const char* needle : {"green", "grass", "brown", "mud"}) {
    CHECK(b.legend_text.find(needle) != std::string::npos);
    CHECK(b.system_preamble.find(needle) != std::string::npos);
  }
}

TEST_CASE("build_prompt is byte-deterministic") {
  const PromptBundle a =
      build_prompt(load_templates(), demo_history(), demo_legend(), 5);
  const PromptBundle b =
      build_prompt(load_templates(), demo_history(), demo_legend(), 5);
  CHECK(a.canonical_bytes() == b.canonical_bytes());
}

TEST_CASE("build_prompt rejects an empty history") {
  EgoHistory empty;
  CHECK_THROWS_AS(
      build_prompt(load_templates(), empty, demo_legend(), 5), Error);
}

TEST_CASE("parse_motion accepts the square-bracket pair list") {
  const MotionParse p = parse_motion(
      "[0.3, 0.0], [0.3, 0.0], [0.3, 0.0], [0.3, 0.0], [0.3, 0.0]", 5);
  REQUIRE(p.samples.size() == 5);
  for (const auto& s : p.samples) {
    CHECK(s.speed == 0.3);
    CHECK(s.curvature == 0.0);
  }
  CHECK(p.warnings.empty());
}

TEST_CASE("parse_motion accepts parenthesized pairs inside prose") {
  const MotionParse p =
      parse_motion("Here is the plan: [(1.2, 0.05), (1.3, -0.02)]", 2);
  REQUIRE(p.samples.size() == 2);
  CHECK(p.samples[0].speed == 1.2);
  CHECK(p.samples[0].curvature == 0.05);
  CHECK(p.samples[1].speed == 1.3);
  CHECK(p.samples[1].curvature == -0.02);
  CHECK(p.raw_span == "(1.2, 0.05), (1.3, -0.02)");
}

TEST_CASE("parse_motion takes the last pair run") {
  const MotionParse p = parse_motion(
      "History was (2.0, 0.01), (2.1, 0.02).\nAnswer: [(0.5, 0.1), (0.6, 0.1)]",
      std::nullopt);
  REQUIRE(p.samples.size() == 2);
  CHECK(p.samples[0].speed == 0.5);
}

TEST_CASE("parse_motion handles style variants") {
  CHECK(parse_motion("[ 1 , 2 ]", std::nullopt).samples.size() == 1);
  CHECK(parse_motion("(0.5,-0.25)", std::nullopt).samples.size() == 1);
  CHECK(parse_motion("[[1,2],[3,4]]", std::nullopt).samples.size() == 2);
  CHECK(parse_motion("[1,2] [3,4]", std::nullopt).samples.size() == 2);
  CHECK(parse_motion("[+1.5, -2e-3]", std::nullopt).samples[0].speed == 1.5);
  CHECK(parse_motion("[.5, -.25]", std::nullopt).samples[0].speed == 0.5);
}

TEST_CASE("parse_motion error paths") {
  CHECK_THROWS_AS(parse_motion("I cannot determine a trajectory.", std::nullopt),
                  Error);
  try {
    parse_motion("no pairs here [1, ] (a, b)", std::nullopt);
    FAIL("expected MalformedMotion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedMotion);
  }
  try {
    parse_motion("[1, 2], [3, 4]", 5);
    FAIL("expected TooFewSteps");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewSteps);
  }
  try {
    parse_motion("[-0.5, 0.0]", std::nullopt);
    FAIL("expected NegativeSpeed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeSpeed);
  }
  // non-finite numbers never parse as pairs
  CHECK_THROWS_AS(parse_motion("[inf, 0]", std::nullopt), Error);
  CHECK_THROWS_AS(parse_motion("[nan, 0]", std::nullopt), Error);
  CHECK_THROWS_AS(parse_motion("[1e999, 0]", std::nullopt), Error);
}

TEST_CASE("parse_motion truncates long answers with a warning") {
  const MotionParse p =
      parse_motion("[1, 0], [2, 0], [3, 0], [4, 0]", 2);
  REQUIRE(p.samples.size() == 2);
  CHECK(p.samples[1].speed == 2.0);
  REQUIRE(p.warnings.size() == 1);
  CHECK(p.warnings[0].find("truncated") != std::string::npos);
}

TEST_CASE("serialize/parse round trip is a fixed point") {
  uint64_t state = 555;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VCSample> samples;
    const size_t n = 1 + splitmix64(state) % 7;
    for (size_t i = 0; i < n; ++i) {
      samples.push_back({30.0 * splitmix_unit(state),
                         -2.0 + 4.0 * splitmix_unit(state)});
    }
    const std::string text = serialize_samples(samples);
    const MotionParse p = parse_motion(text, (int)n);
    REQUIRE(p.samples.size() == n);
    for (size_t i = 0; i < n; ++i) {
      CHECK(p.samples[i].speed == samples[i].speed);
      CHECK(p.samples[i].curvature == samples[i].curvature);
    }
    CHECK(serialize_samples(p.samples) == text);
  }
}

TEST_CASE("parser survives random byte noise") {
  uint64_t state = 20240601;
  const std::string alphabet = "0123456789.,+-eE[]() \n\tabcxyz[](),.";
  int accepted = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    const size_t len = splitmix64(state) % 48;
    for (size_t i = 0; i < len; ++i) {
      if (splitmix_unit(state) < 0.8) {
        s.push_back(alphabet[splitmix64(state) % alphabet.size()]);
      } else {
        s.push_back((char)(splitmix64(state) % 256));
      }
    }
    try {
      const MotionParse p = parse_motion(s, std::nullopt);
      ++accepted;
      CHECK(!p.samples.empty());
      // accepted parses re-serialize to a fixed point
      const std::string canon = serialize_samples(p.samples);
      const MotionParse again = parse_motion(canon, std::nullopt);
      CHECK(serialize_samples(again.samples) == canon);
    } catch (const Error&) {
      // typed errors are the contract for garbage
    }
  }
  CHECK(accepted > 0);  // the alphabet is pair-heavy enough to hit some
}
