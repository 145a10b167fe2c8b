#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offemma/kinematics.hpp"
#include "offemma/visual_prompt.hpp"

namespace offemma::prompting {

using kinematics::VCSample;

// Historical ego driving states, most recent last, spaced dt seconds apart.
struct EgoHistory {
  std::vector<VCSample> states;
  double dt = 1.0;
};

struct PromptStage {
  std::string title;
  std::string body;
};

// The four reasoning stages plus the shared preamble and legend text.
// Stage order: scene description, object description, intention
// description, driving action prediction.
struct PromptBundle {
  std::string system_preamble;
  std::array<PromptStage, 4> stages;
  std::string legend_text;
  std::string image_ref;     // attachment handle, set by the caller
  bool staged_turns = false; // render stages as separate user messages

  // Deterministic serialization used for cache keys and request digests.
  std::string canonical_bytes() const;
};

// Stage templates are data files with {history}, {legend}, {horizon}
// placeholders. Unknown {names} pass through verbatim.
struct PromptTemplates {
  std::string system;
  std::array<std::string, 4> stage_titles;
  std::array<std::string, 4> stage_bodies;

  // Reads system.txt, stage1_scene.txt, stage2_object.txt,
  // stage3_intent.txt, stage4_action.txt from the directory. Each stage
  // file's first line is the title, the rest is the body.
  static PromptTemplates load(const std::filesystem::path& dir);
};

// Serializes ego history with units, e.g. "speed 2.000 m/s, curvature
// 0.0500 1/m" per state.
std::string format_history(const EgoHistory& history);

PromptBundle build_prompt(const PromptTemplates& templates,
                          const EgoHistory& history,
                          const visual_prompt::Legend& legend,
                          int horizon_steps);

struct MotionParse {
  std::vector<VCSample> samples;
  std::string raw_span;               // matched substring
  std::vector<std::string> warnings;
};

// Extracts the last maximal run of numeric pairs from free text. Accepts
// "[v, c]" and "(v, c)" pair styles, optional enclosing brackets, signed
// decimals and exponents. With expected_steps set, longer runs are
// truncated with a warning and shorter runs raise TooFewSteps.
MotionParse parse_motion(std::string_view text,
                         std::optional<int> expected_steps);

// "[(v1, c1), (v2, c2), ...]" with shortest round-trip number formatting;
// parse_motion(serialize_samples(s)) recovers s exactly.
std::string serialize_samples(std::span<const VCSample> samples);

}  // namespace offemma::prompting
