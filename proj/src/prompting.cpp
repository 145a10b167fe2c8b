#include "offemma/prompting.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma::prompting {

namespace {

std::string substitute(std::string text, const std::string& name,
                       const std::string& value) {
  const std::string key = "{" + name + "}";
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

size_t skip_ws(std::string_view text, size_t i) {
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t' ||
                             text[i] == '\n' || text[i] == '\r')) {
    ++i;
  }
  return i;
}

// Parses a signed decimal (optional exponent) at i. from_chars rejects a
// leading '+' and accepts inf/nan, so both are handled here.
bool parse_number(std::string_view text, size_t& i, double& out) {
  size_t j = i;
  if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
  if (j >= text.size() || !(std::isdigit((unsigned char)text[j]) ||
                            (text[j] == '.' && j + 1 < text.size() &&
                             std::isdigit((unsigned char)text[j + 1])))) {
    return false;
  }
  const char* first = text.data() + (text[i] == '+' ? i + 1 : i);
  auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
  if (ec != std::errc{} || !std::isfinite(out)) return false;
  i = (size_t)(ptr - text.data());
  return true;
}

struct PairMatch {
  size_t end = 0;
  double v = 0.0;
  double c = 0.0;
};

// "[v, c]" or "(v, c)"; either closer is accepted.
bool parse_pair(std::string_view text, size_t i, PairMatch& out) {
  if (i >= text.size() || (text[i] != '[' && text[i] != '(')) return false;
  i = skip_ws(text, i + 1);
  if (!parse_number(text, i, out.v)) return false;
  i = skip_ws(text, i);
  if (i >= text.size() || text[i] != ',') return false;
  i = skip_ws(text, i + 1);
  if (!parse_number(text, i, out.c)) return false;
  i = skip_ws(text, i);
  if (i >= text.size() || (text[i] != ']' && text[i] != ')')) return false;
  out.end = i + 1;
  return true;
}

struct PairRun {
  size_t begin = 0;
  size_t end = 0;
  std::vector<PairMatch> pairs;
};

}  // namespace

std::string PromptBundle::canonical_bytes() const {
  std::string out = "offemma-prompt-v1\x1f";
  out += system_preamble;
  out += '\x1f';
  out += legend_text;
  out += '\x1f';
  out += staged_turns ? '1' : '0';
  for (const PromptStage& stage : stages) {
    out += '\x1e';
    out += stage.title;
    out += '\x1f';
    out += stage.body;
  }
  return out;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  const std::array<const char*, 5> files = {
      "system.txt", "stage1_scene.txt", "stage2_object.txt",
      "stage3_intent.txt", "stage4_action.txt"};
  PromptTemplates out;
  for (size_t i = 0; i < files.size(); ++i) {
    const auto path = dir / files[i];
    if (!std::filesystem::exists(path)) {
      raise(ErrorCode::BadTemplate, "missing template " + path.string());
    }
    const std::string text = read_file(path);
    if (i == 0) {
      out.system = text;
      continue;
    }
    const size_t nl = text.find('\n');
    if (nl == std::string::npos || nl == 0) {
      raise(ErrorCode::BadTemplate,
            path.string() + ": first line must be the stage title");
    }
    out.stage_titles[i - 1] = text.substr(0, nl);
    out.stage_bodies[i - 1] = text.substr(nl + 1);
  }
  return out;
}

std::string format_history(const EgoHistory& history) {
  std::string out;
  const size_t n = history.states.size();
  for (size_t i = 0; i < n; ++i) {
    const double ago = (double)(n - 1 - i) * history.dt;
    if (ago > 0.0) {
      out += "- " + format_fixed(ago, 1) + " s ago: ";
    } else {
      out += "- now: ";
    }
    out += "speed " + format_fixed(history.states[i].speed, 3) +
           " m/s, curvature " + format_fixed(history.states[i].curvature, 4) +
           " 1/m\n";
  }
  return out;
}

PromptBundle build_prompt(const PromptTemplates& templates,
                          const EgoHistory& history,
                          const visual_prompt::Legend& legend,
                          int horizon_steps) {
  if (history.states.empty()) {
    raise(ErrorCode::EmptyHistory, "ego history must be non-empty");
  }
  if (horizon_steps < 1) {
    raise(ErrorCode::ConfigInvalid, "horizon_steps must be >= 1");
  }
  for (const VCSample& s : history.states) kinematics::validate_sample(s);

  const std::string history_text = format_history(history);
  const std::string legend_text = legend.to_text();
  const std::string horizon_text = std::to_string(horizon_steps);

  auto fill = [&](const std::string& text) {
    std::string s = substitute(text, "history", history_text);
    s = substitute(s, "legend", legend_text);
    s = substitute(s, "horizon", horizon_text);
    return s;
  };

  PromptBundle bundle;
  bundle.system_preamble = fill(templates.system);
  bundle.legend_text = legend_text;
  for (size_t i = 0; i < 4; ++i) {
    bundle.stages[i].title = templates.stage_titles[i];
    bundle.stages[i].body = fill(templates.stage_bodies[i]);
  }
  return bundle;
}

MotionParse parse_motion(std::string_view text,
                         std::optional<int> expected_steps) {
  std::vector<PairRun> runs;
  size_t i = 0;
  while (i < text.size()) {
    PairMatch first;
    if ((text[i] == '[' || text[i] == '(') && parse_pair(text, i, first)) {
      PairRun run;
      run.begin = i;
      run.pairs.push_back(first);
      size_t j = first.end;
      for (;;) {
        size_t k = skip_ws(text, j);
        if (k < text.size() && text[k] == ',') k = skip_ws(text, k + 1);
        PairMatch next;
        if (k < text.size() && (text[k] == '[' || text[k] == '(') &&
            parse_pair(text, k, next)) {
          run.pairs.push_back(next);
          j = next.end;
        } else {
          break;
        }
      }
      run.end = j;
      runs.push_back(std::move(run));
      i = j;
    } else {
      ++i;
    }
  }

  if (runs.empty()) {
    raise(ErrorCode::MalformedMotion, "no (speed, curvature) pair sequence found");
  }
  const PairRun& last = runs.back();

  MotionParse out;
  out.raw_span = std::string(text.substr(last.begin, last.end - last.begin));
  size_t take = last.pairs.size();
  if (expected_steps) {
    if ((int)take < *expected_steps) {
      raise(ErrorCode::TooFewSteps,
            "expected " + std::to_string(*expected_steps) + " pairs, found " +
                std::to_string(take));
    }
    if ((int)take > *expected_steps) {
      out.warnings.push_back("truncated " + std::to_string(take) +
                             " pairs to the first " +
                             std::to_string(*expected_steps));
      take = (size_t)*expected_steps;
    }
  }
  out.samples.reserve(take);
  for (size_t k = 0; k < take; ++k) {
    const PairMatch& p = last.pairs[k];
    if (p.v < 0.0) {
      raise(ErrorCode::NegativeSpeed,
            "pair " + std::to_string(k) + " has speed " + format_double(p.v));
    }
    out.samples.push_back(VCSample{p.v, p.c});
  }
  return out;
}

std::string serialize_samples(std::span<const VCSample> samples) {
  std::string out = "[";
  for (size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + format_double(samples[i].speed) + ", " +
           format_double(samples[i].curvature) + ")";
  }
  out += "]";
  return out;
}

}  // namespace offemma::prompting
