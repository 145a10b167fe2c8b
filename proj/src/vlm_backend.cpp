#include "offemma/vlm_backend.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "offemma/util.hpp"

namespace offemma::vlm {

using nlohmann::json;

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
    case BackendKind::Oracle: return "oracle";
  }
  return "unknown";
}

namespace {

std::string digest_core(const VlmRequest& r) {
  std::string payload = "offemma-req-v1";
  payload += '\x1f';
  payload += r.model_id;
  payload += '\x1f';
  payload += r.prompt.canonical_bytes();
  payload += '\x1f';
  payload += r.image;
  payload += '\x1f';
  payload += format_double(r.temperature);
  return payload;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// Standard normal via Box-Muller on a splitmix64 stream; kept hand-rolled so
// oracle fixtures do not depend on libstdc++'s distribution internals.
double next_normal(uint64_t& state) {
  double u1 = splitmix_unit(state);
  while (u1 <= 0.0) u1 = splitmix_unit(state);
  const double u2 = splitmix_unit(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

std::string request_digest(const VlmRequest& request) {
  std::string payload = digest_core(request);
  payload += '\x1f';
  payload += std::to_string(request.sample_index);
  return sha256_hex(payload);
}

std::string request_group_digest(const VlmRequest& request) {
  return sha256_hex(digest_core(request));
}

std::string render_user_text(const prompting::PromptBundle& bundle) {
  std::string out;
  for (size_t i = 0; i < bundle.stages.size(); ++i) {
    out += "## Step " + std::to_string(i + 1) + ": " + bundle.stages[i].title +
           "\n";
    out += bundle.stages[i].body;
    if (!bundle.stages[i].body.empty() && bundle.stages[i].body.back() != '\n') {
      out += '\n';
    }
    if (i + 1 < bundle.stages.size()) out += '\n';
  }
  return out;
}

std::string render_chat_request_body(const VlmRequest& request) {
  json messages = json::array();
  messages.push_back(
      {{"role", "system"}, {"content", request.prompt.system_preamble}});

  const std::string image_url =
      "data:image/png;base64," + base64_encode(request.image);
  auto image_part =
      json{{"type", "image_url"}, {"image_url", {{"url", image_url}}}};

  if (request.prompt.staged_turns) {
    for (size_t i = 0; i < request.prompt.stages.size(); ++i) {
      json content = json::array();
      if (i == 0) content.push_back(image_part);
      content.push_back(
          {{"type", "text"},
           {"text", "## Step " + std::to_string(i + 1) + ": " +
                        request.prompt.stages[i].title + "\n" +
                        request.prompt.stages[i].body}});
      messages.push_back({{"role", "user"}, {"content", content}});
    }
  } else {
    json content = json::array();
    content.push_back(image_part);
    content.push_back({{"type", "text"}, {"text", render_user_text(request.prompt)}});
    messages.push_back({{"role", "user"}, {"content", content}});
  }

  json body = {
      {"max_tokens", request.max_tokens},
      {"messages", messages},
      {"model", request.model_id},
      {"temperature", request.temperature},
      {"user", "sample-" + std::to_string(request.sample_index)},
  };
  return body.dump();
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& digest) {
  std::lock_guard lock(mu_);
  auto it = memory_.find(digest);
  if (it != memory_.end()) return it->second;
  if (!dir_.empty()) {
    const auto path = dir_ / (digest + ".txt");
    if (std::filesystem::exists(path)) {
      std::string text = read_file(path);
      memory_.emplace(digest, text);
      return text;
    }
  }
  return std::nullopt;
}

void ResponseCache::put(const std::string& digest, const std::string& text) {
  std::lock_guard lock(mu_);
  memory_[digest] = text;
  if (!dir_.empty()) {
    write_file(dir_ / (digest + ".txt"), text);
  }
}

Backend::Backend(std::shared_ptr<ResponseCache> cache)
    : cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()) {}

std::vector<SampleResult> Backend::sample_n(const VlmRequest& request_template,
                                            int n, int max_in_flight) {
  if (n < 1) {
    raise(ErrorCode::ConfigInvalid, "sample_n needs n >= 1");
  }
  std::vector<SampleResult> results((size_t)n);

  auto run_one = [&](int index) {
    VlmRequest req = request_template;
    req.sample_index = index;
    SampleResult& slot = results[(size_t)index];
    slot.sample_index = index;
    try {
      slot.response = complete(req);
    } catch (const Error& e) {
      slot.error = e.what();
      slot.error_code = e.code();
    } catch (const std::exception& e) {
      slot.error = e.what();
      slot.error_code = ErrorCode::AllBackendsFailed;
    }
  };

  const int workers = std::max(1, std::min(n, max_in_flight));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) run_one(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve((size_t)workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        run_one(i);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

HttpBackend::HttpBackend(HttpConfig config, std::shared_ptr<ResponseCache> cache)
    : Backend(std::move(cache)), config_(std::move(config)) {
  if (config_.api_key.empty()) {
    if (const char* env = std::getenv("OFFEMMA_API_KEY")) {
      config_.api_key = env;
    }
  }
}

std::string HttpBackend::parse_chat_response_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    raise(ErrorCode::BadStatus, "response is not valid JSON");
  }
  try {
    const json& message = j.at("choices").at(0).at("message");
    const json& content = message.at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    for (const json& part : content) {
      if (part.value("type", "text") == "text") {
        text += part.value("text", "");
      }
    }
    return text;
  } catch (const json::exception&) {
    raise(ErrorCode::BadStatus, "response JSON lacks choices[0].message.content");
  }
}

VlmResponse HttpBackend::complete(const VlmRequest& request) {
  const std::string digest = request_digest(request);
  const auto start = std::chrono::steady_clock::now();
  if (auto cached = cache_->get(digest)) {
    return VlmResponse{*cached, elapsed_s(start), BackendKind::Http, true};
  }

  // split "<scheme>://<host>[:port]<path>"
  const size_t scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    raise(ErrorCode::ConfigInvalid, "endpoint URL must include a scheme");
  }
  const size_t path_start = config_.url.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos
                               ? config_.url
                               : config_.url.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : config_.url.substr(path_start);

  const std::string body = render_chat_request_body(request);
  std::string failure = "no attempt made";
  bool timed_out = false;

  const int attempts = 1 + std::max(0, config_.max_retries);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const double backoff = std::min(
          config_.backoff_cap_s,
          config_.backoff_initial_s * std::pow(2.0, (double)(attempt - 1)));
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    }
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                  res.error() == httplib::Error::Read ||
                  res.error() == httplib::Error::Write;
      failure = httplib::to_string(res.error());
      continue;  // transport errors are retried
    }
    if (res->status >= 500) {
      failure = "status " + std::to_string(res->status);
      timed_out = false;
      continue;
    }
    if (res->status != 200) {
      raise(ErrorCode::BadStatus,
            "status " + std::to_string(res->status) + " from " + config_.url);
    }
    const std::string text = parse_chat_response_body(res->body);
    if (text.empty()) {
      raise(ErrorCode::BadStatus, "empty completion text");
    }
    cache_->put(digest, text);
    return VlmResponse{text, elapsed_s(start), BackendKind::Http, false};
  }
  if (timed_out) {
    raise(ErrorCode::Timeout, config_.url + ": " + failure);
  }
  raise(ErrorCode::EndpointUnreachable, config_.url + ": " + failure);
}

ReplayBackend::ReplayBackend(std::filesystem::path fixture_dir,
                             std::shared_ptr<ResponseCache> cache)
    : Backend(std::move(cache)), dir_(std::move(fixture_dir)) {}

VlmResponse ReplayBackend::complete(const VlmRequest& request) {
  const std::string digest = request_digest(request);
  const auto start = std::chrono::steady_clock::now();
  if (auto cached = cache_->get(digest)) {
    return VlmResponse{*cached, elapsed_s(start), BackendKind::Replay, true};
  }
  const auto path = dir_ / (digest + ".txt");
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::FixtureMissing,
          "no fixture " + digest + ".txt under " + dir_.string());
  }
  const std::string text = read_file(path);
  cache_->put(digest, text);
  return VlmResponse{text, elapsed_s(start), BackendKind::Replay, false};
}

void OracleConfig::validate() const {
  if (gt_actions.empty()) {
    raise(ErrorCode::ConfigInvalid, "oracle needs non-empty gt_actions");
  }
  for (const VCSample& s : gt_actions) kinematics::validate_sample(s);
  if (!(outlier_prob >= 0.0 && outlier_prob <= 1.0)) {
    raise(ErrorCode::ConfigInvalid, "outlier_prob must be in [0,1]");
  }
  if (speed_noise_std < 0.0 || curvature_noise_std < 0.0) {
    raise(ErrorCode::ConfigInvalid, "noise stds must be >= 0");
  }
}

VlmResponse oracle_respond(const OracleConfig& config, int sample_index) {
  config.validate();
  uint64_t state =
      mix_seed(config.seed, "sample-" + std::to_string(sample_index));
  const bool outlier = splitmix_unit(state) < config.outlier_prob;

  std::vector<VCSample> actions = config.gt_actions;
  if (outlier) {
    for (VCSample& a : actions) {
      a.speed *= config.outlier_scale;
      a.curvature = -a.curvature;
    }
  } else {
    for (VCSample& a : actions) {
      a.speed = std::max(
          0.0, a.speed + config.speed_noise_std * next_normal(state));
      a.curvature += config.curvature_noise_std * next_normal(state);
    }
  }

  std::string text;
  text += "## Step 1: Scene Description\n";
  text +=
      "Open terrain ahead; the marked regions show a drivable corridor with "
      "stable surface conditions.\n\n";
  text += "## Step 2: Object Description\n";
  text += "No blocking objects inside the planned corridor.\n\n";
  text += "## Step 3: Intent Description\n";
  text += "Follow the corridor at a steady pace, adjusting the turn rate as "
          "planned.\n\n";
  text += "## Step 4: Generate Motion\n";
  text += prompting::serialize_samples(actions);
  text += "\n";
  return VlmResponse{text, 0.0, BackendKind::Oracle, false};
}

OracleBackend::OracleBackend(OracleConfig config,
                             std::shared_ptr<ResponseCache> cache)
    : Backend(std::move(cache)), config_(std::move(config)) {}

void OracleBackend::register_actions(const std::string& group_digest,
                                     std::vector<VCSample> actions) {
  std::lock_guard lock(mu_);
  actions_by_group_[group_digest] = std::move(actions);
}

VlmResponse OracleBackend::complete(const VlmRequest& request) {
  const std::string group = request_group_digest(request);
  OracleConfig effective = config_;
  {
    std::lock_guard lock(mu_);
    auto it = actions_by_group_.find(group);
    if (it != actions_by_group_.end()) {
      effective.gt_actions = it->second;
    }
  }
  effective.seed = mix_seed(config_.seed, group);
  VlmResponse out = oracle_respond(effective, request.sample_index);
  out.backend = BackendKind::Oracle;
  return out;
}

}  // namespace offemma::vlm
