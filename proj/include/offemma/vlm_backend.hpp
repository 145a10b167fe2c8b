#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "offemma/errors.hpp"
#include "offemma/kinematics.hpp"
#include "offemma/prompting.hpp"

namespace offemma::vlm {

using kinematics::VCSample;

enum class BackendKind { Http, Replay, Oracle };

const char* backend_name(BackendKind kind);

struct VlmRequest {
  std::string model_id;
  prompting::PromptBundle prompt;
  std::string image;  // encoded attachment bytes (PNG)
  double temperature = 0.7;
  int sample_index = 0;
  int max_tokens = 1024;
};

struct VlmResponse {
  std::string text;
  double latency_s = 0.0;
  BackendKind backend = BackendKind::Replay;
  bool cache_hit = false;
};

// SHA-256 over (model_id, canonical prompt bytes, image bytes, temperature,
// sample_index). Fixtures and caches are keyed by this.
std::string request_digest(const VlmRequest& request);

// Same digest without sample_index; identifies the frame-level request that
// the N samples share.
std::string request_group_digest(const VlmRequest& request);

// All four stages rendered as one text block.
std::string render_user_text(const prompting::PromptBundle& bundle);

// Deterministic chat-completion JSON body for the request.
std::string render_chat_request_body(const VlmRequest& request);

// Thread-safe response cache; entries live in memory and, when a directory
// is given, as content-addressed <digest>.txt files.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& digest);
  void put(const std::string& digest, const std::string& text);

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::string> memory_;
  std::filesystem::path dir_;
};

struct SampleResult {
  int sample_index = 0;
  std::optional<VlmResponse> response;
  std::string error;  // empty on success
  std::optional<ErrorCode> error_code;

  bool ok() const { return response.has_value(); }
};

class Backend {
 public:
  explicit Backend(std::shared_ptr<ResponseCache> cache);
  virtual ~Backend() = default;

  virtual VlmResponse complete(const VlmRequest& request) = 0;
  virtual BackendKind kind() const = 0;

  // n responses with sample_index 0..n-1, ordered by sample_index. Requests
  // may run concurrently (bounded by max_in_flight); per-sample failures are
  // reported in place, never thrown.
  std::vector<SampleResult> sample_n(const VlmRequest& request_template, int n,
                                     int max_in_flight = 4);

 protected:
  std::shared_ptr<ResponseCache> cache_;
};

struct HttpConfig {
  std::string url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string api_key;  // empty -> OFFEMMA_API_KEY env var
  double timeout_s = 60.0;
  int max_retries = 3;  // retries after the first attempt, 5xx/timeouts only
  double backoff_initial_s = 0.5;
  double backoff_cap_s = 2.0;
};

class HttpBackend : public Backend {
 public:
  HttpBackend(HttpConfig config, std::shared_ptr<ResponseCache> cache);

  VlmResponse complete(const VlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Http; }

  static std::string parse_chat_response_body(const std::string& body);

 private:
  HttpConfig config_;
};

// Serves recorded responses from <fixture_dir>/<digest>.txt.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::filesystem::path fixture_dir,
                         std::shared_ptr<ResponseCache> cache = nullptr);

  VlmResponse complete(const VlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Replay; }

 private:
  std::filesystem::path dir_;
};

// Synthetic noisy responder used to test the self-consistency claim without
// a served model.
struct OracleConfig {
  std::vector<VCSample> gt_actions;
  double speed_noise_std = 0.0;      // m/s
  double curvature_noise_std = 0.0;  // 1/m
  double outlier_prob = 0.0;
  double outlier_scale = 1.0;
  uint64_t seed = 0;

  void validate() const;
};

// Deterministic given (cfg.seed, sample_index). With probability
// outlier_prob the reply scales speeds by outlier_scale and flips curvature
// signs; otherwise per-field Gaussian noise is added (speeds clamped at 0).
VlmResponse oracle_respond(const OracleConfig& config, int sample_index);

class OracleBackend : public Backend {
 public:
  explicit OracleBackend(OracleConfig config,
                         std::shared_ptr<ResponseCache> cache = nullptr);

  // Overrides gt_actions for requests whose group digest matches; the
  // effective seed also mixes in the group digest so frames decorrelate.
  void register_actions(const std::string& group_digest,
                        std::vector<VCSample> actions);

  VlmResponse complete(const VlmRequest& request) override;
  BackendKind kind() const override { return BackendKind::Oracle; }

 private:
  OracleConfig config_;
  std::mutex mu_;
  std::map<std::string, std::vector<VCSample>> actions_by_group_;
};

}  // namespace offemma::vlm
