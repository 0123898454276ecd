// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "logprober/cdd.hpp"
#include "logprober/types.hpp"

namespace logprober {

/// Environment variable the API key is read from. It is never accepted as a
/// flag and never written anywhere.
inline constexpr const char* kApiKeyEnv = "LOGPROBER_API_KEY";

struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env = kApiKeyEnv;
  int max_in_flight = 4;
  int retries = 3;
  std::chrono::milliseconds timeout{60'000};
  std::chrono::milliseconds backoff_base{500};
  std::filesystem::path cache_dir = ".logprober-cache";
  // Base the provider reports log-probabilities in; 0 means natural log.
  double logprob_base = 0.0;

  void validate() const;
};

/// Reads the endpoint file format documented in docs/formats.md.
EndpointConfig load_endpoint_config(const std::filesystem::path& path);

struct ScoredSequence {
  std::string text;
  std::vector<TokenScore> tokens;
  std::string model;
  std::string fingerprint;
};

/// Hex SHA-256 of the request identity. The API key is not part of it.
std::string request_fingerprint(std::string_view base_url, std::string_view model,
                                std::string_view kind, const Json& body);

/// Content-addressed store of raw responses:
/// {dir}/{first two hex chars}/{fingerprint}.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<Json> get(const std::string& fingerprint) const;
  /// Written to a temporary file first, then renamed into place.
  void put(const std::string& fingerprint, const Json& record) const;
  std::filesystem::path path_for(const std::string& fingerprint) const;

 private:
  std::filesystem::path dir_;
};

/// Parses an echo-scoring completions response. Throws EchoUnsupported when
/// the prompt's token log-probabilities are not present.
ScoredSequence parse_echo_response(const Json& response, std::string_view text,
                                   double logprob_base);

/// Client for POST {base_url}/v1/completions. Shareable across threads;
/// at most `max_in_flight` requests are on the wire at once.
class LlmClient : public CompletionSource {
 public:
  explicit LlmClient(EndpointConfig config);

  ScoredSequence fetch_question_logprobs(const std::string& text);
  std::vector<std::string> sample_completions(const std::string& prompt, int k,
                                              double temperature, int max_tokens);
  std::vector<std::string> complete(const CompletionRequest& request) override;

  const EndpointConfig& config() const noexcept { return config_; }
  /// HTTP requests actually sent, retries included.
  std::size_t network_requests() const noexcept { return network_requests_.load(); }

 private:
  Json cached_post(std::string_view kind, const Json& body, std::string& fingerprint);
  Json post_with_retry(const Json& body);

  EndpointConfig config_;
  ResponseCache cache_;
  std::string api_key_;
  std::atomic<std::size_t> network_requests_{0};

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

}  // namespace logprober
