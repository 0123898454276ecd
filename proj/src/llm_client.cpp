// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "logprober/llm_client.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "logprober/config_file.hpp"
#include "logprober/errors.hpp"

namespace logprober {

namespace fs = std::filesystem;

void EndpointConfig::validate() const {
  const bool http = base_url.rfind("http://", 0) == 0;
  const bool https = base_url.rfind("https://", 0) == 0;
  const auto scheme_len = http ? 7u : 8u;
  if ((!http && !https) || base_url.size() <= scheme_len) {
    throw Error(ErrorKind::InvalidConfig, "base_url must be an http:// or https:// URL");
  }
  if (model.empty()) throw Error(ErrorKind::InvalidConfig, "model must be set");
  if (max_in_flight < 1) throw Error(ErrorKind::InvalidConfig, "max_in_flight must be at least 1");
  if (retries < 0) throw Error(ErrorKind::InvalidConfig, "retries must be nonnegative");
  if (timeout.count() <= 0) throw Error(ErrorKind::InvalidConfig, "timeout must be positive");
  if (logprob_base != 0.0 && !(logprob_base > 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "logprob_base must be 0 (natural) or > 1");
  }
}

EndpointConfig load_endpoint_config(const fs::path& path) {
  const Json doc = load_config_file(path);
  const Json& j = doc.contains("endpoint") ? doc.at("endpoint") : doc;
  EndpointConfig c;
  try {
    if (j.contains("base_url")) c.base_url = j.at("base_url").get<std::string>();
    if (j.contains("model")) c.model = j.at("model").get<std::string>();
    if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("max_in_flight")) c.max_in_flight = j.at("max_in_flight").get<int>();
    if (j.contains("retries")) c.retries = j.at("retries").get<int>();
    if (j.contains("timeout_s")) {
      c.timeout = std::chrono::milliseconds(std::llround(j.at("timeout_s").get<double>() * 1000.0));
    }
    if (j.contains("backoff_base_ms")) {
      c.backoff_base = std::chrono::milliseconds(j.at("backoff_base_ms").get<std::int64_t>());
    }
    if (j.contains("cache_dir")) {
      fs::path dir = j.at("cache_dir").get<std::string>();
      c.cache_dir = dir.is_relative() ? path.parent_path() / dir : dir;
    }
    if (j.contains("logprob_base")) {
      const auto& b = j.at("logprob_base");
      if (b.is_string()) {
        const auto s = b.get<std::string>();
        if (s == "e") {
          c.logprob_base = 0.0;
        } else {
          throw Error(ErrorKind::InvalidConfig, "logprob_base must be \"e\" or a number");
        }
      } else {
        c.logprob_base = b.get<double>();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

std::string request_fingerprint(std::string_view base_url, std::string_view model,
                                std::string_view kind, const Json& body) {
  std::string material;
  material.append(base_url).push_back('\n');
  material.append(model).push_back('\n');
  material.append(kind).push_back('\n');
  material.append(body.dump());  // object keys are sorted, so this is canonical

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

fs::path ResponseCache::path_for(const std::string& fingerprint) const {
  return dir_ / fingerprint.substr(0, 2) / (fingerprint + ".json");
}

std::optional<Json> ResponseCache::get(const std::string& fingerprint) const {
  const auto p = path_for(fingerprint);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return Json::parse(in);
  } catch (const Json::parse_error&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& fingerprint, const Json& record) const {
  const auto p = path_for(fingerprint);
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + p.parent_path().string());

  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const auto tmp = p.parent_path() / (fingerprint + ".tmp." + tag.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << record.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::IoError, "cannot move cache entry into " + p.string());
  }
}

namespace {

std::string strip_whitespace(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out += c;
  }
  return out;
}

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://") + 3;
  const auto slash = url.find('/', scheme_end);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

bool mentions_echo(const std::string& body) {
  std::string lower(body);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.find("echo") != std::string::npos;
}

}  // namespace

ScoredSequence parse_echo_response(const Json& response, std::string_view text,
                                   double logprob_base) {
  const auto& choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorKind::SchemaError, "response has no choices");
  }
  const Json& choice = choices->front();
  auto lp = choice.find("logprobs");
  if (lp == choice.end() || lp->is_null() || !lp->contains("tokens") ||
      !lp->contains("token_logprobs")) {
    throw Error(ErrorKind::EchoUnsupported, "response carries no prompt log-probabilities");
  }
  const Json& tokens = lp->at("tokens");
  const Json& values = lp->at("token_logprobs");
  if (!tokens.is_array() || !values.is_array() || tokens.size() != values.size()) {
    throw Error(ErrorKind::SchemaError, "tokens and token_logprobs differ in length");
  }
  if (tokens.empty()) {
    throw Error(ErrorKind::EchoUnsupported, "provider returned no prompt tokens");
  }

  const double scale = logprob_base == 0.0 ? 1.0 : std::log(logprob_base);
  ScoredSequence seq;
  seq.text = std::string(text);
  seq.tokens.reserve(tokens.size());
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_string()) throw Error(ErrorKind::SchemaError, "token is not a string");
    TokenScore t;
    t.index = i;
    t.token = tokens[i].get<std::string>();
    if (!values[i].is_null()) {
      if (!values[i].is_number()) throw Error(ErrorKind::SchemaError, "logprob is not a number");
      t.logprob = values[i].get<double>() * scale;
    }
    joined += t.token;
    seq.tokens.push_back(std::move(t));
  }
  if (strip_whitespace(joined) != strip_whitespace(text)) {
    throw Error(ErrorKind::SchemaError, "echoed tokens do not reconstruct the prompt");
  }
  if (auto m = response.find("model"); m != response.end() && m->is_string()) {
    seq.model = m->get<std::string>();
  }
  return seq;
}

LlmClient::LlmClient(EndpointConfig config) : config_(std::move(config)), cache_(config_.cache_dir) {
  config_.validate();
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

Json LlmClient::post_with_retry(const Json& body) {
  const auto [host, prefix] = split_url(config_.base_url);
  const std::string path = prefix + "/v1/completions";
  const std::string payload = body.dump();

  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::string last_error = "no attempt made";
  const int attempts = config_.retries + 1;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      // Full jitter: uniform in [0, min(timeout, base * 2^(attempt-1))].
      const double ceiling = std::min<double>(
          static_cast<double>(config_.timeout.count()),
          static_cast<double>(config_.backoff_base.count()) * std::ldexp(1.0, attempt - 1));
      std::uniform_real_distribution<double> jitter(0.0, ceiling);
      std::this_thread::sleep_for(std::chrono::microseconds(std::llround(jitter(rng) * 1000.0)));
    }

    httplib::Result res;
    {
      std::unique_lock lock(slots_mutex_);
      slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
      ++in_flight_;
    }
    try {
      httplib::Client cli(host);
      const auto secs = config_.timeout.count() / 1000;
      const auto usecs = (config_.timeout.count() % 1000) * 1000;
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      ++network_requests_;
      res = cli.Post(path, headers, payload, "application/json");
    } catch (...) {
      std::lock_guard lock(slots_mutex_);
      --in_flight_;
      slots_cv_.notify_one();
      throw;
    }
    {
      std::lock_guard lock(slots_mutex_);
      --in_flight_;
    }
    slots_cv_.notify_one();

    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status >= 400) {
      if (body.value("echo", false) && mentions_echo(res->body)) {
        throw Error(ErrorKind::EchoUnsupported, "provider rejected echo scoring (HTTP " +
                                                    std::to_string(status) + ")");
      }
      throw Error(ErrorKind::TransportError, "HTTP " + std::to_string(status));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::parse_error&) {
      throw Error(ErrorKind::SchemaError, "response body is not JSON");
    }
  }
  throw Error(ErrorKind::TransportError,
              last_error + " after " + std::to_string(attempts) + " attempt(s)");
}

Json LlmClient::cached_post(std::string_view kind, const Json& body, std::string& fingerprint) {
  fingerprint = request_fingerprint(config_.base_url, config_.model, kind, body);
  if (auto hit = cache_.get(fingerprint); hit && hit->contains("response")) {
    return hit->at("response");
  }
  Json response = post_with_retry(body);
  Json record{{"fingerprint", fingerprint},
              {"base_url", config_.base_url},
              {"model", config_.model},
              {"kind", kind},
              {"request", body},
              {"response", response}};
  cache_.put(fingerprint, record);
  return response;
}

ScoredSequence LlmClient::fetch_question_logprobs(const std::string& text) {
  if (text.empty()) throw Error(ErrorKind::InvalidConfig, "cannot score empty text");
  Json body{{"model", config_.model}, {"prompt", text}, {"max_tokens", 0},
            {"temperature", 0.0},     {"n", 1},         {"logprobs", 1},
            {"echo", true}};
  std::string fp;
  const Json response = cached_post("echo_logprobs", body, fp);
  auto seq = parse_echo_response(response, text, config_.logprob_base);
  if (seq.model.empty()) seq.model = config_.model;
  seq.fingerprint = std::move(fp);
  return seq;
}

std::vector<std::string> LlmClient::sample_completions(const std::string& prompt, int k,
                                                       double temperature, int max_tokens) {
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
  Json body{{"model", config_.model}, {"prompt", prompt}, {"max_tokens", max_tokens},
            {"temperature", temperature}, {"n", k}, {"echo", false}};
  std::string fp;
  const Json response = cached_post("completions", body, fp);

  auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array()) {
    throw Error(ErrorKind::SchemaError, "response has no choices array");
  }
  std::vector<std::pair<std::size_t, std::string>> indexed;
  for (std::size_t i = 0; i < choices->size(); ++i) {
    const Json& c = (*choices)[i];
    if (!c.contains("text") || !c.at("text").is_string()) {
      throw Error(ErrorKind::SchemaError, "choice without text");
    }
    indexed.emplace_back(c.value("index", i), c.at("text").get<std::string>());
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  out.reserve(indexed.size());
  for (auto& [_, t] : indexed) out.push_back(std::move(t));
  if (out.size() < static_cast<std::size_t>(k)) {
    throw PartialSamplesError(static_cast<std::size_t>(k), std::move(out));
  }
  out.resize(static_cast<std::size_t>(k));
  return out;
}

std::vector<std::string> LlmClient::complete(const CompletionRequest& request) {
  return sample_completions(request.prompt, request.n, request.temperature, request.max_tokens);
}

}  // namespace logprober
