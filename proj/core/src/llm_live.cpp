#include "llmreg/llm_live.hpp"

#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <ctime>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmreg/errors.hpp"

namespace llmreg {

using nlohmann::json;

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[80];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                tm.tm_sec);
  return buffer;
}

namespace {

std::string extract_content(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("chat endpoint returned invalid JSON: ") + e.what());
  }
  if (!doc.contains("choices") || !doc.at("choices").is_array() ||
      doc.at("choices").empty()) {
    throw TransportError("chat endpoint response has no choices");
  }
  const auto& message = doc.at("choices").at(0).at("message");
  return message.at("content").get<std::string>();
}

}  // namespace

std::string LiveProvider::complete(const LlmRequest& request) {
  validate_request(request);

  json body;
  body["model"] = config_.model;
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;
  body["messages"] = json::array({
      json{{"role", "user"}, {"content", request.prompt}},
  });
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.auth_env.empty()) {
    const char* key = std::getenv(config_.auth_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw TransportError("credential environment variable " + config_.auth_env +
                           " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, config_.max_retries); ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_base_seconds * std::ldexp(1.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    try {
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
      client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
      auto result = client.Post(config_.path, headers, payload, "application/json");
      if (!result) {
        last_error = "connection failed: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status < 200 || result->status >= 300) {
        last_error = "HTTP status " + std::to_string(result->status);
        // 4xx other than 429 will not improve on retry
        if (result->status >= 400 && result->status < 500 && result->status != 429) {
          throw TransportError("chat endpoint rejected request: " + last_error + " " +
                               result->body);
        }
        continue;
      }
      return extract_content(result->body);
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw TransportError("chat request failed after " +
                       std::to_string(std::max(1, config_.max_retries)) +
                       " attempts: " + last_error);
}

}  // namespace llmreg
