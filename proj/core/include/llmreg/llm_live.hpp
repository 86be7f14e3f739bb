#pragma once

#include <string>

#include "llmreg/llm.hpp"

namespace llmreg {

// Chat-completion HTTP endpoint configuration. The credential is read from
// the environment variable named by auth_env at call time and sent as a
// bearer token; an empty auth_env sends no Authorization header.
struct LiveConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string auth_env = "OPENAI_API_KEY";
  int max_retries = 3;
  double backoff_base_seconds = 1.0;
  double timeout_seconds = 60.0;
};

// One HTTP POST per complete() call: {model, temperature, top_p, messages:
// [{role: "user", content: prompt}]}. Retries with exponential backoff and
// throws TransportError once attempts are exhausted.
class LiveProvider : public LlmProvider {
 public:
  explicit LiveProvider(LiveConfig config) : config_(std::move(config)) {}

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "live:" + config_.model; }

  const LiveConfig& config() const { return config_; }

 private:
  LiveConfig config_;
};

// RFC 3339 UTC timestamp, used when recording live transcripts.
std::string utc_timestamp_now();

}  // namespace llmreg
