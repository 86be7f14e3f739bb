#pragma once

#include <string>
#include <string_view>

namespace llmreg {

enum class PromptTag { categorize, discover };

std::string to_string(PromptTag tag);
PromptTag prompt_tag_from_string(std::string_view s);

// One chat-completion request. The repetition index distinguishes repeated
// calls with an identical prompt (the five self-consistency votes, and the
// per-candidate discovery calls), so replay can keep every response distinct.
struct LlmRequest {
  std::string prompt;
  double temperature = 0.5;
  double top_p = 1.0;
  int repetition_index = 0;
  PromptTag tag = PromptTag::categorize;
};

// Throws InvalidArgument unless temperature in [0,2], top_p in (0,1],
// repetition_index >= 0.
void validate_request(const LlmRequest& request);

// Stable digest of prompt + generation parameters + repetition index; the
// replay-store key. FNV-1a over a canonical serialization, hex-encoded.
std::string request_hash(const LlmRequest& request);

std::string fnv1a_hex(std::string_view data);

struct LlmTranscript {
  std::string request_hash;
  std::string response;
  std::string provider;
  std::string timestamp;  // empty for non-live providers
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;

  // Returns the raw response text. Throws TransportError (live, after bounded
  // retries) or ReplayMissError (replay). Implementations must tolerate
  // concurrent calls.
  virtual std::string complete(const LlmRequest& request) = 0;

  virtual std::string name() const = 0;
};

}  // namespace llmreg
