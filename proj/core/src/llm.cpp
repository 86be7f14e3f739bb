#include "llmreg/llm.hpp"

#include <cstdint>

#include "llmreg/errors.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

std::string to_string(PromptTag tag) {
  return tag == PromptTag::categorize ? "categorize" : "discover";
}

PromptTag prompt_tag_from_string(std::string_view s) {
  if (s == "categorize") return PromptTag::categorize;
  if (s == "discover") return PromptTag::discover;
  throw ParseError("unknown prompt tag: " + std::string(s));
}

void validate_request(const LlmRequest& request) {
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw InvalidArgument("temperature must lie in [0, 2]");
  }
  if (!(request.top_p > 0.0 && request.top_p <= 1.0)) {
    throw InvalidArgument("top_p must lie in (0, 1]");
  }
  if (request.repetition_index < 0) {
    throw InvalidArgument("repetition_index must be non-negative");
  }
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

std::string request_hash(const LlmRequest& request) {
  // Unit separator keeps fields from bleeding into each other; float fields
  // use shortest round-trip formatting so the key is reproducible.
  std::string canonical;
  canonical.reserve(request.prompt.size() + 64);
  canonical += request.prompt;
  canonical += '\x1f';
  canonical += format_double(request.temperature);
  canonical += '\x1f';
  canonical += format_double(request.top_p);
  canonical += '\x1f';
  canonical += std::to_string(request.repetition_index);
  canonical += '\x1f';
  canonical += to_string(request.tag);
  return fnv1a_hex(canonical);
}

}  // namespace llmreg
