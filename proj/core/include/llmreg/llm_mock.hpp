#pragma once

#include <optional>
#include <string>
#include <vector>

#include "llmreg/llm.hpp"

namespace llmreg {

// A scripted response: matches when every set field matches the request.
// prompt_contains is a plain substring test against the prompt.
struct MockRule {
  std::optional<PromptTag> tag;
  std::optional<int> repetition_index;
  std::string prompt_contains;
  std::string response;

  bool matches(const LlmRequest& request) const;
};

class MockProvider : public LlmProvider {
 public:
  MockProvider() = default;
  explicit MockProvider(std::vector<MockRule> rules,
                        std::optional<std::string> fallback = std::nullopt)
      : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

  static MockProvider from_json(const std::string& json_text);
  static MockProvider load(const std::string& path);

  void add_rule(MockRule rule) { rules_.push_back(std::move(rule)); }
  void set_fallback(std::string response) { fallback_ = std::move(response); }

  // First matching rule wins; falls back to the fallback response, or throws
  // TransportError when no rule matches and no fallback is set.
  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "mock"; }

 private:
  std::vector<MockRule> rules_;
  std::optional<std::string> fallback_;
};

}  // namespace llmreg
