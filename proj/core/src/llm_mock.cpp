#include "llmreg/llm_mock.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"

namespace llmreg {

using nlohmann::json;

bool MockRule::matches(const LlmRequest& request) const {
  if (tag && *tag != request.tag) return false;
  if (repetition_index && *repetition_index != request.repetition_index) return false;
  if (!prompt_contains.empty() &&
      request.prompt.find(prompt_contains) == std::string::npos) {
    return false;
  }
  return true;
}

std::string MockProvider::complete(const LlmRequest& request) {
  validate_request(request);
  for (const auto& rule : rules_) {
    if (rule.matches(request)) return rule.response;
  }
  if (fallback_) return *fallback_;
  throw TransportError("mock provider has no rule for " + to_string(request.tag) +
                       " request, repetition " + std::to_string(request.repetition_index));
}

MockProvider MockProvider::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("mock script is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("mock script must be a JSON object");
  MockProvider provider;
  if (doc.contains("fallback")) {
    provider.set_fallback(doc.at("fallback").get<std::string>());
  }
  for (const auto& entry : doc.value("rules", json::array())) {
    MockRule rule;
    if (!entry.contains("response")) {
      throw ParseError("mock rule is missing its response text");
    }
    if (entry.contains("tag")) {
      rule.tag = prompt_tag_from_string(entry.at("tag").get<std::string>());
    }
    if (entry.contains("repetition_index")) {
      rule.repetition_index = entry.at("repetition_index").get<int>();
    }
    rule.prompt_contains = entry.value("prompt_contains", std::string{});
    rule.response = entry.at("response").get<std::string>();
    provider.add_rule(std::move(rule));
  }
  return provider;
}

MockProvider MockProvider::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open mock script: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

}  // namespace llmreg
