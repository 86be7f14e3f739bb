#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "llmreg/llm.hpp"

namespace llmreg {

// Append-only transcript store backed by a JSON-lines file. Reads are
// lock-free after load; appends are serialized.
class ReplayStore {
 public:
  ReplayStore() = default;

  static ReplayStore load(const std::string& path);
  static ReplayStore parse_jsonl(const std::string& text, const std::string& origin);

  // Union of several stores. Identical (hash, response) pairs deduplicate;
  // a hash mapping to two different responses is a conflict and throws.
  static ReplayStore merge(const std::vector<std::string>& paths);

  void append(const LlmTranscript& transcript);  // conflict on divergent duplicate
  std::optional<std::string> find(const std::string& hash) const;
  std::size_t size() const;

  std::string to_jsonl() const;
  void save(const std::string& path) const;

 private:
  std::map<std::string, LlmTranscript> by_hash_;
  mutable std::shared_mutex mutex_;

 public:
  ReplayStore(const ReplayStore& other);
  ReplayStore& operator=(const ReplayStore& other);
  ReplayStore(ReplayStore&& other) noexcept;
  ReplayStore& operator=(ReplayStore&& other) noexcept;
};

// Deterministic provider: answers strictly from the store.
class ReplayProvider : public LlmProvider {
 public:
  explicit ReplayProvider(ReplayStore store) : store_(std::move(store)) {}

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "replay"; }

  const ReplayStore& store() const { return store_; }

 private:
  ReplayStore store_;
};

// Wraps any provider and records one transcript per successful call.
class RecordingProvider : public LlmProvider {
 public:
  RecordingProvider(LlmProvider& inner, ReplayStore& sink)
      : inner_(inner), sink_(sink) {}

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return inner_.name(); }

 private:
  LlmProvider& inner_;
  ReplayStore& sink_;
};

}  // namespace llmreg
