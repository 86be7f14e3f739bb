#include "llmreg/llm_replay.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/llm_live.hpp"

namespace llmreg {

using nlohmann::json;

ReplayStore::ReplayStore(const ReplayStore& other) {
  std::shared_lock lock(other.mutex_);
  by_hash_ = other.by_hash_;
}

ReplayStore& ReplayStore::operator=(const ReplayStore& other) {
  if (this != &other) {
    std::shared_lock their_lock(other.mutex_);
    auto copy = other.by_hash_;
    their_lock.unlock();
    std::unique_lock my_lock(mutex_);
    by_hash_ = std::move(copy);
  }
  return *this;
}

ReplayStore::ReplayStore(ReplayStore&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  by_hash_ = std::move(other.by_hash_);
}

ReplayStore& ReplayStore::operator=(ReplayStore&& other) noexcept {
  if (this != &other) {
    std::unique_lock their_lock(other.mutex_);
    auto moved = std::move(other.by_hash_);
    their_lock.unlock();
    std::unique_lock my_lock(mutex_);
    by_hash_ = std::move(moved);
  }
  return *this;
}

ReplayStore ReplayStore::parse_jsonl(const std::string& text, const std::string& origin) {
  ReplayStore store;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(origin + ":" + std::to_string(line_number) +
                       ": invalid transcript line: " + e.what());
    }
    LlmTranscript transcript;
    try {
      transcript.request_hash = record.at("hash").get<std::string>();
      transcript.response = record.at("response").get<std::string>();
      transcript.provider = record.value("provider", std::string{});
      transcript.timestamp = record.value("timestamp", std::string{});
    } catch (const json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(line_number) +
                       ": transcript record: " + e.what());
    }
    store.append(transcript);
  }
  return store;
}

ReplayStore ReplayStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open replay store: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_jsonl(buffer.str(), path);
}

ReplayStore ReplayStore::merge(const std::vector<std::string>& paths) {
  ReplayStore merged;
  std::vector<std::string> conflicts;
  for (const auto& path : paths) {
    ReplayStore store = load(path);
    std::shared_lock lock(store.mutex_);
    for (const auto& [hash, transcript] : store.by_hash_) {
      std::unique_lock merged_lock(merged.mutex_);
      auto it = merged.by_hash_.find(hash);
      if (it == merged.by_hash_.end()) {
        merged.by_hash_.emplace(hash, transcript);
      } else if (it->second.response != transcript.response) {
        conflicts.push_back(hash);
      }
      // identical duplicate: keep the first copy
    }
  }
  if (!conflicts.empty()) {
    std::string message = "conflicting transcripts for hashes:";
    for (const auto& hash : conflicts) message += " " + hash;
    throw ParseError(message);
  }
  return merged;
}

void ReplayStore::append(const LlmTranscript& transcript) {
  std::unique_lock lock(mutex_);
  auto it = by_hash_.find(transcript.request_hash);
  if (it != by_hash_.end()) {
    if (it->second.response != transcript.response) {
      throw ParseError("conflicting transcripts for hash " + transcript.request_hash);
    }
    return;
  }
  by_hash_.emplace(transcript.request_hash, transcript);
}

std::optional<std::string> ReplayStore::find(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = by_hash_.find(hash);
  if (it == by_hash_.end()) return std::nullopt;
  return it->second.response;
}

std::size_t ReplayStore::size() const {
  std::shared_lock lock(mutex_);
  return by_hash_.size();
}

std::string ReplayStore::to_jsonl() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& [hash, transcript] : by_hash_) {
    json record;
    record["hash"] = hash;
    record["response"] = transcript.response;
    record["provider"] = transcript.provider;
    record["timestamp"] = transcript.timestamp;
    out += record.dump();
    out += '\n';
  }
  return out;
}

void ReplayStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write replay store: " + path);
  out << to_jsonl();
}

std::string ReplayProvider::complete(const LlmRequest& request) {
  validate_request(request);
  const std::string hash = request_hash(request);
  if (auto response = store_.find(hash)) return *response;
  throw ReplayMissError(hash);
}

std::string RecordingProvider::complete(const LlmRequest& request) {
  const std::string response = inner_.complete(request);
  LlmTranscript transcript;
  transcript.request_hash = request_hash(request);
  transcript.response = response;
  transcript.provider = inner_.name();
  transcript.timestamp = utc_timestamp_now();
  sink_.append(transcript);
  return response;
}

}  // namespace llmreg
