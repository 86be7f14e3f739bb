#include "llmreg/categorize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/metrics.hpp"

namespace llmreg {

using nlohmann::json;

std::string to_string(Category c) {
  switch (c) {
    case Category::positive: return "Positive";
    case Category::negative: return "Negative";
    case Category::mixed: return "Mixed";
    case Category::irrelevant: return "Irrelevant";
  }
  return "Irrelevant";
}

Category category_from_string(std::string_view s) {
  if (s == "Positive") return Category::positive;
  if (s == "Negative") return Category::negative;
  if (s == "Mixed") return Category::mixed;
  if (s == "Irrelevant") return Category::irrelevant;
  throw ParseError("unknown category: " + std::string(s));
}

std::string to_string(VoteStatus s) {
  switch (s) {
    case VoteStatus::ok: return "ok";
    case VoteStatus::parse_failed: return "parse_failed";
    case VoteStatus::transport_failed: return "transport_failed";
  }
  return "parse_failed";
}

CorrelationVote CorrelationVote::positive(std::string raw) {
  return {VoteStatus::ok, +1, std::move(raw)};
}
CorrelationVote CorrelationVote::negative(std::string raw) {
  return {VoteStatus::ok, -1, std::move(raw)};
}
CorrelationVote CorrelationVote::zero(std::string raw) {
  return {VoteStatus::ok, 0, std::move(raw)};
}
CorrelationVote CorrelationVote::failed(std::string raw) {
  return {VoteStatus::parse_failed, 0, std::move(raw)};
}
CorrelationVote CorrelationVote::transport_failure() {
  return {VoteStatus::transport_failed, 0, ""};
}

namespace {

constexpr const char* kCategorizeTemplate =
    "Assign the correlation type between \"<Module>\" and \"<Indicator>\" in <Country>. "
    "Here, \"<Module>\" refers to <Module Definition> and \"<Indicator>\" refers to "
    "<Indicator Definition>. "
    "Think step by step, and YOU MUST DETERMINE one of the following types:\n"
    "\n"
    "Type A - Positively correlated (i.e., A higher value of \"<Module>\" leads to a "
    "higher value of \"<Indicator>\");\n"
    "Type B - Negatively correlated (i.e., A higher value of \"<Module>\" leads to a "
    "lower value of \"<Indicator>\");\n"
    "Type C - Completely not correlated.\n"
    "\n"
    "--- Response ---\n"
    "Explanation: [Explanation]\n"
    "Answer: [Type]\n";

constexpr const char* kDiscoverTemplate =
    "Find several new columns related to interactions within the module list for solving "
    "the following task. Generate non-duplicated new columns, prioritizing those that are "
    "most informative for solving the task. Think step by step for answers.\n"
    "\n"
    "Task description: Estimate \"<Indicator>\" in <Country>. Here, \"<Indicator>\" refers "
    "to <Indicator Definition>.\n"
    "\n"
    "Module list:\n"
    "<Module List>\n"
    "\n"
    "Refer to the possible interaction types below when generating new columns. "
    "If a single module is available, return the module itself.\n"
    "\n"
    "--- Possible types of interaction ---\n"
    "- (Module 1)*(Module 2)\n"
    "- ...\n"
    "- (Module 1)* ... *(Module m)\n"
    "\n"
    "--- Answers ---\n"
    "New column 1: COLUMN | EXPLANATION\n"
    "New column 2: ...\n";

void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open template file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

PromptTemplates PromptTemplates::builtin() {
  return {kCategorizeTemplate, kDiscoverTemplate};
}

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
  PromptTemplates t;
  t.categorize = read_file(dir + "/categorize.txt");
  t.discover = read_file(dir + "/discover.txt");
  return t;
}

std::string build_categorization_prompt(const FeatureModuleMeta& module,
                                        const IndicatorMeta& indicator,
                                        const std::string& country,
                                        const PromptTemplates& templates) {
  if (module.description.empty()) {
    throw InvalidArgument("module \"" + module.name + "\" has an empty description");
  }
  if (indicator.description.empty()) {
    throw InvalidArgument("indicator \"" + indicator.name + "\" has an empty description");
  }
  std::string prompt = templates.categorize;
  replace_all(prompt, "<Module Definition>", module.description);
  replace_all(prompt, "<Indicator Definition>", indicator.description);
  replace_all(prompt, "<Module>", module.name);
  replace_all(prompt, "<Indicator>", indicator.name);
  replace_all(prompt, "<Country>", country);
  return prompt;
}

CorrelationVote parse_vote(const std::string& response) {
  // Find the last line containing "answer" followed by "type" and a letter in
  // {A, B, C}. Hand-rolled scan: must never throw on arbitrary bytes.
  int found = 0;  // 0 = none, else +1/-1/2 (2 encodes zero)
  std::size_t start = 0;
  const std::size_t size = response.size();
  while (start <= size) {
    std::size_t end = response.find('\n', start);
    if (end == std::string::npos) end = size;
    std::string line = response.substr(start, end - start);
    std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    const std::size_t answer_pos = line.find("answer");
    if (answer_pos != std::string::npos) {
      std::size_t type_pos = line.find("type", answer_pos);
      while (type_pos != std::string::npos) {
        std::size_t cursor = type_pos + 4;
        while (cursor < line.size() &&
               (line[cursor] == ' ' || line[cursor] == ':' || line[cursor] == '-' ||
                line[cursor] == '\t')) {
          ++cursor;
        }
        if (cursor < line.size()) {
          const char letter = line[cursor];
          const bool boundary =
              cursor + 1 >= line.size() ||
              !std::isalnum(static_cast<unsigned char>(line[cursor + 1]));
          if (boundary && (letter == 'a' || letter == 'b' || letter == 'c')) {
            found = letter == 'a' ? +1 : letter == 'b' ? -1 : 2;
            break;
          }
        }
        type_pos = line.find("type", type_pos + 4);
      }
    }
    if (end == size) break;
    start = end + 1;
  }
  switch (found) {
    case +1: return CorrelationVote::positive(response);
    case -1: return CorrelationVote::negative(response);
    case 2: return CorrelationVote::zero(response);
    default: return CorrelationVote::failed(response);
  }
}

Category majority_vote(const std::vector<CorrelationVote>& votes) {
  if (votes.size() != kVotesPerModule) {
    throw InvalidArgument("majority_vote expects exactly 5 votes, got " +
                          std::to_string(votes.size()));
  }
  int positives = 0, negatives = 0, zeros = 0;
  for (const auto& vote : votes) {
    if (vote.status != VoteStatus::ok) continue;
    if (vote.value > 0) ++positives;
    else if (vote.value < 0) ++negatives;
    else ++zeros;
  }
  if (positives >= 3) return Category::positive;
  if (negatives >= 3) return Category::negative;
  if (positives == 2 && negatives == 2 && zeros == 1) return Category::mixed;
  return Category::irrelevant;
}

CategorizeResult categorize_all(const Registry& registry, const IndicatorMeta& indicator,
                                const std::string& country, LlmProvider& provider,
                                const CategorizeOptions& options) {
  CategorizeResult result;
  result.assignments.resize(registry.size());

  auto categorize_one = [&](std::size_t index) -> std::vector<std::string> {
    const auto& module = registry[index];
    const std::string prompt =
        build_categorization_prompt(module, indicator, country, options.templates);
    CategoryAssignment assignment;
    assignment.module = module.name;
    assignment.context = country;
    std::vector<std::string> warnings;
    int transport_failures = 0;
    for (int rep = 0; rep < kVotesPerModule; ++rep) {
      LlmRequest request;
      request.prompt = prompt;
      request.temperature = options.temperature;
      request.top_p = options.top_p;
      request.repetition_index = options.repetition_offset + rep;
      request.tag = PromptTag::categorize;
      try {
        assignment.votes.push_back(parse_vote(provider.complete(request)));
      } catch (const ReplayMissError&) {
        throw;  // a replay miss is a configuration error, never a soft failure
      } catch (const GatewayError& e) {
        ++transport_failures;
        warnings.push_back("module " + module.name + " vote " + std::to_string(rep) +
                           ": " + e.what());
        assignment.votes.push_back(CorrelationVote::transport_failure());
      }
    }
    if (transport_failures == kVotesPerModule) {
      warnings.push_back("module " + module.name +
                         ": all five calls failed transport; treated Irrelevant");
      assignment.category = Category::irrelevant;
      assignment.degenerate = true;
    } else {
      assignment.category = majority_vote(assignment.votes);
    }
    result.assignments[index] = std::move(assignment);
    return warnings;
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1 || registry.size() <= 1) {
    for (std::size_t i = 0; i < registry.size(); ++i) {
      auto warnings = categorize_one(i);
      result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());
    }
  } else {
    // Parallel across modules; results land in per-index slots so aggregation
    // order stays deterministic.
    std::vector<std::future<std::vector<std::string>>> futures;
    futures.reserve(registry.size());
    for (std::size_t i = 0; i < registry.size(); ++i) {
      futures.push_back(std::async(std::launch::async, categorize_one, i));
    }
    for (auto& f : futures) {
      auto warnings = f.get();
      result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());
    }
  }
  return result;
}

std::vector<CategoryAssignment> oracle_categorize(const RegionTable& table, double tau) {
  if (!table.labels) throw InvalidArgument("oracle_categorize requires a labeled table");
  if (!(tau > 0.0)) throw InvalidArgument("oracle_categorize requires tau > 0");

  std::vector<CategoryAssignment> assignments;
  assignments.reserve(table.feature_names.size());
  for (std::size_t c = 0; c < table.feature_names.size(); ++c) {
    CategoryAssignment assignment;
    assignment.module = table.feature_names[c];
    const Eigen::VectorXd column = table.values.col(static_cast<Eigen::Index>(c));
    try {
      const double r = pearson(column, *table.labels);
      assignment.category = r > tau    ? Category::positive
                            : r < -tau ? Category::negative
                                       : Category::mixed;
    } catch (const InvalidArgument&) {
      assignment.category = Category::mixed;
      assignment.degenerate = true;
    }
    assignments.push_back(std::move(assignment));
  }
  return assignments;
}

std::string assignments_to_json(const std::vector<CategoryAssignment>& assignments,
                                const std::string& indicator) {
  json doc;
  doc["indicator"] = indicator;
  json arr = json::array();
  for (const auto& assignment : assignments) {
    json entry;
    entry["module"] = assignment.module;
    entry["category"] = to_string(assignment.category);
    entry["country"] = assignment.context;
    entry["degenerate"] = assignment.degenerate;
    json votes = json::array();
    for (const auto& vote : assignment.votes) {
      json v;
      if (vote.status == VoteStatus::ok) {
        v["type"] = vote.value > 0 ? "A" : vote.value < 0 ? "B" : "C";
      } else {
        v["type"] = to_string(vote.status);
      }
      v["raw_hash"] = fnv1a_hex(vote.raw);
      votes.push_back(std::move(v));
    }
    entry["votes"] = std::move(votes);
    arr.push_back(std::move(entry));
  }
  doc["assignments"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<CategoryAssignment> assignments_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("assignments file is not valid JSON: ") + e.what());
  }
  std::vector<CategoryAssignment> assignments;
  if (!doc.contains("assignments") || !doc.at("assignments").is_array()) {
    throw ParseError("assignments file has no \"assignments\" array");
  }
  for (const auto& entry : doc.at("assignments")) {
    CategoryAssignment assignment;
    try {
      assignment.module = entry.at("module").get<std::string>();
      assignment.category = category_from_string(entry.at("category").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("assignments entry: ") + e.what());
    }
    assignment.context = entry.value("country", std::string{});
    assignment.degenerate = entry.value("degenerate", false);
    for (const auto& v : entry.value("votes", json::array())) {
      const std::string type = v.at("type").get<std::string>();
      if (type == "A") assignment.votes.push_back(CorrelationVote::positive());
      else if (type == "B") assignment.votes.push_back(CorrelationVote::negative());
      else if (type == "C") assignment.votes.push_back(CorrelationVote::zero());
      else if (type == "transport_failed")
        assignment.votes.push_back(CorrelationVote::transport_failure());
      else assignment.votes.push_back(CorrelationVote::failed());
    }
    assignments.push_back(std::move(assignment));
  }
  return assignments;
}

void save_assignments(const std::vector<CategoryAssignment>& assignments,
                      const std::string& indicator, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write assignments file: " + path);
  out << assignments_to_json(assignments, indicator);
}

std::vector<CategoryAssignment> load_assignments(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open assignments file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return assignments_from_json(buffer.str());
}

std::vector<std::string> modules_in_category(const std::vector<CategoryAssignment>& assignments,
                                             Category category) {
  std::vector<std::string> names;
  for (const auto& assignment : assignments) {
    if (assignment.category == category) names.push_back(assignment.module);
  }
  return names;
}

}  // namespace llmreg
