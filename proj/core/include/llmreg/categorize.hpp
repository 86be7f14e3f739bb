#pragma once

#include <string>
#include <vector>

#include "llmreg/category.hpp"
#include "llmreg/llm.hpp"
#include "llmreg/registry.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

enum class VoteStatus { ok, parse_failed, transport_failed };

std::string to_string(VoteStatus s);

// One parsed self-consistency response. +1 / -1 / 0 mirror the three answer
// types; a vote carries a value only when parsing succeeded.
struct CorrelationVote {
  VoteStatus status = VoteStatus::parse_failed;
  int value = 0;  // +1, -1 or 0; meaningful only when status == ok
  std::string raw;

  static CorrelationVote positive(std::string raw = "");
  static CorrelationVote negative(std::string raw = "");
  static CorrelationVote zero(std::string raw = "");
  static CorrelationVote failed(std::string raw = "");
  static CorrelationVote transport_failure();
};

struct CategoryAssignment {
  std::string module;
  Category category = Category::irrelevant;
  std::vector<CorrelationVote> votes;  // exactly 5 for LLM-derived assignments
  std::string context;                 // country
  bool degenerate = false;             // oracle: constant feature column
};

// Prompt templates with <Module>-style placeholders. Template files live in a
// directory as categorize.txt / discover.txt; builtin() returns the bundled
// defaults.
struct PromptTemplates {
  std::string categorize;
  std::string discover;

  static PromptTemplates builtin();
  static PromptTemplates load_dir(const std::string& dir);
};

std::string build_categorization_prompt(const FeatureModuleMeta& module,
                                        const IndicatorMeta& indicator,
                                        const std::string& country,
                                        const PromptTemplates& templates = PromptTemplates::builtin());

// Scans for the last line of the form "Answer: ... Type A|B|C"
// (case-insensitive, surrounding prose tolerated). No match -> parse_failed.
CorrelationVote parse_vote(const std::string& response);

// Majority rule over exactly five vote slots:
//   >= 3 votes of +1          -> Positive
//   >= 3 votes of -1          -> Negative
//   exactly {+1 x2, -1 x2, 0} -> Mixed
//   anything else             -> Irrelevant
// Failed votes carry no value and can only push toward Irrelevant.
Category majority_vote(const std::vector<CorrelationVote>& votes);

constexpr int kVotesPerModule = 5;

struct CategorizeOptions {
  double temperature = 0.5;
  double top_p = 1.0;
  // Offset added to the vote index when forming repetition indices, so that
  // independent categorization sessions key distinct replay transcripts.
  int repetition_offset = 0;
  int workers = 1;
  PromptTemplates templates = PromptTemplates::builtin();
};

struct CategorizeResult {
  std::vector<CategoryAssignment> assignments;
  std::vector<std::string> warnings;
};

// Five completions per module (repetition indices offset..offset+4), parsed
// and aggregated. A module whose five calls all fail transport is flagged and
// treated Irrelevant.
CategorizeResult categorize_all(const Registry& registry, const IndicatorMeta& indicator,
                                const std::string& country, LlmProvider& provider,
                                const CategorizeOptions& options = {});

// Threshold oracle over the labeled table: Positive if Pearson > tau,
// Negative if < -tau, Mixed otherwise (three-way; no Irrelevant class).
// Constant columns are Mixed with the degenerate flag set.
std::vector<CategoryAssignment> oracle_categorize(const RegionTable& table, double tau);

// JSON round-trip: {country, indicator, assignments: [{module, category,
// degenerate, votes: [{type, raw_hash}]}]}.
std::string assignments_to_json(const std::vector<CategoryAssignment>& assignments,
                                const std::string& indicator);
std::vector<CategoryAssignment> assignments_from_json(const std::string& json_text);
void save_assignments(const std::vector<CategoryAssignment>& assignments,
                      const std::string& indicator, const std::string& path);
std::vector<CategoryAssignment> load_assignments(const std::string& path);

// Modules assigned to one category, in registry order.
std::vector<std::string> modules_in_category(const std::vector<CategoryAssignment>& assignments,
                                             Category category);

}  // namespace llmreg
