#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "llmreg/categorize.hpp"
#include "llmreg/feature_expr.hpp"
#include "llmreg/llm.hpp"
#include "llmreg/registry.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

// The assembled design: base features and their transforms per category
// (the primed sets), plus the kept discovered interactions (the tilde sets),
// evaluated on the full table. Raw values; standardization happens per fit.
struct AugmentedTable {
  std::vector<FeatureExpr> columns;
  std::vector<std::string> names;      // canonical display names
  std::vector<Category> categories;    // per column
  Eigen::MatrixXd values;              // table rows x design columns

  Eigen::Index cols() const { return values.cols(); }
};

// A discovered candidate with its filter score.
struct DiscoveredFeature {
  FeatureExpr expr;
  double mean_abs_corr = 0.0;
  bool kept = false;
};

std::string build_discovery_prompt(const std::vector<FeatureModuleMeta>& subset,
                                   const IndicatorMeta& indicator, const std::string& country,
                                   const PromptTemplates& templates = PromptTemplates::builtin());

// Ranks candidates by the mean absolute Pearson correlation between the
// candidate column and the base columns of the candidate's category subset
// (computed on the full unlabeled table), and keeps ceil(k/100 * count) per
// category. Ties break by canonical name; constant columns score 0.
std::vector<DiscoveredFeature> filter_top_k(const std::vector<FeatureExpr>& candidates,
                                            const RegionTable& table,
                                            const std::vector<CategoryAssignment>& assignments,
                                            double k_percent);

struct AugmentOptions {
  double k_percent = 25.0;
  double temperature = 0.5;
  double top_p = 1.0;
  int repetition_index = 0;  // distinguishes ensemble candidates under replay
  bool discovery = true;
  bool transforms = true;
  std::string country;
  IndicatorMeta indicator;
  PromptTemplates templates = PromptTemplates::builtin();
};

struct AugmentResult {
  AugmentedTable table;
  std::vector<DiscoveredFeature> discovered;  // all parsed candidates with kept flags
  std::vector<std::string> warnings;
};

// Per category subset: one discovery call -> parse -> evaluate -> top-k filter
// gives the interactions; the transforms of every base feature (plus the base
// features themselves) give the primed set. A gateway failure downgrades the
// subset to transforms only. Irrelevant modules never enter the design.
AugmentResult augment(const RegionTable& table, const Registry& registry,
                      const std::vector<CategoryAssignment>& assignments,
                      LlmProvider* provider, const AugmentOptions& options);

// Base-features-only design (ablation paths). include_irrelevant keeps every
// table column with the Mixed category applied.
AugmentedTable base_design(const RegionTable& table,
                           const std::vector<CategoryAssignment>& assignments,
                           bool include_irrelevant);

// Discovered-feature list serialization:
// [{name, kind, operands, transform, category, kept, mean_abs_corr}]
std::string discovered_to_json(const std::vector<DiscoveredFeature>& discovered);
std::vector<DiscoveredFeature> discovered_from_json(const std::string& json_text);

}  // namespace llmreg
