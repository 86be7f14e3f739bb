#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

#include "llmreg/augment.hpp"
#include "llmreg/categorize.hpp"
#include "llmreg/solver.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

// One leave-p-out split over the shot rows; indices point into the shot list,
// not the table.
struct ValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// All leave-p-out splits with p = ceil(shot_count / 3): 3-shot gives the 3
// leave-one-out splits, 5-shot the 10 leave-two-out splits. Other counts
// follow the same rule (shot_count < 3 is an error). Lexicographic order.
std::vector<ValidationSplit> validation_splits(std::size_t shot_count);

// Deterministic round-robin k-fold splits, the scoring fallback when the
// shot set is large enough that exhaustive leave-p-out is intractable.
std::vector<ValidationSplit> fold_splits(std::size_t shot_count, std::size_t folds);

enum class CategorizerKind { llm, oracle };
enum class ConstraintMode { by_category, all_free, flipped };

struct EnsembleConfig {
  int candidate_pool = 10;
  int ensemble_size = 5;
  double lambda = 1.0;
  double k_percent = 25.0;
  double temperature = 0.5;
  double top_p = 1.0;
  bool categorize = true;   // false: keep every base feature, uncategorized
  bool discovery = true;
  bool transforms = true;
  CategorizerKind categorizer = CategorizerKind::llm;
  double oracle_tau = 0.1;
  ConstraintMode constraint_mode = ConstraintMode::by_category;
  // Reuse one categorization session for every candidate (discovery is still
  // re-sampled per candidate). Cuts live-call cost; off by default.
  bool share_categorization = false;
  int workers = 1;
  std::string country;
  IndicatorMeta indicator;
  PromptTemplates templates = PromptTemplates::builtin();
};

std::vector<SignConstraint> constraints_for(const AugmentedTable& design, ConstraintMode mode);

// Standardize on the given design rows, fit, and return a model whose
// predict() works on raw design rows. Throws on solver failure.
ConstrainedFit fit_design_rows(const AugmentedTable& design, const Eigen::VectorXd& labels,
                               const std::vector<std::size_t>& rows,
                               const std::vector<SignConstraint>& constraints, double lambda);

struct CandidateSummary {
  int index = 0;
  double validation_rmse = 0.0;  // +inf marks a disqualified candidate
  bool selected = false;
  int design_columns = 0;
  int discovered_total = 0;
  int discovered_kept = 0;
};

struct EnsembleModel {
  struct Member {
    ConstrainedFit fit;
    AugmentedTable design;  // evaluated over the full table
    std::vector<CategoryAssignment> assignments;
    std::vector<DiscoveredFeature> discovered;
    int candidate_index = 0;
  };
  std::vector<Member> members;
  std::vector<std::size_t> shot_rows;

  // Arithmetic mean of the member predictions at the given table rows.
  Eigen::VectorXd predict_rows(const std::vector<std::size_t>& rows) const;
};

struct EnsembleResult {
  EnsembleModel model;
  std::vector<CandidateSummary> candidates;
  std::vector<std::string> warnings;
  int validation_split_count = 0;
  EnsembleConfig config_echo;  // the configuration this ensemble was built with
};

// Score one candidate design: mean validation RMSE (label units) over the
// splits; any fit failure disqualifies the candidate with +inf.
double score_candidate(const AugmentedTable& design, const Eigen::VectorXd& labels,
                       const std::vector<std::size_t>& shots,
                       const std::vector<ValidationSplit>& splits,
                       const std::vector<SignConstraint>& constraints, double lambda,
                       std::vector<std::string>* warnings);

// The candidate-pool protocol: run categorization + discovery per candidate
// (fresh repetition indices keep replay transcripts distinct), score all by
// leave-p-out validation RMSE, keep the ensemble_size best (ties by candidate
// index), and retrain each winner on the full shot set.
EnsembleResult build_ensemble(const RegionTable& table, const Registry& registry,
                              const std::vector<std::size_t>& shots, LlmProvider* provider,
                              const EnsembleConfig& config);

}  // namespace llmreg
