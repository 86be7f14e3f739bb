#include "llmreg/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "llmreg/errors.hpp"
#include "llmreg/metrics.hpp"

namespace llmreg {

namespace {

// Number of exhaustive leave-p-out splits beyond which scoring falls back to
// round-robin folds (full-shot training). C(10,3) = 120 still enumerates.
constexpr std::size_t kMaxExhaustiveSplits = 128;

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (std::size_t i = 0; i < k; ++i) {
    result = result * (n - i) / (i + 1);
  }
  return result;
}

}  // namespace

std::vector<ValidationSplit> validation_splits(std::size_t shot_count) {
  if (shot_count < 3) {
    throw InvalidArgument("validation_splits: need at least 3 shots, got " +
                          std::to_string(shot_count));
  }
  // ceil(n/3) validation samples: one for 3-shot, two for 5-shot.
  const std::size_t holdout = (shot_count + 2) / 3;

  std::vector<ValidationSplit> splits;
  std::vector<std::size_t> combo(holdout);
  std::iota(combo.begin(), combo.end(), 0);
  while (true) {
    ValidationSplit split;
    split.val = combo;
    for (std::size_t i = 0; i < shot_count; ++i) {
      if (std::find(combo.begin(), combo.end(), i) == combo.end()) {
        split.train.push_back(i);
      }
    }
    splits.push_back(std::move(split));

    // next lexicographic combination
    std::size_t i = holdout;
    while (i > 0) {
      --i;
      if (combo[i] != i + shot_count - holdout) break;
      if (i == 0) return splits;
    }
    if (combo[i] == i + shot_count - holdout) return splits;
    ++combo[i];
    for (std::size_t j = i + 1; j < holdout; ++j) combo[j] = combo[j - 1] + 1;
  }
}

std::vector<ValidationSplit> fold_splits(std::size_t shot_count, std::size_t folds) {
  if (folds < 2 || shot_count < folds) {
    throw InvalidArgument("fold_splits: need at least 2 folds and one shot per fold");
  }
  std::vector<ValidationSplit> splits(folds);
  for (std::size_t i = 0; i < shot_count; ++i) {
    const std::size_t fold = i % folds;
    for (std::size_t f = 0; f < folds; ++f) {
      if (f == fold) splits[f].val.push_back(i);
      else splits[f].train.push_back(i);
    }
  }
  return splits;
}

std::vector<SignConstraint> constraints_for(const AugmentedTable& design, ConstraintMode mode) {
  std::vector<SignConstraint> constraints;
  constraints.reserve(design.categories.size());
  for (Category c : design.categories) {
    SignConstraint constraint = constraint_for_category(c);
    if (mode == ConstraintMode::all_free) constraint = SignConstraint::unrestricted;
    else if (mode == ConstraintMode::flipped) constraint = flip(constraint);
    constraints.push_back(constraint);
  }
  return constraints;
}

ConstrainedFit fit_design_rows(const AugmentedTable& design, const Eigen::VectorXd& labels,
                               const std::vector<std::size_t>& rows,
                               const std::vector<SignConstraint>& constraints, double lambda) {
  const Standardizer standardizer = fit_standardizer(design.values, &labels, rows);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(rows.size()), design.values.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    raw.row(static_cast<Eigen::Index>(i)) = design.values.row(static_cast<Eigen::Index>(rows[i]));
    y(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(rows[i]));
  }
  return fit(standardizer.apply(raw), standardizer.apply_labels(y), constraints, lambda,
             standardizer, FitOptions{});
}

double score_candidate(const AugmentedTable& design, const Eigen::VectorXd& labels,
                       const std::vector<std::size_t>& shots,
                       const std::vector<ValidationSplit>& splits,
                       const std::vector<SignConstraint>& constraints, double lambda,
                       std::vector<std::string>* warnings) {
  double total = 0.0;
  for (const auto& split : splits) {
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i : split.train) train_rows.push_back(shots[i]);
    for (std::size_t i : split.val) val_rows.push_back(shots[i]);
    try {
      const ConstrainedFit model = fit_design_rows(design, labels, train_rows, constraints, lambda);
      Eigen::MatrixXd raw(static_cast<Eigen::Index>(val_rows.size()), design.values.cols());
      Eigen::VectorXd truth(static_cast<Eigen::Index>(val_rows.size()));
      for (std::size_t i = 0; i < val_rows.size(); ++i) {
        raw.row(static_cast<Eigen::Index>(i)) =
            design.values.row(static_cast<Eigen::Index>(val_rows[i]));
        truth(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(val_rows[i]));
      }
      total += rmse(predict(model, raw), truth);
    } catch (const Error& e) {
      if (warnings != nullptr) {
        warnings->push_back(std::string("candidate disqualified (split fit failed): ") +
                            e.what());
      }
      return std::numeric_limits<double>::infinity();
    }
  }
  return total / static_cast<double>(splits.size());
}

namespace {

struct CandidateBuild {
  AugmentedTable design;
  std::vector<CategoryAssignment> assignments;
  std::vector<DiscoveredFeature> discovered;
  std::vector<std::string> warnings;
};

CandidateBuild build_candidate(const RegionTable& table, const Registry& registry,
                               LlmProvider* provider, const EnsembleConfig& config,
                               int candidate_index,
                               const std::vector<CategoryAssignment>* shared_assignments) {
  CandidateBuild build;

  if (!config.categorize) {
    build.design = base_design(table, {}, /*include_irrelevant=*/true);
    return build;
  }

  if (shared_assignments != nullptr) {
    build.assignments = *shared_assignments;
  } else if (config.categorizer == CategorizerKind::oracle) {
    build.assignments = oracle_categorize(table, config.oracle_tau);
  } else {
    if (provider == nullptr) {
      throw InvalidArgument("build_ensemble: LLM categorization requires a provider");
    }
    CategorizeOptions options;
    options.temperature = config.temperature;
    options.top_p = config.top_p;
    options.repetition_offset = candidate_index * kVotesPerModule;
    options.workers = config.workers;
    options.templates = config.templates;
    CategorizeResult categorized =
        categorize_all(registry, config.indicator, config.country, *provider, options);
    build.assignments = std::move(categorized.assignments);
    build.warnings = std::move(categorized.warnings);
  }

  if (!config.discovery && !config.transforms) {
    build.design = base_design(table, build.assignments, /*include_irrelevant=*/false);
    return build;
  }

  AugmentOptions options;
  options.k_percent = config.k_percent;
  options.temperature = config.temperature;
  options.top_p = config.top_p;
  options.repetition_index = candidate_index;
  options.discovery = config.discovery && config.categorizer == CategorizerKind::llm;
  options.transforms = config.transforms;
  options.country = config.country;
  options.indicator = config.indicator;
  options.templates = config.templates;
  AugmentResult augmented = augment(table, registry, build.assignments, provider, options);
  build.design = std::move(augmented.table);
  build.discovered = std::move(augmented.discovered);
  build.warnings.insert(build.warnings.end(), augmented.warnings.begin(),
                        augmented.warnings.end());
  return build;
}

}  // namespace

Eigen::VectorXd EnsembleModel::predict_rows(const std::vector<std::size_t>& rows) const {
  if (members.empty()) throw InvalidArgument("ensemble has no members");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (const auto& member : members) {
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(rows.size()), member.design.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      raw.row(static_cast<Eigen::Index>(i)) =
          member.design.values.row(static_cast<Eigen::Index>(rows[i]));
    }
    sum += predict(member.fit, raw);
  }
  return sum / static_cast<double>(members.size());
}

EnsembleResult build_ensemble(const RegionTable& table, const Registry& registry,
                              const std::vector<std::size_t>& shots, LlmProvider* provider,
                              const EnsembleConfig& config) {
  if (!table.labels) throw InvalidArgument("build_ensemble requires a labeled table");
  if (shots.size() < 3) throw InvalidArgument("build_ensemble needs at least 3 shots");
  if (config.ensemble_size < 1 || config.candidate_pool < config.ensemble_size) {
    throw InvalidArgument("build_ensemble: candidate pool must cover the ensemble size");
  }

  EnsembleResult result;
  result.config_echo = config;
  const Eigen::VectorXd& labels = *table.labels;

  const std::size_t holdout = (shots.size() + 2) / 3;
  const std::vector<ValidationSplit> splits =
      binomial(shots.size(), holdout) <= kMaxExhaustiveSplits
          ? validation_splits(shots.size())
          : fold_splits(shots.size(), 3);
  result.validation_split_count = static_cast<int>(splits.size());

  // One shared categorization when configured (or when the categorizer is the
  // deterministic oracle: rerunning it per candidate changes nothing).
  std::vector<CategoryAssignment> shared;
  const bool share = config.share_categorization && config.categorize;
  if (share) {
    CandidateBuild first = build_candidate(table, registry, provider, config, 0, nullptr);
    shared = first.assignments;
  }

  std::vector<CandidateBuild> builds(static_cast<std::size_t>(config.candidate_pool));
  auto make_build = [&](int index) {
    return build_candidate(table, registry, provider, config, index,
                           share ? &shared : nullptr);
  };
  if (config.workers > 1 && config.candidate_pool > 1 &&
      config.categorizer == CategorizerKind::llm && config.categorize) {
    std::vector<std::future<CandidateBuild>> futures;
    for (int c = 0; c < config.candidate_pool; ++c) {
      futures.push_back(std::async(std::launch::async, make_build, c));
    }
    for (int c = 0; c < config.candidate_pool; ++c) {
      builds[static_cast<std::size_t>(c)] = futures[static_cast<std::size_t>(c)].get();
    }
  } else {
    for (int c = 0; c < config.candidate_pool; ++c) {
      builds[static_cast<std::size_t>(c)] = make_build(c);
    }
  }

  std::vector<double> scores(builds.size());
  for (std::size_t c = 0; c < builds.size(); ++c) {
    auto& build = builds[c];
    result.warnings.insert(result.warnings.end(), build.warnings.begin(),
                           build.warnings.end());
    const auto constraints = constraints_for(build.design, config.constraint_mode);
    scores[c] = score_candidate(build.design, labels, shots, splits, constraints,
                                config.lambda, &result.warnings);

    CandidateSummary summary;
    summary.index = static_cast<int>(c);
    summary.validation_rmse = scores[c];
    summary.design_columns = static_cast<int>(build.design.cols());
    summary.discovered_total = static_cast<int>(build.discovered.size());
    for (const auto& d : build.discovered) {
      if (d.kept) ++summary.discovered_kept;
    }
    result.candidates.push_back(summary);
  }

  std::size_t scoreable = 0;
  for (double s : scores) {
    if (std::isfinite(s)) ++scoreable;
  }
  if (scoreable < static_cast<std::size_t>(config.ensemble_size)) {
    throw Error("build_ensemble: only " + std::to_string(scoreable) +
                " scoreable candidates for an ensemble of " +
                std::to_string(config.ensemble_size));
  }

  // Lowest mean validation RMSE wins; ties break by candidate index.
  std::vector<std::size_t> order(builds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  result.model.shot_rows = shots;
  for (int rank = 0; rank < config.ensemble_size; ++rank) {
    const std::size_t c = order[static_cast<std::size_t>(rank)];
    result.candidates[c].selected = true;
    auto& build = builds[c];
    const auto constraints = constraints_for(build.design, config.constraint_mode);

    EnsembleModel::Member member;
    member.fit = fit_design_rows(build.design, labels, shots, constraints, config.lambda);
    member.design = std::move(build.design);
    member.assignments = std::move(build.assignments);
    member.discovered = std::move(build.discovered);
    member.candidate_index = static_cast<int>(c);
    result.model.members.push_back(std::move(member));
  }
  return result;
}

}  // namespace llmreg
