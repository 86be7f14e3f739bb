#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llmreg/ensemble.hpp"
#include "llmreg/llm_live.hpp"
#include "llmreg/llm_mock.hpp"
#include "llmreg/llm_replay.hpp"
#include "llmreg/metrics.hpp"
#include "llmreg/synthetic.hpp"

namespace llmreg {

struct ProviderConfig {
  std::string kind = "mock";  // live | replay | mock | oracle
  LiveConfig live;
  std::string replay_store;   // replay: JSONL path
  std::string mock_script;    // mock: JSON rules path (optional)
  double oracle_tau = 0.1;    // oracle: Pearson threshold on the full table
  std::string record_to;      // optional transcript sink (live/mock)
};

struct DatasetRef {
  std::string name;
  std::string path;
};

struct ExperimentConfig {
  std::string dataset;            // feature table CSV
  std::string dataset_name;       // defaults to the file stem
  std::vector<DatasetRef> datasets;  // multi-dataset commands (transfer, reliability)
  std::string registry_path;      // empty = bundled 26-module registry
  IndicatorMeta indicator;
  std::string country = "Testland";
  std::vector<int> shot_settings = {3, 5};
  int runs = 3;
  std::uint64_t seed = 0;
  double k_percent = 25.0;
  double lambda = 1.0;
  int ensemble_size = 5;
  int candidate_pool = 10;
  double temperature = 0.5;
  double top_p = 1.0;
  ProviderConfig provider;
  std::string ablation = "full";
  bool flip_constraints = false;
  bool share_categorization = false;
  int workers = 1;
  int mi_bins = 0;                // 0 = default binning
  bool mi_on_shot_rows = false;   // MI reliability on shot rows instead of all rows
  std::vector<double> reliability_taus = {0.05, 0.10, 0.15, 0.20};
  std::string template_dir;       // empty = builtin prompt templates
  std::string out_dir;

  static ExperimentConfig from_json(const std::string& json_text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;  // full echo with defaults filled in
  void validate() const;
};

// Provider assembled from config; owns any replay store / recording sink.
// provider() is null in oracle mode.
struct ProviderHandle {
  std::unique_ptr<LlmProvider> base;
  std::unique_ptr<RecordingProvider> recorder;
  std::shared_ptr<ReplayStore> sink;
  std::string record_path;

  LlmProvider* provider() const;
  void flush() const;  // writes the recorded transcripts, if any
};
ProviderHandle make_provider(const ProviderConfig& config);

// Uniform sample of shot_count row indices without replacement (ascending),
// deterministic under run_seed. The remaining rows are the test set.
std::vector<std::size_t> sample_shots(const RegionTable& table, int shot_count,
                                      std::uint64_t run_seed);

struct RunRecord {
  std::string model;
  int shot_setting = 0;
  int run_index = 0;
  std::uint64_t run_seed = 0;
  std::vector<std::size_t> shot_rows;
  double test_pearson = 0.0;
  double test_rmse = 0.0;
};

struct ExperimentResult {
  std::vector<EvalCell> cells;  // one per (dataset, setting)
  std::vector<RunRecord> runs;
  std::vector<std::string> warnings;
};

// The full loop: per (setting, run) sample shots, build the ensemble, predict
// the held-out rows, and aggregate Pearson/RMSE means with standard errors.
// Writes manifest + metrics + per-run ensemble artifacts when out_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Pipeline variants for the component analysis:
//   simple_linear   every base feature, no categorization, free weights
//   selection_only  drop Irrelevant, free weights, no discovery/transforms
//   no_nonlinear    categorized constraints, base features only
//   no_constraints  discovery + transforms, free weights
//   full            the complete pipeline
extern const std::vector<std::string> kAblationVariants;
ExperimentResult run_ablation(const ExperimentConfig& config, const std::string& variant);

// All variants on shared shot samples, merged into per-setting cells keyed by
// variant name (ready for a win matrix).
ExperimentResult run_ablation_suite(const ExperimentConfig& config,
                                    const std::vector<std::string>& variants);

// Full-shot training on the source dataset, Pearson evaluated on every
// target: returns one cell per (source, target) pair plus the Pearson matrix
// in source-major order.
struct TransferResult {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  Eigen::MatrixXd pearson;  // rows = targets, cols = sources
  std::vector<EvalCell> cells;
  std::vector<std::string> warnings;
};
TransferResult run_transfer(const ExperimentConfig& config);

// One-axis hyperparameter sweep with shared shot samples across values.
ExperimentResult run_sweep(const ExperimentConfig& config, const std::string& axis,
                           const std::vector<double>& values);

// Q3 reliability: Jaccard categorization agreement against the threshold
// oracle (averaged over the tau list) per dataset, plus the MI difference
// mean of the discovered interactions when discovery ran.
struct ReliabilityReport {
  struct Row {
    std::string dataset;
    JaccardScores jaccard;
    std::optional<MiDifference> mi;
  };
  std::vector<Row> rows;
  std::vector<std::string> warnings;
};
ReliabilityReport run_reliability(const ExperimentConfig& config);
std::string reliability_to_json(const ReliabilityReport& report);
std::string reliability_table_text(const ReliabilityReport& report);

// Ensemble manifest JSON (candidates, scores, selections, protocol echo).
std::string ensemble_manifest_json(const EnsembleResult& ensemble, const RunRecord& run,
                                   const std::vector<std::string>& member_fit_files);

EnsembleConfig ensemble_config_for(const ExperimentConfig& config, const std::string& variant);

}  // namespace llmreg
