#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "llmreg/augment.hpp"
#include "llmreg/categorize.hpp"
#include "llmreg/ensemble.hpp"
#include "llmreg/errors.hpp"
#include "llmreg/experiment.hpp"
#include "llmreg/metrics.hpp"
#include "llmreg/report.hpp"
#include "llmreg/solver.hpp"
#include "llmreg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace llmreg;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string provider;
  std::int64_t seed = -1;
  std::string out_dir;
  int workers = 0;
  std::string template_dir;
};

ExperimentConfig resolve_config(const GlobalOptions& options) {
  ExperimentConfig config;
  if (!options.config_path.empty()) {
    config = ExperimentConfig::load(options.config_path);
  }
  if (!options.provider.empty()) config.provider.kind = options.provider;
  if (options.seed >= 0) config.seed = static_cast<std::uint64_t>(options.seed);
  if (!options.out_dir.empty()) config.out_dir = options.out_dir;
  if (options.workers > 0) config.workers = options.workers;
  if (!options.template_dir.empty()) config.template_dir = options.template_dir;
  return config;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& warning : warnings) std::cerr << "warning: " << warning << "\n";
}

void print_cells(const std::vector<EvalCell>& cells) {
  for (const auto& cell : cells) {
    std::cout << cell.dataset << " / " << cell.indicator << " / " << cell.setting << " ("
              << cell.runs << " runs)\n";
    for (const auto& [model, score] : cell.models) {
      std::printf("  %-24s pearson %+.4f +- %.4f   rmse %.6g +- %.3g\n", model.c_str(),
                  score.pearson_mean, score.pearson_se, score.rmse_mean, score.rmse_se);
    }
  }
}

Registry config_registry(const ExperimentConfig& config) {
  return config.registry_path.empty() ? default_registry()
                                      : load_registry(config.registry_path);
}

std::string default_out(const ExperimentConfig& config, const std::string& name) {
  if (config.out_dir.empty()) return name;
  fs::create_directories(config.out_dir);
  return config.out_dir + "/" + name;
}

int cmd_synth(const std::string& spec_path, const std::string& table_out,
              const std::string& registry_out, const std::string& oracle_out) {
  const SyntheticSpec spec = SyntheticSpec::load(spec_path);
  const SyntheticData data = make_synthetic(spec);
  save_table(data.table, table_out);
  std::cout << "wrote " << table_out << " (" << data.table.rows() << " regions x "
            << data.table.cols() << " features)\n";
  if (!registry_out.empty()) {
    save_registry(data.registry, registry_out);
    std::cout << "wrote " << registry_out << "\n";
  }
  if (!oracle_out.empty()) {
    save_assignments(data.oracle, spec.indicator_name, oracle_out);
    std::cout << "wrote " << oracle_out << "\n";
  }
  return 0;
}

int cmd_categorize(const ExperimentConfig& config, const std::string& out_path) {
  const Registry registry = config_registry(config);
  std::vector<CategoryAssignment> assignments;
  std::vector<std::string> warnings;
  if (config.provider.kind == "oracle") {
    const RegionTable table = load_table(config.dataset, registry, config.indicator.name);
    assignments = oracle_categorize(table, config.provider.oracle_tau);
  } else {
    const ProviderHandle provider = make_provider(config.provider);
    CategorizeOptions options;
    options.temperature = config.temperature;
    options.top_p = config.top_p;
    options.workers = config.workers;
    options.templates = config.template_dir.empty()
                            ? PromptTemplates::builtin()
                            : PromptTemplates::load_dir(config.template_dir);
    CategorizeResult result = categorize_all(registry, config.indicator, config.country,
                                             *provider.provider(), options);
    assignments = std::move(result.assignments);
    warnings = std::move(result.warnings);
    provider.flush();
  }
  print_warnings(warnings);
  save_assignments(assignments, config.indicator.name, out_path);

  int counts[4] = {0, 0, 0, 0};
  for (const auto& a : assignments) counts[static_cast<int>(a.category)]++;
  std::cout << "wrote " << out_path << "  (Positive " << counts[0] << ", Negative "
            << counts[1] << ", Mixed " << counts[2] << ", Irrelevant " << counts[3]
            << ")\n";
  return 0;
}

int cmd_discover(const ExperimentConfig& config, const std::string& assignments_path,
                 const std::string& out_path) {
  const Registry registry = config_registry(config);
  const RegionTable table = load_table(config.dataset, registry, config.indicator.name);
  const auto assignments = load_assignments(assignments_path);
  const ProviderHandle provider = make_provider(config.provider);
  if (provider.provider() == nullptr) {
    throw InvalidArgument("discover needs an LLM provider (live, replay or mock)");
  }

  AugmentOptions options;
  options.k_percent = config.k_percent;
  options.temperature = config.temperature;
  options.top_p = config.top_p;
  options.transforms = false;  // this command reports the discovery step only
  options.country = config.country;
  options.indicator = config.indicator;
  options.templates = config.template_dir.empty()
                          ? PromptTemplates::builtin()
                          : PromptTemplates::load_dir(config.template_dir);
  const AugmentResult result = augment(table, registry, assignments, provider.provider(),
                                       options);
  print_warnings(result.warnings);
  write_text_file(out_path, discovered_to_json(result.discovered));
  int kept = 0;
  for (const auto& d : result.discovered) kept += d.kept ? 1 : 0;
  std::cout << "wrote " << out_path << "  (" << result.discovered.size()
            << " candidates, " << kept << " kept at k=" << config.k_percent << "%)\n";
  provider.flush();
  return 0;
}

int cmd_fit(const ExperimentConfig& config, const std::string& assignments_path,
            const std::string& discovered_path, bool transforms, int top_n,
            const std::string& fit_out, const std::string& report_out) {
  const Registry registry = config_registry(config);
  const RegionTable table = load_table(config.dataset, registry, config.indicator.name);
  if (!table.labels) throw InvalidArgument("fit requires a labeled table");
  const auto assignments = load_assignments(assignments_path);

  // Design: non-Irrelevant base features, their transforms, kept discoveries.
  std::vector<FeatureExpr> columns;
  for (const auto& name : table.feature_names) {
    for (const auto& assignment : assignments) {
      if (assignment.module != name || assignment.category == Category::irrelevant) continue;
      columns.push_back(FeatureExpr::base_feature(name, assignment.category));
      if (transforms) {
        for (Transform t : {Transform::log, Transform::sqrt, Transform::exp}) {
          columns.push_back(FeatureExpr::transform_of(t, name, assignment.category));
        }
      }
    }
  }
  if (!discovered_path.empty()) {
    for (const auto& feature : discovered_from_json(read_text_file(discovered_path))) {
      if (feature.kept) columns.push_back(feature.expr);
    }
  }
  if (columns.empty()) throw InvalidArgument("fit: empty design (everything Irrelevant?)");

  AugmentedTable design;
  design.values.resize(table.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    design.values.col(static_cast<Eigen::Index>(c)) = evaluate_expr(columns[c], table);
    design.names.push_back(columns[c].display_name());
    design.categories.push_back(columns[c].category);
  }
  design.columns = columns;

  std::vector<std::size_t> rows(static_cast<std::size_t>(table.rows()));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  const auto constraints = constraints_for(
      design, config.flip_constraints ? ConstraintMode::flipped : ConstraintMode::by_category);
  const ConstrainedFit model =
      fit_design_rows(design, *table.labels, rows, constraints, config.lambda);

  write_text_file(fit_out, fit_to_json(model, design.names, design.categories));
  const auto report = weights_report(model, design.names, design.categories, top_n);
  const std::string report_text = weights_report_text(report);
  write_text_file(report_out, report_text);
  std::cout << report_text;
  std::cout << "wrote " << fit_out << " and " << report_out << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& config) {
  const ExperimentResult result = run_experiment(config);
  print_warnings(result.warnings);
  print_cells(result.cells);
  if (!config.out_dir.empty()) std::cout << "artifacts in " << config.out_dir << "\n";
  return 0;
}

int cmd_ablate(const ExperimentConfig& config, const std::string& variant) {
  ExperimentResult result;
  std::vector<std::string> models;
  if (variant == "all") {
    result = run_ablation_suite(config, kAblationVariants);
    models = kAblationVariants;
  } else {
    result = run_ablation(config, variant);
    models = {variant};
  }
  print_warnings(result.warnings);
  print_cells(result.cells);
  if (models.size() > 1) {
    for (const char* metric : {"pearson", "rmse"}) {
      const WinMatrix matrix = win_matrix(result.cells, models, metric);
      save_win_matrix(matrix, default_out(config, std::string("win_") + metric + ".csv"),
                      default_out(config, std::string("win_") + metric + ".svg"));
    }
    std::cout << "win matrices written\n";
  }
  return 0;
}

int cmd_transfer(const ExperimentConfig& config) {
  const TransferResult result = run_transfer(config);
  print_warnings(result.warnings);
  std::cout << "transfer Pearson (rows = target, cols = source)\n        ";
  for (const auto& source : result.sources) std::printf("%10s", source.c_str());
  std::cout << "\n";
  for (Eigen::Index t = 0; t < result.pearson.rows(); ++t) {
    std::printf("%8s", result.targets[static_cast<std::size_t>(t)].c_str());
    for (Eigen::Index s = 0; s < result.pearson.cols(); ++s) {
      std::printf("%10.4f", result.pearson(t, s));
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const std::string& axis,
              const std::vector<double>& values) {
  const ExperimentResult result = run_sweep(config, axis, values);
  print_warnings(result.warnings);
  print_cells(result.cells);
  return 0;
}

int cmd_reliability(const ExperimentConfig& config) {
  const ReliabilityReport report = run_reliability(config);
  print_warnings(report.warnings);
  std::cout << reliability_table_text(report);
  for (const auto& row : report.rows) {
    if (row.mi) {
      std::printf("%s: MI difference mean %+.2f%% +- %.2f%% over %d discovered features\n",
                  row.dataset.c_str(), row.mi->mean_percent, row.mi->se_percent,
                  row.mi->count);
    }
  }
  if (!config.out_dir.empty()) std::cout << "report in " << config.out_dir << "\n";
  return 0;
}

int cmd_replay_merge(const std::vector<std::string>& stores, const std::string& out_path) {
  const ReplayStore merged = ReplayStore::merge(stores);
  merged.save(out_path);
  std::cout << "wrote " << out_path << " (" << merged.size() << " transcripts)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot tabular regression with LLM-guided sign constraints"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "experiment config JSON");
  app.add_option("--provider", global.provider, "provider override: live|replay|mock|oracle");
  app.add_option("--seed", global.seed, "master seed override");
  app.add_option("--out-dir", global.out_dir, "artifact directory override");
  app.add_option("--workers", global.workers, "worker thread count override");
  app.add_option("--template-dir", global.template_dir,
                 "directory with categorize.txt / discover.txt prompt templates");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a spec");
  std::string synth_spec, synth_table = "synthetic.csv", synth_registry, synth_oracle;
  synth->add_option("--spec", synth_spec, "synthetic spec JSON")->required();
  synth->add_option("--table-out", synth_table, "output CSV path");
  synth->add_option("--registry-out", synth_registry, "also write the registry JSON");
  synth->add_option("--oracle-out", synth_oracle, "also write the oracle assignments");

  // categorize
  auto* categorize = app.add_subcommand("categorize", "LLM module categorization");
  std::string categorize_out;
  categorize->add_option("--out", categorize_out, "assignments JSON output");

  // discover
  auto* discover = app.add_subcommand("discover", "LLM feature interaction discovery");
  std::string discover_assignments, discover_out;
  discover->add_option("--assignments", discover_assignments, "assignments JSON")->required();
  discover->add_option("--out", discover_out, "discovered features JSON output");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "train one constrained fit and report weights");
  std::string fit_assignments, fit_discovered, fit_out, fit_report;
  bool fit_transforms = true;
  int fit_top_n = 5;
  fit_cmd->add_option("--assignments", fit_assignments, "assignments JSON")->required();
  fit_cmd->add_option("--discovered", fit_discovered, "discovered features JSON");
  fit_cmd->add_flag("--transforms,!--no-transforms", fit_transforms,
                    "include log/sqrt/exp transform columns");
  fit_cmd->add_option("--top-n", fit_top_n, "weights report length");
  fit_cmd->add_option("--fit-out", fit_out, "fit JSON output");
  fit_cmd->add_option("--report-out", fit_report, "weights report output");

  // run / ablate / transfer / sweep / reliability
  auto* run = app.add_subcommand("run", "full few-shot experiment loop");
  auto* ablate = app.add_subcommand("ablate", "pipeline component ablations");
  std::string ablate_variant = "all";
  ablate->add_option("--variant", ablate_variant,
                     "simple_linear|selection_only|no_nonlinear|no_constraints|full|all");
  auto* transfer = app.add_subcommand("transfer", "cross-dataset transferability matrix");
  auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep");
  std::string sweep_axis = "k_percent";
  std::vector<double> sweep_values;
  sweep->add_option("--axis", sweep_axis, "k_percent|ensemble_size");
  sweep->add_option("--values", sweep_values, "axis values")->required();
  auto* reliability =
      app.add_subcommand("reliability", "categorization and discovery reliability analysis");

  // replay-merge
  auto* merge = app.add_subcommand("replay-merge", "merge replay transcript stores");
  std::vector<std::string> merge_stores;
  std::string merge_out = "merged.jsonl";
  merge->add_option("stores", merge_stores, "store paths")->required();
  merge->add_option("--out", merge_out, "merged store output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_spec, synth_table, synth_registry, synth_oracle);
    }
    if (merge->parsed()) return cmd_replay_merge(merge_stores, merge_out);

    ExperimentConfig config = resolve_config(global);
    if (categorize->parsed()) {
      const std::string out =
          categorize_out.empty() ? default_out(config, "assignments.json") : categorize_out;
      return cmd_categorize(config, out);
    }
    if (discover->parsed()) {
      const std::string out =
          discover_out.empty() ? default_out(config, "discovered.json") : discover_out;
      return cmd_discover(config, discover_assignments, out);
    }
    if (fit_cmd->parsed()) {
      const std::string out = fit_out.empty() ? default_out(config, "fit.json") : fit_out;
      const std::string report =
          fit_report.empty() ? default_out(config, "weights.txt") : fit_report;
      return cmd_fit(config, fit_assignments, fit_discovered, fit_transforms, fit_top_n,
                     out, report);
    }
    if (run->parsed()) return cmd_run(config);
    if (ablate->parsed()) return cmd_ablate(config, ablate_variant);
    if (transfer->parsed()) return cmd_transfer(config);
    if (sweep->parsed()) return cmd_sweep(config, sweep_axis, sweep_values);
    if (reliability->parsed()) return cmd_reliability(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
