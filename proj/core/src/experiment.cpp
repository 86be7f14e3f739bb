#include "llmreg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/report.hpp"
#include "llmreg/rng.hpp"

namespace llmreg {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kAblationVariants = {
    "simple_linear", "selection_only", "no_nonlinear", "no_constraints", "full"};

namespace {

std::string dataset_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

json provider_to_json(const ProviderConfig& p) {
  json doc;
  doc["kind"] = p.kind;
  doc["oracle_tau"] = p.oracle_tau;
  doc["replay_store"] = p.replay_store;
  doc["mock_script"] = p.mock_script;
  doc["record_to"] = p.record_to;
  doc["live"] = {
      {"base_url", p.live.base_url},
      {"path", p.live.path},
      {"model", p.live.model},
      {"auth_env", p.live.auth_env},
      {"max_retries", p.live.max_retries},
      {"backoff_base_seconds", p.live.backoff_base_seconds},
      {"timeout_seconds", p.live.timeout_seconds},
  };
  return doc;
}

ProviderConfig provider_from_json(const json& doc) {
  ProviderConfig p;
  p.kind = doc.value("kind", std::string("mock"));
  p.oracle_tau = doc.value("oracle_tau", 0.1);
  p.replay_store = doc.value("replay_store", std::string{});
  p.mock_script = doc.value("mock_script", std::string{});
  p.record_to = doc.value("record_to", std::string{});
  if (doc.contains("live")) {
    const auto& live = doc.at("live");
    p.live.base_url = live.value("base_url", p.live.base_url);
    p.live.path = live.value("path", p.live.path);
    p.live.model = live.value("model", p.live.model);
    p.live.auth_env = live.value("auth_env", p.live.auth_env);
    p.live.max_retries = live.value("max_retries", p.live.max_retries);
    p.live.backoff_base_seconds =
        live.value("backoff_base_seconds", p.live.backoff_base_seconds);
    p.live.timeout_seconds = live.value("timeout_seconds", p.live.timeout_seconds);
  }
  return p;
}

json finite_or_tag(double value) {
  if (std::isfinite(value)) return json(value);
  return json(value > 0 ? "inf" : "-inf");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  ExperimentConfig config;
  config.dataset = doc.value("dataset", std::string{});
  config.dataset_name = doc.value("dataset_name", std::string{});
  for (const auto& entry : doc.value("datasets", json::array())) {
    DatasetRef ref;
    if (!entry.contains("path")) throw ParseError("config dataset entry needs a path");
    ref.path = entry.at("path").get<std::string>();
    ref.name = entry.value("name", dataset_stem(ref.path));
    config.datasets.push_back(std::move(ref));
  }
  config.registry_path = doc.value("registry", std::string{});
  if (doc.contains("indicator")) {
    config.indicator.name = doc.at("indicator").value("name", std::string{});
    config.indicator.description = doc.at("indicator").value("description", std::string{});
  }
  config.country = doc.value("country", config.country);
  if (doc.contains("shot_settings")) {
    config.shot_settings = doc.at("shot_settings").get<std::vector<int>>();
  }
  config.runs = doc.value("runs", config.runs);
  config.seed = doc.value("seed", config.seed);
  config.k_percent = doc.value("k_percent", config.k_percent);
  config.lambda = doc.value("lambda", config.lambda);
  config.ensemble_size = doc.value("ensemble_size", config.ensemble_size);
  config.candidate_pool = doc.value("candidate_pool", config.candidate_pool);
  config.temperature = doc.value("temperature", config.temperature);
  config.top_p = doc.value("top_p", config.top_p);
  if (doc.contains("provider")) config.provider = provider_from_json(doc.at("provider"));
  config.ablation = doc.value("ablation", config.ablation);
  config.flip_constraints = doc.value("flip_constraints", config.flip_constraints);
  config.share_categorization =
      doc.value("share_categorization", config.share_categorization);
  config.workers = doc.value("workers", config.workers);
  config.mi_bins = doc.value("mi_bins", config.mi_bins);
  config.mi_on_shot_rows = doc.value("mi_on_shot_rows", config.mi_on_shot_rows);
  if (doc.contains("reliability_taus")) {
    config.reliability_taus = doc.at("reliability_taus").get<std::vector<double>>();
  }
  config.template_dir = doc.value("template_dir", std::string{});
  config.out_dir = doc.value("out_dir", config.out_dir);
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json(read_text_file(path));
}

std::string ExperimentConfig::to_json() const {
  json doc;
  doc["dataset"] = dataset;
  doc["dataset_name"] = dataset_name.empty() ? dataset_stem(dataset) : dataset_name;
  json datasets_json = json::array();
  for (const auto& ref : datasets) {
    datasets_json.push_back({{"name", ref.name}, {"path", ref.path}});
  }
  doc["datasets"] = std::move(datasets_json);
  doc["registry"] = registry_path;
  doc["indicator"] = {{"name", indicator.name}, {"description", indicator.description}};
  doc["country"] = country;
  doc["shot_settings"] = shot_settings;
  doc["runs"] = runs;
  doc["seed"] = seed;
  doc["k_percent"] = k_percent;
  doc["lambda"] = lambda;
  doc["ensemble_size"] = ensemble_size;
  doc["candidate_pool"] = candidate_pool;
  doc["temperature"] = temperature;
  doc["top_p"] = top_p;
  doc["provider"] = provider_to_json(provider);
  doc["ablation"] = ablation;
  doc["flip_constraints"] = flip_constraints;
  doc["share_categorization"] = share_categorization;
  doc["workers"] = workers;
  doc["mi_bins"] = mi_bins;
  doc["mi_on_shot_rows"] = mi_on_shot_rows;
  doc["reliability_taus"] = reliability_taus;
  doc["template_dir"] = template_dir;
  doc["out_dir"] = out_dir;
  return doc.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw InvalidArgument("config: runs must be >= 1");
  if (shot_settings.empty()) throw InvalidArgument("config: no shot settings");
  for (int s : shot_settings) {
    if (s < 3) throw InvalidArgument("config: shot settings must be >= 3");
  }
  if (candidate_pool < ensemble_size) {
    throw InvalidArgument("config: candidate pool must be >= ensemble size");
  }
  if (ensemble_size < 1) throw InvalidArgument("config: ensemble size must be >= 1");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw InvalidArgument("config: k_percent must lie in (0, 100]");
  }
  if (lambda < 0.0) throw InvalidArgument("config: lambda must be >= 0");
  if (provider.kind != "live" && provider.kind != "replay" && provider.kind != "mock" &&
      provider.kind != "oracle") {
    throw InvalidArgument("config: provider kind must be live/replay/mock/oracle");
  }
  const std::set<std::string> variants(kAblationVariants.begin(), kAblationVariants.end());
  if (!variants.count(ablation)) {
    throw InvalidArgument("config: unknown ablation variant \"" + ablation + "\"");
  }
}

LlmProvider* ProviderHandle::provider() const {
  if (recorder) return recorder.get();
  return base.get();
}

void ProviderHandle::flush() const {
  if (sink && !record_path.empty()) sink->save(record_path);
}

ProviderHandle make_provider(const ProviderConfig& config) {
  ProviderHandle handle;
  if (config.kind == "oracle") return handle;
  if (config.kind == "replay") {
    if (config.replay_store.empty()) {
      throw InvalidArgument("replay provider needs provider.replay_store in the config");
    }
    handle.base = std::make_unique<ReplayProvider>(ReplayStore::load(config.replay_store));
  } else if (config.kind == "mock") {
    if (config.mock_script.empty()) {
      handle.base = std::make_unique<MockProvider>();
    } else {
      handle.base = std::make_unique<MockProvider>(MockProvider::load(config.mock_script));
    }
  } else if (config.kind == "live") {
    handle.base = std::make_unique<LiveProvider>(config.live);
  } else {
    throw InvalidArgument("unknown provider kind: " + config.kind);
  }
  if (!config.record_to.empty() && config.kind != "replay") {
    // The store is append-only: accumulate into an existing file rather than
    // clobbering transcripts recorded by earlier commands.
    if (fs::exists(config.record_to)) {
      handle.sink = std::make_shared<ReplayStore>(ReplayStore::load(config.record_to));
    } else {
      handle.sink = std::make_shared<ReplayStore>();
    }
    handle.recorder = std::make_unique<RecordingProvider>(*handle.base, *handle.sink);
    handle.record_path = config.record_to;
  }
  return handle;
}

std::vector<std::size_t> sample_shots(const RegionTable& table, int shot_count,
                                      std::uint64_t run_seed) {
  if (shot_count < 1) throw InvalidArgument("sample_shots: shot count must be positive");
  if (static_cast<std::size_t>(table.rows()) <= static_cast<std::size_t>(shot_count)) {
    throw InvalidArgument("sample_shots: table needs more rows than shots");
  }
  Rng rng(run_seed);
  auto shots = rng.sample_without_replacement(static_cast<std::size_t>(table.rows()),
                                              static_cast<std::size_t>(shot_count));
  std::sort(shots.begin(), shots.end());
  return shots;
}

EnsembleConfig ensemble_config_for(const ExperimentConfig& config, const std::string& variant) {
  EnsembleConfig ec;
  ec.candidate_pool = config.candidate_pool;
  ec.ensemble_size = config.ensemble_size;
  ec.lambda = config.lambda;
  ec.k_percent = config.k_percent;
  ec.temperature = config.temperature;
  ec.top_p = config.top_p;
  ec.share_categorization = config.share_categorization;
  ec.workers = config.workers;
  ec.country = config.country;
  ec.indicator = config.indicator;
  ec.templates = config.template_dir.empty() ? PromptTemplates::builtin()
                                             : PromptTemplates::load_dir(config.template_dir);
  ec.categorizer = config.provider.kind == "oracle" ? CategorizerKind::oracle
                                                    : CategorizerKind::llm;
  ec.oracle_tau = config.provider.oracle_tau;

  if (variant == "simple_linear") {
    ec.categorize = false;
    ec.discovery = false;
    ec.transforms = false;
    ec.constraint_mode = ConstraintMode::all_free;
  } else if (variant == "selection_only") {
    ec.discovery = false;
    ec.transforms = false;
    ec.constraint_mode = ConstraintMode::all_free;
  } else if (variant == "no_nonlinear") {
    ec.discovery = false;
    ec.transforms = false;
    ec.constraint_mode = ConstraintMode::by_category;
  } else if (variant == "no_constraints") {
    ec.constraint_mode = ConstraintMode::all_free;
  } else if (variant == "full") {
    ec.constraint_mode = ConstraintMode::by_category;
  } else {
    throw InvalidArgument("unknown ablation variant \"" + variant + "\"");
  }
  if (config.flip_constraints && ec.constraint_mode == ConstraintMode::by_category) {
    ec.constraint_mode = ConstraintMode::flipped;
  }
  return ec;
}

namespace {

struct LoadedExperiment {
  Registry registry;
  RegionTable table;
  std::string dataset_name;
};

LoadedExperiment load_experiment(const ExperimentConfig& config) {
  LoadedExperiment loaded;
  loaded.registry = config.registry_path.empty() ? default_registry()
                                                 : load_registry(config.registry_path);
  loaded.table = load_table(config.dataset, loaded.registry, config.indicator.name);
  if (!loaded.table.labels) {
    throw InvalidArgument("dataset " + config.dataset + " has no \"" +
                          config.indicator.name + "\" label column");
  }
  loaded.dataset_name =
      config.dataset_name.empty() ? dataset_stem(config.dataset) : config.dataset_name;
  return loaded;
}

// A fully clamped model predicts a constant, for which Pearson is undefined;
// score such degenerate predictors as 0 linear association rather than abort.
double pearson_or_zero(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  try {
    return pearson(predictions, truth);
  } catch (const InvalidArgument&) {
    return 0.0;
  }
}

std::vector<std::size_t> complement_rows(const RegionTable& table,
                                         const std::vector<std::size_t>& shots) {
  const std::set<std::size_t> shot_set(shots.begin(), shots.end());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < static_cast<std::size_t>(table.rows()); ++r) {
    if (!shot_set.count(r)) rows.push_back(r);
  }
  return rows;
}

std::string manifest_json(const ExperimentConfig& config, const LoadedExperiment& loaded,
                          const PromptTemplates& templates) {
  json doc;
  doc["config"] = json::parse(config.to_json());
  json protocol;
  protocol["temperature"] = config.temperature;
  protocol["top_p"] = config.top_p;
  protocol["k_percent"] = config.k_percent;
  protocol["ensemble_size"] = config.ensemble_size;
  protocol["candidate_pool"] = config.candidate_pool;
  protocol["lambda"] = config.lambda;
  protocol["runs"] = config.runs;
  protocol["shot_settings"] = config.shot_settings;
  json splits;
  for (int s : config.shot_settings) {
    splits[std::to_string(s)] =
        static_cast<int>(validation_splits(static_cast<std::size_t>(s)).size());
  }
  protocol["validation_splits"] = std::move(splits);
  doc["protocol"] = std::move(protocol);
  json hashes;
  hashes["registry"] = fnv1a_hex(registry_to_json(loaded.registry));
  // hash the experiment identity: the output location is not part of it
  ExperimentConfig canonical = config;
  canonical.out_dir.clear();
  hashes["config"] = fnv1a_hex(canonical.to_json());
  hashes["prompt_categorize"] = fnv1a_hex(templates.categorize);
  hashes["prompt_discover"] = fnv1a_hex(templates.discover);
  doc["hashes"] = std::move(hashes);
  json dataset;
  dataset["name"] = loaded.dataset_name;
  dataset["path"] = config.dataset;
  dataset["rows"] = loaded.table.rows();
  dataset["features"] = loaded.table.cols();
  dataset["indicator"] = config.indicator.name;
  doc["dataset"] = std::move(dataset);
  return doc.dump(2) + "\n";
}

}  // namespace

std::string ensemble_manifest_json(const EnsembleResult& ensemble, const RunRecord& run,
                                   const std::vector<std::string>& member_fit_files) {
  json doc;
  doc["model"] = run.model;
  doc["shot_setting"] = run.shot_setting;
  doc["run_index"] = run.run_index;
  doc["run_seed"] = run.run_seed;
  doc["shot_rows"] = run.shot_rows;
  doc["validation_split_count"] = ensemble.validation_split_count;
  json candidates = json::array();
  for (const auto& candidate : ensemble.candidates) {
    candidates.push_back({
        {"index", candidate.index},
        {"validation_rmse", finite_or_tag(candidate.validation_rmse)},
        {"selected", candidate.selected},
        {"design_columns", candidate.design_columns},
        {"discovered_total", candidate.discovered_total},
        {"discovered_kept", candidate.discovered_kept},
    });
  }
  doc["candidates"] = std::move(candidates);
  json members = json::array();
  for (std::size_t m = 0; m < ensemble.model.members.size(); ++m) {
    const auto& member = ensemble.model.members[m];
    json entry;
    entry["candidate_index"] = member.candidate_index;
    entry["design_columns"] = member.design.cols();
    if (m < member_fit_files.size()) entry["fit_file"] = member_fit_files[m];
    members.push_back(std::move(entry));
  }
  doc["members"] = std::move(members);
  doc["warnings"] = ensemble.warnings;
  const EnsembleConfig& echo = ensemble.config_echo;
  doc["config"] = {
      {"candidate_pool", echo.candidate_pool},
      {"ensemble_size", echo.ensemble_size},
      {"lambda", echo.lambda},
      {"k_percent", echo.k_percent},
      {"temperature", echo.temperature},
      {"top_p", echo.top_p},
      {"categorize", echo.categorize},
      {"discovery", echo.discovery},
      {"transforms", echo.transforms},
      {"share_categorization", echo.share_categorization},
  };
  return doc.dump(2) + "\n";
}

namespace {

// Shared inner loop: runs (setting, run) cells for one pipeline variant on
// one dataset and returns the per-run records.
std::vector<RunRecord> run_variant(const ExperimentConfig& config,
                                   const LoadedExperiment& loaded, LlmProvider* provider,
                                   const std::string& variant,
                                   std::vector<std::string>* warnings,
                                   const std::string& artifact_dir) {
  const EnsembleConfig ensemble_config = ensemble_config_for(config, variant);
  std::vector<RunRecord> records;

  for (int setting : config.shot_settings) {
    for (int run = 0; run < config.runs; ++run) {
      const std::uint64_t run_seed =
          derive_seed(config.seed, {static_cast<std::uint64_t>(setting),
                                    static_cast<std::uint64_t>(run)});
      const auto shots = sample_shots(loaded.table, setting, run_seed);
      const auto test_rows = complement_rows(loaded.table, shots);

      EnsembleResult ensemble =
          build_ensemble(loaded.table, loaded.registry, shots, provider, ensemble_config);
      warnings->insert(warnings->end(), ensemble.warnings.begin(), ensemble.warnings.end());

      const Eigen::VectorXd predictions = ensemble.model.predict_rows(test_rows);
      Eigen::VectorXd truth(static_cast<Eigen::Index>(test_rows.size()));
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        truth(static_cast<Eigen::Index>(i)) =
            (*loaded.table.labels)(static_cast<Eigen::Index>(test_rows[i]));
      }

      RunRecord record;
      record.model = variant;
      record.shot_setting = setting;
      record.run_index = run;
      record.run_seed = run_seed;
      record.shot_rows = shots;
      record.test_pearson = pearson_or_zero(predictions, truth);
      record.test_rmse = rmse(predictions, truth);
      records.push_back(record);

      if (!artifact_dir.empty()) {
        const std::string stem = variant + "_" + std::to_string(setting) + "shot_run" +
                                 std::to_string(run);
        std::vector<std::string> fit_files;
        for (std::size_t m = 0; m < ensemble.model.members.size(); ++m) {
          const auto& member = ensemble.model.members[m];
          const std::string fit_file = stem + "_member" + std::to_string(m) + ".json";
          write_text_file(artifact_dir + "/" + fit_file,
                          fit_to_json(member.fit, member.design.names,
                                      member.design.categories));
          fit_files.push_back(fit_file);
        }
        write_text_file(artifact_dir + "/" + stem + "_ensemble.json",
                        ensemble_manifest_json(ensemble, record, fit_files));
      }
    }
  }
  return records;
}

std::vector<EvalCell> aggregate_cells(const std::vector<RunRecord>& records,
                                      const std::string& dataset_name,
                                      const std::string& indicator_name) {
  std::vector<EvalCell> cells;
  std::set<int> settings;
  for (const auto& record : records) settings.insert(record.shot_setting);
  for (int setting : settings) {
    EvalCell cell;
    cell.setting = std::to_string(setting) + "-shot";
    cell.dataset = dataset_name;
    cell.indicator = indicator_name;
    std::set<std::string> models;
    for (const auto& record : records) models.insert(record.model);
    for (const auto& model : models) {
      std::vector<double> pearsons, rmses;
      for (const auto& record : records) {
        if (record.shot_setting != setting || record.model != model) continue;
        pearsons.push_back(record.test_pearson);
        rmses.push_back(record.test_rmse);
      }
      const MeanSe p = mean_and_se(pearsons);
      const MeanSe r = mean_and_se(rmses);
      cell.models[model] = {p.mean, p.se, r.mean, r.se};
      cell.runs = static_cast<int>(pearsons.size());
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_metric_artifacts(const ExperimentConfig& config, const LoadedExperiment& loaded,
                            const std::vector<EvalCell>& cells) {
  if (config.out_dir.empty()) return;
  fs::create_directories(config.out_dir);
  const PromptTemplates templates = config.template_dir.empty()
                                        ? PromptTemplates::builtin()
                                        : PromptTemplates::load_dir(config.template_dir);
  write_text_file(config.out_dir + "/manifest.json",
                  manifest_json(config, loaded, templates));
  write_text_file(config.out_dir + "/metrics.json", eval_cells_to_json(cells));
  write_text_file(config.out_dir + "/metrics.csv", eval_cells_to_csv(cells));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LoadedExperiment loaded = load_experiment(config);
  const ProviderHandle provider = make_provider(config.provider);

  if (!config.out_dir.empty()) fs::create_directories(config.out_dir);

  ExperimentResult result;
  result.runs = run_variant(config, loaded, provider.provider(), config.ablation,
                            &result.warnings, config.out_dir);
  result.cells = aggregate_cells(result.runs, loaded.dataset_name, config.indicator.name);
  write_metric_artifacts(config, loaded, result.cells);
  provider.flush();
  return result;
}

ExperimentResult run_ablation(const ExperimentConfig& config, const std::string& variant) {
  ExperimentConfig variant_config = config;
  variant_config.ablation = variant;
  return run_experiment(variant_config);
}

ExperimentResult run_ablation_suite(const ExperimentConfig& config,
                                    const std::vector<std::string>& variants) {
  config.validate();
  const LoadedExperiment loaded = load_experiment(config);
  const ProviderHandle provider = make_provider(config.provider);
  if (!config.out_dir.empty()) fs::create_directories(config.out_dir);

  ExperimentResult result;
  for (const auto& variant : variants) {
    auto records = run_variant(config, loaded, provider.provider(), variant,
                               &result.warnings, config.out_dir);
    result.runs.insert(result.runs.end(), records.begin(), records.end());
  }
  result.cells = aggregate_cells(result.runs, loaded.dataset_name, config.indicator.name);
  write_metric_artifacts(config, loaded, result.cells);
  provider.flush();
  return result;
}

TransferResult run_transfer(const ExperimentConfig& config) {
  config.validate();
  if (config.datasets.size() < 1) {
    throw InvalidArgument("run_transfer: config.datasets must list the country datasets");
  }
  const Registry registry = config.registry_path.empty()
                                ? default_registry()
                                : load_registry(config.registry_path);
  const ProviderHandle provider = make_provider(config.provider);

  std::vector<RegionTable> tables;
  for (const auto& ref : config.datasets) {
    tables.push_back(load_table(ref.path, registry, config.indicator.name));
    if (!tables.back().labels) {
      throw InvalidArgument("transfer dataset " + ref.path + " has no label column");
    }
  }
  // Schema check: transfer needs identical feature sets.
  for (std::size_t i = 1; i < tables.size(); ++i) {
    if (tables[i].feature_names != tables[0].feature_names) {
      std::string missing;
      for (const auto& name : tables[0].feature_names) {
        if (std::find(tables[i].feature_names.begin(), tables[i].feature_names.end(),
                      name) == tables[i].feature_names.end()) {
          missing += " " + name;
        }
      }
      throw InvalidArgument("transfer schema mismatch for " + config.datasets[i].name +
                            ": missing columns" + missing);
    }
  }

  TransferResult result;
  for (const auto& ref : config.datasets) {
    result.sources.push_back(ref.name);
    result.targets.push_back(ref.name);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(tables.size());
  result.pearson.resize(n, n);

  // Full-shot training: every labeled source row is a shot; one shared
  // categorization session with the ten candidates varying only in discovery.
  EnsembleConfig ensemble_config = ensemble_config_for(config, config.ablation);
  ensemble_config.share_categorization = true;

  for (Eigen::Index source = 0; source < n; ++source) {
    const RegionTable& source_table = tables[static_cast<std::size_t>(source)];
    std::vector<std::size_t> all_rows(static_cast<std::size_t>(source_table.rows()));
    for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;

    EnsembleResult ensemble =
        build_ensemble(source_table, registry, all_rows, provider.provider(), ensemble_config);
    result.warnings.insert(result.warnings.end(), ensemble.warnings.begin(),
                           ensemble.warnings.end());

    for (Eigen::Index target = 0; target < n; ++target) {
      const RegionTable& target_table = tables[static_cast<std::size_t>(target)];

      // Re-evaluate every member design on the target table.
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(target_table.rows());
      for (const auto& member : ensemble.model.members) {
        Eigen::MatrixXd design(target_table.rows(), member.design.cols());
        for (std::size_t c = 0; c < member.design.columns.size(); ++c) {
          design.col(static_cast<Eigen::Index>(c)) =
              evaluate_expr(member.design.columns[c], target_table);
        }
        sum += predict(member.fit, design);
      }
      const Eigen::VectorXd predictions =
          sum / static_cast<double>(ensemble.model.members.size());

      const double r = pearson_or_zero(predictions, *target_table.labels);
      result.pearson(target, source) = r;

      EvalCell cell;
      cell.setting = "full-shot";
      cell.indicator = config.indicator.name;
      cell.dataset = config.datasets[static_cast<std::size_t>(source)].name + "->" +
                     config.datasets[static_cast<std::size_t>(target)].name;
      cell.runs = 1;
      ModelScore score;
      score.pearson_mean = r;
      score.rmse_mean = rmse(predictions, *target_table.labels);
      cell.models["transfer"] = score;
      result.cells.push_back(std::move(cell));
    }
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    json doc;
    doc["sources"] = result.sources;
    doc["targets"] = result.targets;
    json rows = json::array();
    for (Eigen::Index t = 0; t < result.pearson.rows(); ++t) {
      json row = json::array();
      for (Eigen::Index s = 0; s < result.pearson.cols(); ++s) {
        row.push_back(result.pearson(t, s));
      }
      rows.push_back(std::move(row));
    }
    doc["pearson"] = std::move(rows);
    write_text_file(config.out_dir + "/transfer.json", doc.dump(2) + "\n");
    write_text_file(config.out_dir + "/transfer_metrics.csv", eval_cells_to_csv(result.cells));
  }
  provider.flush();
  return result;
}

ExperimentResult run_sweep(const ExperimentConfig& config, const std::string& axis,
                           const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("run_sweep: no values given");
  if (axis != "k_percent" && axis != "ensemble_size") {
    throw InvalidArgument("run_sweep: axis must be k_percent or ensemble_size");
  }
  config.validate();
  const LoadedExperiment loaded = load_experiment(config);
  const ProviderHandle provider = make_provider(config.provider);
  if (!config.out_dir.empty()) fs::create_directories(config.out_dir);

  ExperimentResult result;
  for (double value : values) {
    ExperimentConfig point = config;
    if (axis == "k_percent") {
      point.k_percent = value;
    } else {
      point.ensemble_size = static_cast<int>(value);
      point.candidate_pool = std::max(point.candidate_pool, point.ensemble_size);
    }
    // Same master seed: shot samples are shared across sweep values, so the
    // comparison is paired.
    std::ostringstream label;
    label << axis << "=" << format_double(value);
    auto records = run_variant(point, loaded, provider.provider(), point.ablation,
                               &result.warnings, "");
    for (auto& record : records) record.model = label.str();
    result.runs.insert(result.runs.end(), records.begin(), records.end());
  }
  result.cells = aggregate_cells(result.runs, loaded.dataset_name, config.indicator.name);
  write_metric_artifacts(config, loaded, result.cells);
  provider.flush();
  return result;
}

ReliabilityReport run_reliability(const ExperimentConfig& config) {
  const Registry registry = config.registry_path.empty()
                                ? default_registry()
                                : load_registry(config.registry_path);
  std::vector<DatasetRef> datasets = config.datasets;
  if (datasets.empty() && !config.dataset.empty()) {
    datasets.push_back({config.dataset_name.empty() ? dataset_stem(config.dataset)
                                                    : config.dataset_name,
                        config.dataset});
  }
  if (datasets.empty()) {
    throw InvalidArgument("run_reliability: no datasets configured");
  }
  const ProviderHandle provider = make_provider(config.provider);

  ReliabilityReport report;
  for (const auto& ref : datasets) {
    const RegionTable table = load_table(ref.path, registry, config.indicator.name);
    if (!table.labels) {
      throw InvalidArgument("reliability dataset " + ref.path + " has no label column");
    }

    std::vector<CategoryAssignment> assignments;
    if (config.provider.kind == "oracle") {
      assignments = oracle_categorize(table, config.provider.oracle_tau);
    } else {
      CategorizeOptions options;
      options.temperature = config.temperature;
      options.top_p = config.top_p;
      options.workers = config.workers;
      CategorizeResult categorized = categorize_all(
          registry, config.indicator, config.country, *provider.provider(), options);
      assignments = std::move(categorized.assignments);
      report.warnings.insert(report.warnings.end(), categorized.warnings.begin(),
                             categorized.warnings.end());
    }

    ReliabilityReport::Row row;
    row.dataset = ref.name;
    row.jaccard = jaccard_reliability(assignments, table, config.reliability_taus);

    // MI difference needs discovered interactions, hence a (mock/replay/live)
    // discovery pass; oracle mode has no discovery to measure.
    if (config.provider.kind != "oracle") {
      AugmentOptions options;
      options.k_percent = config.k_percent;
      options.temperature = config.temperature;
      options.top_p = config.top_p;
      options.discovery = true;
      options.transforms = false;
      options.country = config.country;
      options.indicator = config.indicator;
      AugmentResult augmented =
          augment(table, registry, assignments, provider.provider(), options);
      report.warnings.insert(report.warnings.end(), augmented.warnings.begin(),
                             augmented.warnings.end());

      std::vector<Eigen::Index> kept_products;
      for (std::size_t c = 0; c < augmented.table.columns.size(); ++c) {
        if (augmented.table.columns[c].kind == FeatureExpr::Kind::product) {
          kept_products.push_back(static_cast<Eigen::Index>(c));
        }
      }
      if (!kept_products.empty()) {
        std::vector<std::size_t> mi_rows;
        if (config.mi_on_shot_rows) {
          const std::uint64_t run_seed = derive_seed(config.seed, {5, 0});
          mi_rows = sample_shots(table, 5, run_seed);
        } else {
          for (std::size_t r = 0; r < static_cast<std::size_t>(table.rows()); ++r) {
            mi_rows.push_back(r);
          }
        }
        Eigen::MatrixXd discovered(static_cast<Eigen::Index>(mi_rows.size()),
                                   static_cast<Eigen::Index>(kept_products.size()));
        for (std::size_t k = 0; k < kept_products.size(); ++k) {
          const Eigen::VectorXd full = augmented.table.values.col(kept_products[k]);
          for (std::size_t r = 0; r < mi_rows.size(); ++r) {
            discovered(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                full(static_cast<Eigen::Index>(mi_rows[r]));
          }
        }
        Eigen::MatrixXd original(static_cast<Eigen::Index>(mi_rows.size()), table.cols());
        Eigen::VectorXd labels(static_cast<Eigen::Index>(mi_rows.size()));
        for (std::size_t r = 0; r < mi_rows.size(); ++r) {
          original.row(static_cast<Eigen::Index>(r)) =
              table.values.row(static_cast<Eigen::Index>(mi_rows[r]));
          labels(static_cast<Eigen::Index>(r)) =
              (*table.labels)(static_cast<Eigen::Index>(mi_rows[r]));
        }
        row.mi = mi_difference_mean(discovered, original, labels, config.mi_bins);
      }
    }
    report.rows.push_back(std::move(row));
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/reliability.json", reliability_to_json(report));
    write_text_file(config.out_dir + "/reliability.txt", reliability_table_text(report));
  }
  provider.flush();
  return report;
}

std::string reliability_to_json(const ReliabilityReport& report) {
  json doc;
  json rows = json::array();
  for (const auto& row : report.rows) {
    json entry;
    entry["dataset"] = row.dataset;
    entry["jaccard"] = {
        {"positive", row.jaccard.positive},
        {"negative", row.jaccard.negative},
        {"mixed", row.jaccard.mixed},
    };
    if (row.mi) {
      entry["mi_difference"] = {
          {"mean_percent", row.mi->mean_percent},
          {"se_percent", row.mi->se_percent},
          {"count", row.mi->count},
      };
    }
    rows.push_back(std::move(entry));
  }
  doc["rows"] = std::move(rows);
  doc["warnings"] = report.warnings;
  return doc.dump(2) + "\n";
}

std::string reliability_table_text(const ReliabilityReport& report) {
  // Three category columns per dataset, mirroring the categorization
  // reliability table layout.
  std::ostringstream out;
  for (const auto& row : report.rows) {
    out << "  |" << row.dataset << ": P N M|";
  }
  out << "\n";
  for (const auto& row : report.rows) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "  |%s: %.3f %.3f %.3f|", row.dataset.c_str(),
                  row.jaccard.positive, row.jaccard.negative, row.jaccard.mixed);
    out << buffer;
  }
  out << "\n";
  return out.str();
}

}  // namespace llmreg
