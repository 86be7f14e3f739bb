#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/experiment.hpp"
#include "llmreg/report.hpp"
#include "llmreg/synthetic.hpp"

using namespace llmreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

SyntheticSpec fixture_spec() {
  SyntheticSpec spec;
  spec.features = {{"p1", 3.0}, {"p2", 1.5}, {"n1", -2.0}, {"n2", -1.0}};
  spec.regions = 40;
  spec.seed = 2025;
  spec.noise_level = 0.0;
  spec.indicator_name = "POP";
  return spec;
}

// Writes the synthetic fixture to disk and returns a ready config.
ExperimentConfig fixture_config(const TempDir& dir, double noise = 0.0) {
  SyntheticSpec spec = fixture_spec();
  spec.noise_level = noise;
  const SyntheticData data = make_synthetic(spec);
  const std::string table_path = dir.str() + "/table.csv";
  const std::string registry_path = dir.str() + "/registry.json";
  save_table(data.table, table_path);
  save_registry(data.registry, registry_path);

  ExperimentConfig config;
  config.dataset = table_path;
  config.dataset_name = "synthetic";
  config.registry_path = registry_path;
  config.indicator = {"POP", "the number of inhabitants of a given region"};
  config.country = "Testland";
  config.shot_settings = {5};
  config.runs = 2;
  config.seed = 11;
  config.lambda = 0.0;
  config.provider.kind = "oracle";
  config.provider.oracle_tau = 0.05;
  config.ablation = "no_nonlinear";
  return config;
}

}  // namespace

TEST_CASE("config JSON round-trips with defaults filled") {
  ExperimentConfig config;
  config.dataset = "/tmp/data.csv";
  config.indicator = {"POP", "population"};
  const std::string echo = config.to_json();
  const ExperimentConfig parsed = ExperimentConfig::from_json(echo);
  CHECK(parsed.dataset == config.dataset);
  CHECK(parsed.shot_settings == std::vector<int>{3, 5});
  CHECK(parsed.runs == 3);
  CHECK(parsed.k_percent == 25.0);
  CHECK(parsed.ensemble_size == 5);
  CHECK(parsed.candidate_pool == 10);
  CHECK(parsed.temperature == 0.5);
  CHECK(parsed.top_p == 1.0);
  CHECK(parsed.to_json() == echo);
}

TEST_CASE("config validation") {
  ExperimentConfig config;
  config.runs = 0;
  CHECK_THROWS_AS(config.validate(), InvalidArgument);
  config = ExperimentConfig{};
  config.shot_settings = {2};
  CHECK_THROWS_AS(config.validate(), InvalidArgument);
  config = ExperimentConfig{};
  config.candidate_pool = 3;
  CHECK_THROWS_AS(config.validate(), InvalidArgument);
  config = ExperimentConfig{};
  config.ablation = "bogus";
  CHECK_THROWS_AS(config.validate(), InvalidArgument);
  config = ExperimentConfig{};
  config.provider.kind = "psychic";
  CHECK_THROWS_AS(config.validate(), InvalidArgument);
}

TEST_CASE("sample_shots is deterministic, seed-sensitive, and bounded") {
  SyntheticSpec spec = fixture_spec();
  const SyntheticData data = make_synthetic(spec);

  const auto first = sample_shots(data.table, 5, 42);
  const auto second = sample_shots(data.table, 5, 42);
  CHECK(first == second);
  CHECK(first.size() == 5);
  CHECK(std::set<std::size_t>(first.begin(), first.end()).size() == 5);
  for (std::size_t row : first) CHECK(row < 40);

  const auto other_seed = sample_shots(data.table, 5, 43);
  CHECK(first != other_seed);

  CHECK_THROWS_AS(sample_shots(data.table, 40, 1), InvalidArgument);
}

TEST_CASE("oracle-mode experiment on noise-free synthetic recovers the generator") {
  TempDir dir("llmreg_exp_oracle");
  ExperimentConfig config = fixture_config(dir);
  const ExperimentResult result = run_experiment(config);
  REQUIRE(result.cells.size() == 1);
  const ModelScore& score = result.cells[0].models.at("no_nonlinear");
  CHECK(score.pearson_mean > 0.999);
  CHECK(score.rmse_mean < 1e-3);
  CHECK(result.cells[0].runs == 2);
}

TEST_CASE("shot rows never leak into the test rows") {
  TempDir dir("llmreg_exp_leak");
  ExperimentConfig config = fixture_config(dir);
  const ExperimentResult result = run_experiment(config);
  for (const auto& record : result.runs) {
    CHECK(record.shot_rows.size() == 5);
    // metrics computed on 35 = 40 - 5 rows; indirectly assert by Pearson being
    // defined (needs >= 2 points) and the sample sizes matching the complement
    const std::set<std::size_t> shot_set(record.shot_rows.begin(), record.shot_rows.end());
    CHECK(shot_set.size() == 5);
  }
}

TEST_CASE("flipped constraints are strictly worse on noisy synthetic data") {
  TempDir dir("llmreg_exp_flip");
  ExperimentConfig config = fixture_config(dir, 0.05);
  config.runs = 1;
  config.lambda = 0.1;

  int correct_wins = 0;
  for (int pair = 0; pair < 5; ++pair) {
    config.seed = 100 + static_cast<std::uint64_t>(pair);
    config.flip_constraints = false;
    const double correct_rmse =
        run_experiment(config).cells[0].models.at("no_nonlinear").rmse_mean;
    config.flip_constraints = true;
    const double flipped_rmse =
        run_experiment(config).cells[0].models.at("no_nonlinear").rmse_mean;
    if (correct_rmse < flipped_rmse) ++correct_wins;
  }
  CHECK(correct_wins >= 4);
}

TEST_CASE("experiment artifacts are byte-identical across reruns") {
  TempDir dir_a("llmreg_exp_rerun_a");
  TempDir dir_b("llmreg_exp_rerun_b");
  TempDir data_dir("llmreg_exp_rerun_data");

  ExperimentConfig config = fixture_config(data_dir);
  config.out_dir = dir_a.str();
  run_experiment(config);
  config.out_dir = dir_b.str();
  run_experiment(config);

  for (const char* name : {"metrics.json", "metrics.csv",
                           "no_nonlinear_5shot_run0_ensemble.json",
                           "no_nonlinear_5shot_run1_ensemble.json",
                           "no_nonlinear_5shot_run0_member0.json"}) {
    const std::string a = read_text_file(dir_a.str() + "/" + name);
    const std::string b = read_text_file(dir_b.str() + "/" + name);
    CHECK(a == b);
  }
  // standardizers must be fitted on the shot rows only: recompute the
  // per-column means over the manifest's shot rows and compare
  {
    const auto manifest = nlohmann::json::parse(
        read_text_file(dir_a.str() + "/no_nonlinear_5shot_run0_ensemble.json"));
    const auto shot_rows = manifest.at("shot_rows").get<std::vector<std::size_t>>();
    const auto fit_doc = nlohmann::json::parse(
        read_text_file(dir_a.str() + "/no_nonlinear_5shot_run0_member0.json"));
    const auto means = fit_doc.at("standardizer").at("mean").get<std::vector<double>>();

    const Registry registry = load_registry(data_dir.str() + "/registry.json");
    const RegionTable table = load_table(data_dir.str() + "/table.csv", registry, "POP");
    REQUIRE(means.size() == static_cast<std::size_t>(table.cols()));
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      double shot_mean = 0.0;
      for (std::size_t r : shot_rows) {
        shot_mean += table.values(static_cast<Eigen::Index>(r), c);
      }
      shot_mean /= static_cast<double>(shot_rows.size());
      CHECK(means[static_cast<std::size_t>(c)] == doctest::Approx(shot_mean).epsilon(1e-12));
    }
  }

  // manifests differ only in the echoed out_dir; normalize and compare
  std::string manifest_a = read_text_file(dir_a.str() + "/manifest.json");
  std::string manifest_b = read_text_file(dir_b.str() + "/manifest.json");
  const auto scrub = [](std::string text, const std::string& dir) {
    std::size_t pos;
    while ((pos = text.find(dir)) != std::string::npos) text.replace(pos, dir.size(), "X");
    return text;
  };
  CHECK(scrub(manifest_a, dir_a.str()) == scrub(manifest_b, dir_b.str()));
}

TEST_CASE("ablation variants change the design as specified") {
  TempDir dir("llmreg_exp_ablate");
  ExperimentConfig config = fixture_config(dir);
  config.runs = 1;
  config.out_dir = dir.str() + "/out";

  SUBCASE("no_nonlinear exposes exactly the non-irrelevant base features") {
    run_ablation(config, "no_nonlinear");
    const std::string manifest =
        read_text_file(config.out_dir + "/no_nonlinear_5shot_run0_ensemble.json");
    CHECK(manifest.find("\"design_columns\": 4") != std::string::npos);
  }

  SUBCASE("no_constraints trains free weights only") {
    run_ablation(config, "no_constraints");
    const std::string fit_json =
        read_text_file(config.out_dir + "/no_constraints_5shot_run0_member0.json");
    CHECK(fit_json.find("non_negative") == std::string::npos);
    CHECK(fit_json.find("non_positive") == std::string::npos);
    CHECK(fit_json.find("free") != std::string::npos);
  }

  SUBCASE("variant full equals run_experiment on identical seeds") {
    ExperimentConfig full_config = config;
    full_config.ablation = "full";
    // oracle provider: discovery is skipped, transforms still apply
    const ExperimentResult direct = run_experiment(full_config);
    const ExperimentResult via_ablate = run_ablation(config, "full");
    CHECK(direct.cells[0].models.at("full").pearson_mean ==
          via_ablate.cells[0].models.at("full").pearson_mean);
    CHECK(direct.cells[0].models.at("full").rmse_mean ==
          via_ablate.cells[0].models.at("full").rmse_mean);
  }

  SUBCASE("unknown variant is rejected") {
    CHECK_THROWS_AS(run_ablation(config, "mystery"), InvalidArgument);
  }
}

TEST_CASE("ablation suite produces paired cells for a win matrix") {
  TempDir dir("llmreg_exp_suite");
  ExperimentConfig config = fixture_config(dir, 0.1);
  config.runs = 2;
  config.lambda = 0.1;

  const ExperimentResult result =
      run_ablation_suite(config, {"simple_linear", "no_nonlinear"});
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].models.count("simple_linear") == 1);
  CHECK(result.cells[0].models.count("no_nonlinear") == 1);

  // paired: both variants saw the same shot rows per run
  std::map<int, std::vector<std::size_t>> shots_by_run;
  for (const auto& record : result.runs) {
    auto it = shots_by_run.find(record.run_index);
    if (it == shots_by_run.end()) {
      shots_by_run[record.run_index] = record.shot_rows;
    } else {
      CHECK(it->second == record.shot_rows);
    }
  }

  const WinMatrix matrix =
      win_matrix(result.cells, {"simple_linear", "no_nonlinear"}, "rmse");
  CHECK(matrix.rates(0, 1) + matrix.rates(1, 0) == 1.0);
}

TEST_CASE("transfer: shared-generator datasets transfer almost perfectly") {
  TempDir dir("llmreg_exp_transfer");

  SyntheticSpec spec_a = fixture_spec();
  spec_a.seed = 301;
  SyntheticSpec spec_b = fixture_spec();
  spec_b.seed = 302;  // same coefficients, different draw
  SyntheticSpec spec_c = fixture_spec();
  spec_c.seed = 303;
  for (auto& f : spec_c.features) f.coefficient = -f.coefficient;  // flipped world

  const SyntheticData data_a = make_synthetic(spec_a);
  const SyntheticData data_b = make_synthetic(spec_b);
  const SyntheticData data_c = make_synthetic(spec_c);
  save_table(data_a.table, dir.str() + "/a.csv");
  save_table(data_b.table, dir.str() + "/b.csv");
  save_table(data_c.table, dir.str() + "/c.csv");
  save_registry(data_a.registry, dir.str() + "/registry.json");

  ExperimentConfig config;
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "the number of inhabitants of a given region"};
  config.datasets = {{"A", dir.str() + "/a.csv"},
                     {"B", dir.str() + "/b.csv"},
                     {"C", dir.str() + "/c.csv"}};
  config.provider.kind = "oracle";
  config.provider.oracle_tau = 0.05;
  config.ablation = "no_nonlinear";
  config.lambda = 0.0;

  const TransferResult result = run_transfer(config);
  REQUIRE(result.pearson.rows() == 3);
  // identity transfer: training on all rows of A and evaluating on A is exact
  CHECK(result.pearson(0, 0) > 0.999);
  // same generator: A -> B transfers
  CHECK(result.pearson(1, 0) > 0.99);
  // flipped coefficients: A -> C anti-correlates
  CHECK(result.pearson(2, 0) < 0.0);
}

TEST_CASE("transfer rejects mismatched schemas") {
  TempDir dir("llmreg_exp_transfer_schema");
  SyntheticSpec spec_a = fixture_spec();
  const SyntheticData data_a = make_synthetic(spec_a);
  SyntheticSpec spec_b = fixture_spec();
  spec_b.features.pop_back();  // drop a column
  const SyntheticData data_b = make_synthetic(spec_b);
  save_table(data_a.table, dir.str() + "/a.csv");
  save_table(data_b.table, dir.str() + "/b.csv");
  save_registry(data_a.registry, dir.str() + "/registry.json");

  ExperimentConfig config;
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "inhabitants"};
  config.datasets = {{"A", dir.str() + "/a.csv"}, {"B", dir.str() + "/b.csv"}};
  config.provider.kind = "oracle";
  config.ablation = "no_nonlinear";
  CHECK_THROWS_WITH_AS(run_transfer(config), doctest::Contains("n2"), InvalidArgument);
}

TEST_CASE("sweep varies one axis with shared shot samples") {
  TempDir dir("llmreg_exp_sweep");
  ExperimentConfig config = fixture_config(dir, 0.1);
  config.runs = 1;
  config.lambda = 0.1;

  const ExperimentResult result = run_sweep(config, "ensemble_size", {1, 5});
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].models.count("ensemble_size=1") == 1);
  CHECK(result.cells[0].models.count("ensemble_size=5") == 1);
  // deterministic oracle candidates are identical, so sizes 1 and 5 coincide
  CHECK(result.cells[0].models.at("ensemble_size=1").rmse_mean ==
        doctest::Approx(result.cells[0].models.at("ensemble_size=5").rmse_mean));

  CHECK_THROWS_AS(run_sweep(config, "bogus_axis", {1.0}), InvalidArgument);
  CHECK_THROWS_AS(run_sweep(config, "k_percent", {}), InvalidArgument);

  const ExperimentResult rerun = run_sweep(config, "ensemble_size", {1, 5});
  CHECK(eval_cells_to_csv(rerun.cells) == eval_cells_to_csv(result.cells));
}

TEST_CASE("reliability report: oracle assignments give all-ones Jaccard") {
  TempDir dir("llmreg_exp_reliability");
  SyntheticSpec spec;
  spec.features = {{"p1", 3.0}, {"p2", 2.0}, {"n1", -3.0}, {"n2", -2.0}};
  spec.regions = 80;
  spec.seed = 5;
  spec.indicator_name = "POP";
  for (int i = 0; i < 3; ++i) {
    SyntheticSpec variant = spec;
    variant.seed = 60 + static_cast<std::uint64_t>(i);
    const SyntheticData data = make_synthetic(variant);
    save_table(data.table, dir.str() + "/d" + std::to_string(i) + ".csv");
    if (i == 0) save_registry(data.registry, dir.str() + "/registry.json");
  }

  ExperimentConfig config;
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "inhabitants"};
  config.datasets = {{"D0", dir.str() + "/d0.csv"},
                     {"D1", dir.str() + "/d1.csv"},
                     {"D2", dir.str() + "/d2.csv"}};
  config.provider.kind = "oracle";
  config.provider.oracle_tau = 0.1;

  const ReliabilityReport report = run_reliability(config);
  REQUIRE(report.rows.size() == 3);
  for (const auto& row : report.rows) {
    CHECK(row.jaccard.positive == 1.0);
    CHECK(row.jaccard.negative == 1.0);
    CHECK(row.jaccard.mixed == 1.0);
  }
  const std::string table_text = reliability_table_text(report);
  CHECK(table_text.find("D0") != std::string::npos);
  CHECK(table_text.find("1.000 1.000 1.000") != std::string::npos);
}

TEST_CASE("run_experiment with a mock provider writes replayable transcripts") {
  TempDir dir("llmreg_exp_mock");
  SyntheticSpec spec = fixture_spec();
  const SyntheticData data = make_synthetic(spec);
  save_table(data.table, dir.str() + "/table.csv");
  save_registry(data.registry, dir.str() + "/registry.json");

  const std::string script_path = dir.str() + "/mock.json";
  write_text_file(script_path, R"({
    "fallback": "Answer: Type C",
    "rules": [
      {"prompt_contains": "\"p1\"", "tag": "categorize", "response": "Answer: Type A"},
      {"prompt_contains": "\"p2\"", "tag": "categorize", "response": "Answer: Type A"},
      {"prompt_contains": "\"n1\"", "tag": "categorize", "response": "Answer: Type B"},
      {"prompt_contains": "\"n2\"", "tag": "categorize", "response": "Answer: Type B"},
      {"tag": "discover", "response": "New column 1: \"p1\"*\"p2\" | product\n"}
    ]
  })");

  ExperimentConfig config;
  config.dataset = dir.str() + "/table.csv";
  config.dataset_name = "synthetic";
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "the number of inhabitants of a given region"};
  config.shot_settings = {3};
  config.runs = 1;
  config.seed = 3;
  config.lambda = 0.5;
  config.provider.kind = "mock";
  config.provider.mock_script = script_path;
  config.provider.record_to = dir.str() + "/transcripts.jsonl";
  config.out_dir = dir.str() + "/out_mock";

  const ExperimentResult mock_result = run_experiment(config);
  REQUIRE(mock_result.cells.size() == 1);

  // replay the recorded transcripts: identical metrics, no mock needed
  ExperimentConfig replay_config = config;
  replay_config.provider.kind = "replay";
  replay_config.provider.replay_store = dir.str() + "/transcripts.jsonl";
  replay_config.provider.record_to = "";
  replay_config.out_dir = dir.str() + "/out_replay";
  const ExperimentResult replay_result = run_experiment(replay_config);

  CHECK(read_text_file(config.out_dir + "/metrics.json") ==
        read_text_file(replay_config.out_dir + "/metrics.json"));

  // a request that was never recorded aborts with its hash
  ExperimentConfig miss_config = replay_config;
  miss_config.temperature = 0.7;  // enters the request hash
  miss_config.out_dir = "";
  CHECK_THROWS_AS(run_experiment(miss_config), ReplayMissError);
}

TEST_CASE("k sweep emits one row per value") {
  TempDir dir("llmreg_exp_ksweep");
  ExperimentConfig config = fixture_config(dir, 0.1);
  config.runs = 1;
  config.lambda = 0.1;
  const ExperimentResult result = run_sweep(config, "k_percent", {10, 25, 50, 100});
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].models.size() == 4);
  CHECK(result.cells[0].models.count("k_percent=10") == 1);
  CHECK(result.cells[0].models.count("k_percent=100") == 1);
}

TEST_CASE("a fully clamped model is recorded as zero Pearson instead of aborting") {
  // y = 3x exactly, one feature: under a flipped constraint the entering dual
  // is negative on every shot draw, so the weight clamps to zero and the
  // ensemble predicts the constant shot-label mean
  TempDir dir("llmreg_exp_clamped");
  SyntheticSpec spec;
  spec.features = {{"x", 3.0}};
  spec.regions = 30;
  spec.seed = 8;
  spec.indicator_name = "POP";
  const SyntheticData data = make_synthetic(spec);
  save_table(data.table, dir.str() + "/table.csv");
  save_registry(data.registry, dir.str() + "/registry.json");

  ExperimentConfig config;
  config.dataset = dir.str() + "/table.csv";
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "inhabitants"};
  config.shot_settings = {5};
  config.runs = 2;
  config.lambda = 0.1;
  config.provider.kind = "oracle";
  config.provider.oracle_tau = 0.05;
  config.ablation = "no_nonlinear";
  config.flip_constraints = true;
  const ExperimentResult result = run_experiment(config);
  const ModelScore& score = result.cells[0].models.at("no_nonlinear");
  CHECK(score.pearson_mean == 0.0);
  CHECK(score.rmse_mean > 0.0);
}

#if defined(LLMREG_TEST_LIVE_ENDPOINT)
#include <httplib.h>
#include <thread>

TEST_CASE("live provider experiment records transcripts that replay identically") {
  TempDir dir("llmreg_exp_live");
  SyntheticSpec spec;
  spec.features = {{"p1", 3.0}, {"n1", -2.0}};
  spec.regions = 25;
  spec.seed = 4;
  spec.indicator_name = "POP";
  const SyntheticData data = make_synthetic(spec);
  save_table(data.table, dir.str() + "/table.csv");
  save_registry(data.registry, dir.str() + "/registry.json");

  // a scripted chat endpoint: answers by the module quoted in the prompt
  httplib::Server server;
  server.Post("/v1/chat/completions",
              [](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                const std::string prompt =
                    body.at("messages").at(0).at("content").get<std::string>();
                std::string content = "Answer: Type C";
                if (prompt.find("Find several new columns") != std::string::npos) {
                  content = "New column 1: \"p1\" | the module itself";
                } else if (prompt.find("\"p1\"") != std::string::npos) {
                  content = "Answer: Type A";
                } else if (prompt.find("\"n1\"") != std::string::npos) {
                  content = "Answer: Type B";
                }
                nlohmann::json reply;
                reply["choices"] = nlohmann::json::array(
                    {{{"message", {{"role", "assistant"}, {"content", content}}}}});
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ExperimentConfig config;
  config.dataset = dir.str() + "/table.csv";
  config.registry_path = dir.str() + "/registry.json";
  config.indicator = {"POP", "the number of inhabitants of a given region"};
  config.shot_settings = {3};
  config.runs = 1;
  config.seed = 5;
  config.lambda = 0.5;
  config.candidate_pool = 5;
  config.ensemble_size = 5;
  config.provider.kind = "live";
  config.provider.live.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.provider.live.auth_env = "";
  config.provider.live.backoff_base_seconds = 0.01;
  config.provider.record_to = dir.str() + "/transcripts.jsonl";
  config.out_dir = dir.str() + "/out_live";

  const ExperimentResult live_result = run_experiment(config);
  server.stop();
  server_thread.join();

  ExperimentConfig replay_config = config;
  replay_config.provider.kind = "replay";
  replay_config.provider.replay_store = dir.str() + "/transcripts.jsonl";
  replay_config.provider.record_to = "";
  replay_config.out_dir = dir.str() + "/out_replay";
  const ExperimentResult replay_result = run_experiment(replay_config);

  CHECK(read_text_file(config.out_dir + "/metrics.json") ==
        read_text_file(replay_config.out_dir + "/metrics.json"));
  CHECK(live_result.runs.at(0).test_pearson == replay_result.runs.at(0).test_pearson);
}
#endif  // LLMREG_TEST_LIVE_ENDPOINT
