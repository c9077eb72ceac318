#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ltpnet/errors.hpp"
#include "ltpnet/harness.hpp"

using namespace ltpnet;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ltpnet_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentSpec tiny_spec(const fs::path& out) {
  ExperimentSpec s;
  s.name = "tiny";
  SyntheticSpec syn;
  syn.length = 120;
  syn.feature_count = 1;
  syn.noise_std = 0.02;
  s.synthetic = syn;
  s.lookback = 6;
  s.hyperparams = HyperparamPoint{4, 0.001, 1, 2, 8, 0.0001};
  s.training.epochs = 3;
  s.training.batch_size = 8;
  s.training.lstm_layers = 1;
  s.training.head_width = 4;
  s.training.d_ff_multiplier = 2;
  s.search.particles = 3;
  s.search.iterations = 2;
  s.search.proxy_epochs = 1;
  s.search.ranges.lstm_hidden = {2, 6};
  s.search.ranges.transformer_layers = {1, 1};
  s.search.ranges.attention_heads = {2};
  s.search.ranges.d_model = {4, 8};
  s.search.grid = {{0.001, 8, 1}, {0.0001, 16, 1}};
  s.timing = {2, 0};
  s.output_dir = out;
  return s;
}

const char* kMinimalSpec = R"({"dataset": {"synthetic": {"length": 100}}})";

}  // namespace

TEST(Spec, MinimalSpecTakesDefaults) {
  const auto s = parse_spec(kMinimalSpec);
  ASSERT_TRUE(s.synthetic.has_value());
  EXPECT_FALSE(s.csv.has_value());
  EXPECT_EQ(s.synthetic->length, 100u);
  EXPECT_EQ(s.variant, Variant::full);
  EXPECT_EQ(s.optimizer, OptimizerKind::sgd);
  EXPECT_EQ(s.hyperparams_source, HyperparamSource::fixed);
  EXPECT_FALSE(s.hyperparams.has_value());
  EXPECT_EQ(s.training.batch_size, 64u);
  EXPECT_EQ(s.search.particles, 50u);
  EXPECT_EQ(s.search.iterations, 100u);
  EXPECT_EQ(s.search.inertia, 0.5);
  EXPECT_EQ(s.seeds, (Seeds{0, 1, 2, 3}));
}

TEST(Spec, ExactlyOneDatasetSource) {
  EXPECT_THROW(parse_spec(R"({"dataset": {}})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"variant": "full"})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}, "csv": {"path": "a.csv", "target": "y"}}})"), ConfigError);
  ExperimentSpec s;
  EXPECT_THROW(s.validate(), ConfigError);
  s.synthetic = SyntheticSpec{};
  EXPECT_NO_THROW(s.validate());
  s.csv = CsvSource{"a.csv", {}, "y"};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Spec, RejectsBadValues) {
  EXPECT_THROW(parse_spec("{not json"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "varient": "full"})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "variant": "half"})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "optimizer": "rmsprop"})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "training": {"epochs": -1}})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "training": {"batch_size": 0}})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "training": {"epochs": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "preprocess": {"train_ratio": 1.0}})"), ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"synthetic": {}}, "hyperparameters": {"d_model": 10, "attention_heads": 4}})"),
               ConfigError);
  EXPECT_THROW(parse_spec(R"({"dataset": {"csv": {"path": "x.csv"}}})"), ConfigError);
}

TEST(Spec, EveryVariantOptimizerSourceCombinationIsLegal) {
  for (auto v : {Variant::full, Variant::no_lstm, Variant::no_transformer, Variant::no_pso})
    for (auto o : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::adaptive_momentum})
      for (auto h : {HyperparamSource::fixed, HyperparamSource::pso_search, HyperparamSource::grid_search}) {
        ExperimentSpec s;
        s.synthetic = SyntheticSpec{};
        s.variant = v;
        s.optimizer = o;
        s.hyperparams_source = h;
        EXPECT_NO_THROW(s.validate());
        EXPECT_EQ(variant_from_string(to_string(v)), v);
        EXPECT_EQ(hyperparam_source_from_string(to_string(h)), h);
      }
}

TEST(Spec, JsonRoundTrip) {
  auto s = tiny_spec("somewhere");
  s.variant = Variant::no_transformer;
  s.optimizer = OptimizerKind::adaptive_momentum;
  s.hyperparams_source = HyperparamSource::grid_search;
  s.training.learning_rate = 0.003;
  s.search.schedule = pso::InertiaSchedule::linear;
  s.seeds = Seeds::from_base(40);
  const auto text = spec_to_json(s);
  const auto back = parse_spec(text);
  EXPECT_EQ(spec_to_json(back), text);
  EXPECT_EQ(back.output_dir, fs::path("somewhere"));
  EXPECT_EQ(back.seeds, (Seeds{40, 41, 42, 43}));
  EXPECT_EQ(*back.hyperparams, *s.hyperparams);
  EXPECT_EQ(spec_to_json(s, false).find("output_dir"), std::string::npos);
}

TEST(Spec, RelativeCsvPathResolvesAgainstSpecDirectory) {
  const auto dir = scratch("relative");
  fs::create_directories(dir / "data");
  {
    std::ofstream(dir / "spec.json") << R"({"dataset": {"csv": {"path": "data/x.csv", "target": "y"}}})";
  }
  const auto s = load_spec(dir / "spec.json");
  EXPECT_EQ(s.csv->path, dir / "data/x.csv");
  EXPECT_THROW(load_spec(dir / "absent.json"), ConfigError);
}

TEST(Harness, SuiteThreadsFollowsEnvironment) {
  ::setenv("LTPNET_THREADS", "3", 1);
  EXPECT_EQ(suite_threads(), 3u);
  ::setenv("LTPNET_THREADS", "zero", 1);
  EXPECT_EQ(suite_threads(), std::max(1u, std::thread::hardware_concurrency()));
  ::setenv("LTPNET_THREADS", "-2", 1);
  EXPECT_GE(suite_threads(), 1u);
  ::unsetenv("LTPNET_THREADS");
}

TEST(Harness, VersionLooksLikeARelease) {
  const auto v = artifact_version();
  EXPECT_EQ(v.rfind("0.1.0", 0), 0u) << v;
}

TEST(RunExperiment, WritesEveryReportFile) {
  const auto out = scratch("files");
  const auto r = run_experiment(tiny_spec(out));
  for (const char* f : {"reports/run_report.json", "reports/payload.json", "reports/predictions.csv",
                        "checkpoints/model.ltpck", "histories/training_history.csv", "histories/index_audit.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_FALSE(fs::exists(out / "histories/search_history.csv"));

  EXPECT_TRUE(check_report_schema(slurp(out / "reports/run_report.json")).empty());
  EXPECT_TRUE(check_report_schema(slurp(out / "reports/payload.json")).empty());
  const auto report = json::parse(slurp(out / "reports/run_report.json"));
  const auto payload = json::parse(slurp(out / "reports/payload.json"));
  EXPECT_TRUE(report["efficiency"].contains("training_seconds"));
  EXPECT_FALSE(payload["efficiency"].contains("training_seconds"));
  EXPECT_FALSE(payload["efficiency"].contains("inference_ms"));
  EXPECT_FALSE(payload.contains("run"));
  EXPECT_EQ(report["version"], artifact_version());

  const auto hist = lines_of(out / "histories/training_history.csv");
  EXPECT_EQ(hist.front(), "epoch,train_loss,validation_loss");
  EXPECT_EQ(hist.size(), r.train.train_loss.size() + 1);
  const auto pred = lines_of(out / "reports/predictions.csv");
  EXPECT_EQ(pred.front(), "index,target_row,actual,predicted");
  EXPECT_EQ(pred.size(), r.eval.n + 1);

  const auto loaded = load_checkpoint(out / "checkpoints/model.ltpck");
  EXPECT_EQ(count_parameters(loaded), r.efficiency.parameters);
  EXPECT_GT(r.efficiency.flops, 0u);
  EXPECT_GT(r.efficiency.inference_ms, 0.0);
}

TEST(RunExperiment, ReportFieldsArePopulated) {
  const auto r = run_experiment(tiny_spec(scratch("fields")));
  EXPECT_EQ(r.hyperparams, (HyperparamPoint{4, 0.001, 1, 2, 8, 0.0001}));
  EXPECT_EQ(r.model.lstm_hidden, 4u);
  EXPECT_EQ(r.model.d_ff, 16u);
  EXPECT_EQ(r.model.input_features, 2u);
  EXPECT_EQ(r.batch_size, 8u);
  EXPECT_EQ(r.learning_rates.lstm, 0.001);
  EXPECT_EQ(r.learning_rates.transformer, 0.0001);
  EXPECT_GT(r.eval.n, 0u);
  EXPECT_GT(r.eval.mse, 0.0);
  EXPECT_EQ(r.train.train_loss.size(), 3u);
  EXPECT_FALSE(r.search.ran);
  EXPECT_FALSE(r.version.empty());
}

TEST(RunExperiment, AuditProvesTestIndicesUnseen) {
  const auto out = scratch("audit");
  const auto r = run_experiment(tiny_spec(out));
  EXPECT_TRUE(r.audit.clean());
  EXPECT_FALSE(r.audit.trained_indices.empty());
  EXPECT_FALSE(r.audit.validation_indices.empty());
  for (auto i : r.audit.trained_indices)
    EXPECT_FALSE(std::binary_search(r.audit.test_indices.begin(), r.audit.test_indices.end(), i));
  // Chronological split: every training index precedes every test index.
  EXPECT_LT(r.audit.trained_indices.back(), r.audit.test_indices.front());
  const auto log = json::parse(slurp(out / "histories/index_audit.json"));
  EXPECT_TRUE(log["clean"].get<bool>());
  EXPECT_EQ(log["test_indices"].get<std::vector<std::size_t>>(), r.audit.test_indices);
  EXPECT_EQ(log["trained_indices"].get<std::vector<std::size_t>>(), r.audit.trained_indices);
}

TEST(RunExperiment, IdenticalSpecsGiveIdenticalPayloads) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto spec = tiny_spec(a);
  spec.hyperparams_source = HyperparamSource::pso_search;
  run_experiment(spec);
  spec.output_dir = b;
  run_experiment(spec);
  for (const char* f : {"reports/payload.json", "reports/predictions.csv", "checkpoints/model.ltpck",
                        "histories/training_history.csv", "histories/search_history.csv", "histories/index_audit.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(RunExperiment, SeedsChangeThePayload) {
  auto spec = tiny_spec(scratch("seed_a"));
  run_experiment(spec);
  const auto first = slurp(spec.output_dir / "reports/payload.json");
  spec.seeds.init = 99;
  spec.output_dir = scratch("seed_b");
  run_experiment(spec);
  EXPECT_NE(first, slurp(spec.output_dir / "reports/payload.json"));
}

TEST(RunExperiment, NoPsoSkipsSearchAndUsesFixedPoint) {
  auto spec = tiny_spec(scratch("nopso"));
  spec.variant = Variant::no_pso;
  spec.hyperparams_source = HyperparamSource::pso_search;
  const auto r = run_experiment(spec);
  EXPECT_FALSE(r.search.ran);
  EXPECT_EQ(r.hyperparams, *spec.hyperparams);
  EXPECT_TRUE(r.model.lstm_enabled);
  EXPECT_TRUE(r.model.transformer_enabled);
}

TEST(RunExperiment, PsoSearchPicksPointInsideRanges) {
  auto spec = tiny_spec(scratch("psosearch"));
  spec.hyperparams_source = HyperparamSource::pso_search;
  const auto r = run_experiment(spec);
  EXPECT_TRUE(r.search.ran);
  EXPECT_EQ(r.search.history.size(), spec.search.iterations);
  EXPECT_TRUE(std::is_sorted(r.search.history.rbegin(), r.search.history.rend()));
  EXPECT_GE(r.hyperparams.lstm_hidden, 2u);
  EXPECT_LE(r.hyperparams.lstm_hidden, 6u);
  EXPECT_EQ(r.hyperparams.d_model % r.hyperparams.attention_heads, 0u);
  EXPECT_TRUE(fs::exists(spec.output_dir / "histories/search_history.csv"));
}

TEST(RunExperiment, GridSearchAppliesBestCell) {
  auto spec = tiny_spec(scratch("grid"));
  spec.hyperparams_source = HyperparamSource::grid_search;
  const auto r = run_experiment(spec);
  EXPECT_TRUE(r.search.ran);
  EXPECT_EQ(r.search.history.size(), 2u);
  EXPECT_TRUE(std::is_sorted(r.search.history.begin(), r.search.history.end()));
  EXPECT_EQ(r.search.best_value, r.search.history.front());
  const bool first = r.batch_size == 8u && r.hyperparams.lstm_learning_rate == 0.001;
  const bool second = r.batch_size == 16u && r.hyperparams.lstm_learning_rate == 0.0001;
  EXPECT_TRUE(first || second);
  EXPECT_EQ(r.hyperparams.lstm_learning_rate, r.hyperparams.transformer_learning_rate);
}

TEST(RunExperiment, AdamUsesOneRateForBothComponents) {
  auto spec = tiny_spec(scratch("adam"));
  spec.optimizer = OptimizerKind::adam;
  const auto r = run_experiment(spec);
  EXPECT_EQ(r.learning_rates.lstm, 0.001);
  EXPECT_EQ(r.learning_rates.transformer, 0.001);
}

TEST(RunExperiment, CsvSourceReadsTheManifestColumns) {
  const auto dir = scratch("csv");
  fs::create_directories(dir);
  SyntheticSpec syn;
  syn.length = 100;
  syn.feature_count = 2;
  write_csv(synthesize_series(syn), dir / "series.csv");
  auto spec = tiny_spec(dir / "out");
  spec.synthetic.reset();
  spec.csv = CsvSource{dir / "series.csv", {"target", "f2"}, "target"};
  const auto r = run_experiment(spec);
  EXPECT_EQ(r.model.input_features, 2u);

  spec.csv->path = dir / "missing.csv";
  EXPECT_ANY_THROW(run_experiment(spec));
  spec.csv = CsvSource{dir / "series.csv", {"target", "f2"}, "absent"};
  EXPECT_ANY_THROW(run_experiment(spec));
}

TEST(RunExperiment, TooShortSeriesIsADataError) {
  auto spec = tiny_spec(scratch("short"));
  for (std::size_t length : {6, 7}) {
    spec.synthetic->length = length;
    EXPECT_THROW(run_experiment(spec), DataError) << length;
  }
}

TEST(ReportSchema, FlagsMissingAndMistypedFields) {
  EXPECT_FALSE(check_report_schema("{").empty());
  EXPECT_FALSE(check_report_schema("{}").empty());
  const auto out = scratch("schema");
  run_experiment(tiny_spec(out));
  auto j = json::parse(slurp(out / "reports/run_report.json"));
  j["evaluation"]["MSE"] = "small";
  auto problems = check_report_schema(j.dump());
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("/evaluation/MSE"), std::string::npos);
  j = json::parse(slurp(out / "reports/run_report.json"));
  j["hyperparameters"].erase("d_model");
  problems = check_report_schema(j.dump());
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("missing"), std::string::npos);
  j = json::parse(slurp(out / "reports/run_report.json"));
  j["evaluation"]["MAPE"] = nullptr;
  EXPECT_TRUE(check_report_schema(j.dump()).empty());
}

TEST(Ablation, FourByFourTableInFixedOrder) {
  const auto out = scratch("ablation");
  auto spec = tiny_spec(out);
  spec.hyperparams_source = HyperparamSource::pso_search;
  const auto res = run_ablation_suite(spec);
  ASSERT_EQ(res.table.size(), 4u);
  ASSERT_EQ(res.reports.size(), 4u);
  const std::vector<std::string> labels{"Transformer+PSO", "LSTM+PSO", "LSTM+Transformer", "ALL(LTP-Net)"};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(res.table[i].label, labels[i]);

  EXPECT_FALSE(res.reports[0].model.lstm_enabled);
  EXPECT_TRUE(res.reports[0].model.transformer_enabled);
  EXPECT_FALSE(res.reports[1].model.transformer_enabled);
  EXPECT_FALSE(res.reports[2].search.ran);
  EXPECT_TRUE(res.reports[3].search.ran);
  for (const auto& r : res.reports) {
    EXPECT_EQ(r.audit.test_indices, res.reports[0].audit.test_indices);
    EXPECT_TRUE(r.audit.clean());
  }

  const auto csv = lines_of(out / "ablation_table.csv");
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "model,MAE,MAPE,RMSE,MSE");
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_EQ(csv[i].rfind(labels[i - 1] + ",", 0), 0u);
    EXPECT_EQ(std::count(csv[i].begin(), csv[i].end(), ','), 4);
  }
  for (const char* v : {"no-lstm", "no-transformer", "no-pso", "full"})
    EXPECT_TRUE(fs::exists(out / v / "reports/payload.json")) << v;
  const auto summary = json::parse(slurp(out / "ablation_summary.json"));
  EXPECT_TRUE(summary["shared_test_indices"].get<bool>());
  EXPECT_TRUE(summary["audits_clean"].get<bool>());
  EXPECT_EQ(summary["rows"].size(), 4u);
}

TEST(Ablation, ReproducibleAcrossThreadCounts) {
  auto spec = tiny_spec(scratch("abl_a"));
  ::setenv("LTPNET_THREADS", "1", 1);
  run_ablation_suite(spec);
  ::setenv("LTPNET_THREADS", "4", 1);
  const auto first = spec.output_dir;
  spec.output_dir = scratch("abl_b");
  run_ablation_suite(spec);
  ::unsetenv("LTPNET_THREADS");
  EXPECT_EQ(slurp(first / "ablation_table.csv"), slurp(spec.output_dir / "ablation_table.csv"));
  for (const char* v : {"no-lstm", "no-transformer", "no-pso", "full"})
    EXPECT_EQ(slurp(first / v / "reports/payload.json"), slurp(spec.output_dir / v / "reports/payload.json")) << v;
}

TEST(OptimizerComparison, ThreeRowsWithStatedConstants) {
  const auto out = scratch("compare");
  const auto res = run_optimizer_comparison(tiny_spec(out));
  ASSERT_EQ(res.table.size(), 3u);
  EXPECT_EQ(res.table[0].optimizer, "adam");
  EXPECT_EQ(res.table[1].optimizer, "adaptive-momentum");
  EXPECT_EQ(res.table[2].optimizer, "sgd+pso");

  const auto& adam = res.reports[0];
  EXPECT_EQ(adam.spec.optimizer, OptimizerKind::adam);
  EXPECT_EQ(adam.batch_size, 64u);
  EXPECT_EQ(adam.learning_rates.lstm, 0.001);
  EXPECT_EQ(adam.learning_rates.transformer, 0.001);

  const auto& am = res.reports[1];
  EXPECT_EQ(am.spec.optimizer, OptimizerKind::adaptive_momentum);
  EXPECT_EQ(am.batch_size, 64u);
  EXPECT_EQ(am.learning_rates.lstm, 0.001);
  EXPECT_EQ(am.spec.training.momentum.initial, 0.9);
  EXPECT_EQ(am.spec.training.momentum.update_rate, 0.1);

  const auto& sgd = res.reports[2];
  EXPECT_EQ(sgd.spec.optimizer, OptimizerKind::sgd);
  EXPECT_TRUE(sgd.search.ran);
  EXPECT_EQ(sgd.learning_rates.lstm, sgd.hyperparams.lstm_learning_rate);

  for (const auto& row : res.table) {
    EXPECT_GT(row.efficiency.parameters, 0u);
    EXPECT_GT(row.efficiency.flops, 0u);
  }
  const auto csv = lines_of(out / "optimizer_comparison.csv");
  ASSERT_EQ(csv.size(), 4u);
  EXPECT_EQ(csv[0], kComparisonHeader);
}

TEST(OptimizerComparison, AccuracyColumnsAreDeterministic) {
  auto spec = tiny_spec(scratch("cmp_a"));
  const auto a = run_optimizer_comparison(spec);
  spec.output_dir = scratch("cmp_b");
  const auto b = run_optimizer_comparison(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.table[i].eval.mse, b.table[i].eval.mse);
    EXPECT_EQ(a.table[i].eval.mae, b.table[i].eval.mae);
    EXPECT_EQ(a.table[i].efficiency.parameters, b.table[i].efficiency.parameters);
    EXPECT_EQ(report_to_json(a.reports[i], false), report_to_json(b.reports[i], false));
  }
}

TEST(PsoStudy, SingleRunGivesOneRowPerConfig) {
  const auto out = scratch("study1");
  PsoStudySpec s;
  s.runs = 1;
  s.swarm.particles = 10;
  s.swarm.iterations = 20;
  s.output_dir = out;
  const auto res = run_pso_distribution_study(s);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].config, "static");
  EXPECT_EQ(res[1].config, "dynamic");
  for (const auto& c : res) {
    EXPECT_EQ(c.best_values.size(), 1u);
    EXPECT_EQ(c.mean, c.best_values[0]);
    EXPECT_EQ(c.median, c.best_values[0]);
    EXPECT_EQ(c.std, 0.0);
    EXPECT_EQ(c.histories[0].size(), 20u);
  }
  const auto runs = lines_of(out / "pso_runs.csv");
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0], "config,run_seed,best_value");
  const auto hist = lines_of(out / "pso_histories.csv");
  EXPECT_EQ(hist[0], "config,run_seed,iteration,global_best_value");
  EXPECT_EQ(hist.size(), 41u);
  const auto summary = json::parse(slurp(out / "pso_summary.json"));
  EXPECT_EQ(summary["configs"].size(), 2u);
  EXPECT_EQ(summary["bound"].get<double>(), 5.0);
}

TEST(PsoStudy, SummaryStatisticsMatchRuns) {
  PsoStudySpec s;
  s.objective = "rastrigin";
  s.runs = 6;
  s.base_seed = 100;
  s.swarm.particles = 10;
  s.swarm.iterations = 30;
  const auto res = run_pso_distribution_study(s);
  for (const auto& c : res) {
    EXPECT_EQ(c.run_seeds, (std::vector<std::uint64_t>{100, 101, 102, 103, 104, 105}));
    auto v = c.best_values;
    std::sort(v.begin(), v.end());
    EXPECT_DOUBLE_EQ(c.median, 0.5 * (v[2] + v[3]));
    double mean = 0.0;
    for (double x : v) mean += x / 6.0;
    EXPECT_NEAR(c.mean, mean, 1e-12);
    for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(c.histories[r].back(), c.best_values[r]);
  }
}

TEST(PsoStudy, DeterministicAndThreadIndependent) {
  PsoStudySpec s;
  s.runs = 4;
  s.swarm.particles = 8;
  s.swarm.iterations = 15;
  ::setenv("LTPNET_THREADS", "1", 1);
  const auto a = run_pso_distribution_study(s);
  ::setenv("LTPNET_THREADS", "8", 1);
  const auto b = run_pso_distribution_study(s);
  ::unsetenv("LTPNET_THREADS");
  for (std::size_t c = 0; c < a.size(); ++c) {
    EXPECT_EQ(a[c].best_values, b[c].best_values);
    EXPECT_EQ(a[c].histories, b[c].histories);
  }
}

TEST(PsoStudy, UnknownObjectiveIsAnError) {
  PsoStudySpec s;
  s.objective = "ackley";
  EXPECT_THROW(run_pso_distribution_study(s), ConfigError);
  EXPECT_THROW(objective_by_name("ackley", 3), ConfigError);
  EXPECT_EQ(objective_by_name("sphere", 3).dimension, 3u);
  s.objective = "sphere";
  s.runs = 0;
  EXPECT_THROW(run_pso_distribution_study(s), ConfigError);
}

TEST(GradCheck, LibraryCheckAgreesWithinTolerance) {
  const auto r = run_gradient_check(3);
  EXPECT_EQ(r.seeds, 3u);
  EXPECT_GT(r.checked_entries, 0u);
  EXPECT_LT(r.max_relative_error, 1e-4);
}
