#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "predbio/config.hpp"
#include "predbio/error.hpp"
#include "predbio/experiment.hpp"
#include "test_util.hpp"

using namespace predbio;
namespace fs = std::filesystem;

namespace {

RunOutcome fake_run(const RunTask& t) {
  RunOutcome o;
  const double bp = t.b_prog, bd = t.b_pred;
  if (bp == 0.0 && bd == 0.0) {
    o.model = PredictiveStrength{NAN, NAN, INFINITY, true};
  } else {
    o.model.t_pred = 1.0 + 10.0 * bd + 0.01 * static_cast<double>(t.seed);
    o.model.t_prog = 1.0 + 10.0 * bp;
    o.model.ratio = std::abs(o.model.t_pred / o.model.t_prog) * (t.mode == HeadMode::two_head ? 10 : 1);
  }
  o.bounds.lower.ratio = 0.01;
  o.bounds.upper.ratio = 100.0;
  return o;
}

GridSpec small_grid() {
  GridSpec g;
  g.b_values = {0.0, 1.0};
  g.seeds = {3};
  g.modes = {HeadMode::two_head, HeadMode::single_head};
  g.dataset_id = "toy";
  g.model_spec_id = "tiny";
  return g;
}

// Record content without timing, in canonical order.
std::vector<std::string> canonical(const std::vector<RunRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : sorted_records(records)) {
    auto j = to_json(r);
    j.erase("wall_time_s");
    out.push_back(j.dump());
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunRecord record(double b_prog, double b_pred, double ratio, HeadMode mode = HeadMode::two_head) {
  RunRecord r;
  r.run_key = std::to_string(b_prog) + "/" + std::to_string(b_pred) + "/" + std::to_string(ratio);
  r.b_prog = b_prog;
  r.b_pred = b_pred;
  r.mode = mode;
  r.model.ratio = ratio;
  r.bound_lower = 0.1;
  r.bound_upper = 50;
  return r;
}

}  // namespace

TEST(Grid, TwoByTwoByTwoModesGivesEightRecords) {
  const auto dir = testutil::temp_dir("grid8");
  ResultsStore store(dir / "results.jsonl");
  const auto result = run_grid(small_grid(), fake_run, store);
  EXPECT_EQ(small_grid().run_count(), 8u);
  ASSERT_EQ(result.records.size(), 8u);
  EXPECT_EQ(result.executed, 8u);
  std::set<std::string> keys;
  for (const auto& r : result.records) {
    keys.insert(r.run_key);
    EXPECT_EQ(r.status, RunStatus::done);
  }
  EXPECT_EQ(keys.size(), 8u);
}

TEST(Grid, ElevenByElevenGivesOneHundredTwentyOneRecords) {
  GridSpec g = small_grid();
  g.b_values.clear();
  for (int i = 0; i <= 10; ++i) g.b_values.push_back(i / 10.0);
  g.modes = {HeadMode::two_head};
  const auto dir = testutil::temp_dir("grid121");
  ResultsStore store(dir / "results.jsonl");
  EXPECT_EQ(run_grid(g, fake_run, store).records.size(), 121u);
}

TEST(Grid, ResumeAfterInterruptionMatchesUninterruptedRun) {
  const auto d1 = testutil::temp_dir("grid_full");
  const auto d2 = testutil::temp_dir("grid_resume");
  ResultsStore full(d1 / "results.jsonl");
  const auto reference = run_grid(small_grid(), fake_run, full);

  ResultsStore partial(d2 / "results.jsonl");
  GridOptions stop;
  stop.max_runs = 3;
  const auto first = run_grid(small_grid(), fake_run, partial, stop);
  EXPECT_EQ(first.records.size(), 3u);
  const auto second = run_grid(small_grid(), fake_run, partial);
  EXPECT_EQ(second.skipped, 3u);
  EXPECT_EQ(second.executed, 5u);
  EXPECT_EQ(canonical(second.records), canonical(reference.records));

  // A third pass has nothing left to do and writes nothing.
  const auto before = slurp(d2 / "results.jsonl");
  const auto third = run_grid(small_grid(), fake_run, partial);
  EXPECT_EQ(third.executed, 0u);
  EXPECT_EQ(slurp(d2 / "results.jsonl"), before);
}

TEST(Grid, WorkersDoNotChangeTheRecordSet) {
  const auto d1 = testutil::temp_dir("grid_w1");
  const auto d2 = testutil::temp_dir("grid_w3");
  ResultsStore s1(d1 / "r.jsonl"), s2(d2 / "r.jsonl");
  GridOptions three;
  three.workers = 3;
  EXPECT_EQ(canonical(run_grid(small_grid(), fake_run, s1).records),
            canonical(run_grid(small_grid(), fake_run, s2, three).records));
}

TEST(Grid, FailuresAreRecordedAndRetried) {
  const auto dir = testutil::temp_dir("grid_fail");
  ResultsStore store(dir / "results.jsonl");
  auto flaky = [](const RunTask& t) -> RunOutcome {
    if (t.b_pred == 1.0 && t.b_prog == 0.0) throw Error(Errc::nan_loss, "diverged");
    return fake_run(t);
  };
  const auto first = run_grid(small_grid(), flaky, store);
  EXPECT_EQ(first.failed, 2u);
  ASSERT_EQ(first.records.size(), 8u);
  std::size_t failed = 0;
  for (const auto& r : first.records) {
    if (r.status == RunStatus::failed) {
      ++failed;
      EXPECT_EQ(r.error, "diverged");
    }
  }
  EXPECT_EQ(failed, 2u);
  const auto second = run_grid(small_grid(), fake_run, store);
  EXPECT_EQ(second.executed, 2u);
  for (const auto& r : second.records) EXPECT_EQ(r.status, RunStatus::done);
}

TEST(Grid, TornLineIgnored) {
  const auto dir = testutil::temp_dir("grid_torn");
  ResultsStore store(dir / "results.jsonl");
  run_grid(small_grid(), fake_run, store, GridOptions{1, 2, {}});
  {
    std::ofstream out(dir / "results.jsonl", std::ios::app);
    out << "{\"run_key\": \"abc\", \"b_pr";
  }
  EXPECT_EQ(store.load().size(), 2u);
}

TEST(Grid, RecordJsonRoundTrip) {
  RunRecord r = record(0.5, 1.0, 2.5);
  r.seed = 7;
  r.model.t_pred = 3.0;
  r.model.t_prog = 1.2;
  r.feature_set = FeatureSet::b;
  const auto back = record_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
  RunRecord degenerate = record(1, 1, INFINITY);
  degenerate.model.degenerate = true;
  degenerate.model.t_pred = NAN;
  const auto j = to_json(degenerate);
  EXPECT_TRUE(j.at("ratio").is_null());
  EXPECT_TRUE(std::isinf(record_from_json(j).model.ratio));
  for (const char* key : {"run_key", "b_prog", "b_pred", "mode", "seed", "feature_set", "t_pred",
                          "t_prog", "ratio", "degenerate", "bound_lower", "bound_upper", "status",
                          "wall_time_s"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Grid, RunKeysDistinguishEveryField) {
  const auto base = run_key("d", FeatureSet::a, 0.5, 1.0, HeadMode::two_head, 1, "m");
  EXPECT_EQ(base, run_key("d", FeatureSet::a, 0.5, 1.0, HeadMode::two_head, 1, "m"));
  EXPECT_NE(base, run_key("e", FeatureSet::a, 0.5, 1.0, HeadMode::two_head, 1, "m"));
  EXPECT_NE(base, run_key("d", FeatureSet::b, 0.5, 1.0, HeadMode::two_head, 1, "m"));
  EXPECT_NE(base, run_key("d", FeatureSet::a, 1.0, 0.5, HeadMode::two_head, 1, "m"));
  EXPECT_NE(base, run_key("d", FeatureSet::a, 0.5, 1.0, HeadMode::single_head, 1, "m"));
  EXPECT_NE(base, run_key("d", FeatureSet::a, 0.5, 1.0, HeadMode::two_head, 2, "m"));
  EXPECT_NE(base, run_key("d", FeatureSet::a, 0.5, 1.0, HeadMode::two_head, 1, "n"));
}

TEST(Grid, RealPipelineOnTinyData) {
  GridData data;
  const std::size_t n = 60;
  data.images = testutil::random_tensor({n, 3, 8, 8}, 1, 0.0, 1.0);
  Rng rng(2);
  for (std::size_t i = 0; i < n; ++i) {
    const Split split = i < 36 ? Split::train : i < 48 ? Split::val : Split::test;
    data.manifest.rows.push_back({"s" + std::to_string(i), "", rng.bernoulli(0.5) ? 1.0 : 0.0,
                                  rng.bernoulli(0.5) ? 1.0 : 0.0, split});
  }
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  const auto run = make_pipeline_runner(data, testutil::tiny_spec(HeadMode::two_head), cfg);
  GridSpec g = small_grid();
  g.feature_sets = {FeatureSet::a, FeatureSet::b};
  g.noise_sd = 0.1;
  const auto dir = testutil::temp_dir("grid_real");
  ResultsStore store(dir / "results.jsonl");
  const auto result = run_grid(g, run, store);
  EXPECT_EQ(result.records.size(), 16u);
  EXPECT_EQ(result.failed, 0u);
  for (const auto& r : result.records) {
    EXPECT_EQ(r.status, RunStatus::done) << r.error;
    EXPECT_GT(r.wall_time_s, 0.0);
  }
  // Same seed reproduces the same numbers.
  const auto again = testutil::temp_dir("grid_real2");
  ResultsStore store2(again / "results.jsonl");
  EXPECT_EQ(canonical(run_grid(g, run, store2).records), canonical(result.records));
}

TEST(Binning, ExamplesFromTheContract) {
  const std::vector<double> edges{0, 1, INFINITY};
  auto s = aggregate_bins({record(1, 0.5, 3.0), record(1, 0.6, 5.0)}, edges);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].bins[0].count, 2u);
  EXPECT_EQ(s[0].bins[1].count, 0u);
  EXPECT_TRUE(s[0].bins[1].empty());
  EXPECT_TRUE(std::isnan(s[0].bins[1].median));

  s = aggregate_bins({record(0, 1, 7.0)}, edges);
  EXPECT_EQ(s[0].infinite.count, 1u);
  EXPECT_EQ(s[0].bins[0].count + s[0].bins[1].count, 0u);

  s = aggregate_bins({record(1, 2, 4.0)}, edges);
  const auto& b = s[0].bins[1];
  EXPECT_EQ(b.count, 1u);
  EXPECT_EQ(b.median, 4.0);
  EXPECT_EQ(b.min, 4.0);
  EXPECT_EQ(b.max, 4.0);
  EXPECT_EQ(b.q1, 4.0);
  EXPECT_EQ(b.q3, 4.0);
  EXPECT_EQ(b.bound_upper_median, 50.0);
}

TEST(Binning, QuartilesAndClamping) {
  const std::vector<double> edges{0.5, 1.0, 2.0};
  std::vector<RunRecord> rs{record(1, 0.1, 1), record(1, 0.7, 2), record(1, 0.9, 3),
                            record(1, 0.95, 4), record(1, 5.0, 9)};
  const auto s = aggregate_bins(rs, edges);
  EXPECT_EQ(s[0].bins[0].count, 4u);  // 0.1 clamps into the first bin
  EXPECT_EQ(s[0].bins[1].count, 1u);  // 5.0 clamps into the last bin
  EXPECT_DOUBLE_EQ(s[0].bins[0].median, 2.5);
  EXPECT_DOUBLE_EQ(s[0].bins[0].q1, 1.75);
  EXPECT_DOUBLE_EQ(s[0].bins[0].q3, 3.25);
  EXPECT_DOUBLE_EQ(s[0].bins[0].width(), 0.5);
  EXPECT_DOUBLE_EQ(quantile_sorted({10.0}, 0.25), 10.0);
}

TEST(Binning, CountsConserve) {
  const auto dir = testutil::temp_dir("bins_conserve");
  ResultsStore store(dir / "r.jsonl");
  GridSpec g = small_grid();
  g.b_values = {0.0, 0.3, 0.6, 1.0};
  g.seeds = {1, 2};
  auto flaky = [](const RunTask& t) -> RunOutcome {
    if (t.b_prog == 0.3 && t.b_pred == 0.6 && t.seed == 2) throw Error(Errc::io, "boom");
    return fake_run(t);
  };
  const auto records = run_grid(g, flaky, store).records;
  const auto summaries = aggregate_bins(records, default_bin_edges(records));
  ASSERT_EQ(summaries.size(), 2u);
  for (const auto& s : summaries) {
    std::size_t sum = s.infinite.count + s.degenerate + s.failed;
    for (const auto& b : s.bins) sum += b.count;
    EXPECT_EQ(sum, s.total);
    EXPECT_EQ(s.total, 32u);
    EXPECT_EQ(s.degenerate, 2u);  // b_prog = b_pred = 0, two seeds
    EXPECT_EQ(s.infinite.count, 6u);
  }
  EXPECT_EQ(summaries[0].failed, 1u);
  EXPECT_EQ(summaries[1].failed, 1u);
}

TEST(Binning, DefaultEdges) {
  std::vector<RunRecord> rs{record(1, 0, 1), record(1, 0.1, 1), record(0.1, 1, 1), record(0, 1, 1)};
  const auto e = default_bin_edges(rs, 4);
  ASSERT_EQ(e.size(), 6u);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_DOUBLE_EQ(e[1], 0.1);
  EXPECT_DOUBLE_EQ(e[3], 1.0);
  EXPECT_DOUBLE_EQ(e[5], 10.0);
  EXPECT_EQ(default_bin_edges({record(0, 1, 1)}), (std::vector<double>{0.0, 1.0}));
}

TEST(Binning, RejectsBadInput) {
  EXPECT_THROW(aggregate_bins({}, {0, 1}), Error);
  EXPECT_THROW(aggregate_bins({record(1, 1, 1)}, {1}), Error);
  EXPECT_THROW(aggregate_bins({record(1, 1, 1)}, {0, 2, 1}), Error);
  EXPECT_THROW(aggregate_bins({record(1, 1, 1)}, {0, INFINITY, 5}), Error);
}

TEST(Report, WritesFilesDeterministically) {
  const auto dir = testutil::temp_dir("report_src");
  ResultsStore store(dir / "r.jsonl");
  GridSpec g = small_grid();
  g.b_values = {0.0, 0.25, 0.5, 1.0};
  g.feature_sets = {FeatureSet::a, FeatureSet::b};
  const auto records = run_grid(g, fake_run, store).records;
  const auto edges = default_bin_edges(records, 3);
  const auto summaries = aggregate_bins(records, edges);

  const auto out1 = testutil::temp_dir("report1");
  const auto out2 = testutil::temp_dir("report2");
  const auto files = emit_report(summaries, records, out1);
  emit_report(aggregate_bins(store.load(), edges), store.load(), out2);
  EXPECT_EQ(slurp(files.binned_csv), slurp(out2 / "binned.csv"));
  ASSERT_EQ(files.figures.size(), 2u);
  for (const auto& f : files.figures) {
    EXPECT_TRUE(fs::exists(f));
    EXPECT_NE(slurp(f).find("</svg>"), std::string::npos);
  }
  std::ifstream csv(files.binned_csv);
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  // (finite bins + infinite bin) per mode per feature set
  EXPECT_EQ(rows, (edges.size() - 1 + 1) * 2 * 2);
  std::ifstream jsonl(files.records);
  std::size_t lines = 0;
  while (std::getline(jsonl, line)) ++lines;
  EXPECT_EQ(lines, records.size());
}

TEST(Report, EmptyRecordsRejected) {
  try {
    emit_report({}, {}, testutil::temp_dir("report_empty"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no run records"), std::string::npos);
  }
}

TEST(Config, OverridesAndEnvironment) {
  nlohmann::json doc = {{"training", {{"epochs", 3}}}};
  apply_override(doc, "training.epochs=7");
  apply_override(doc, "grid.b_values=[0,0.5]");
  apply_override(doc, "dataset.id=isic");
  EXPECT_EQ(doc["training"]["epochs"], 7);
  EXPECT_EQ(doc["grid"]["b_values"].size(), 2u);
  EXPECT_EQ(doc["dataset"]["id"], "isic");
  EXPECT_THROW(apply_override(doc, "no_equals_sign"), Error);

  const auto c = config_from_json(doc);
  EXPECT_EQ(c.training.epochs, 7u);
  EXPECT_EQ(c.grid.dataset_id, "isic");
  EXPECT_EQ(c.grid.model_spec_id, model_spec_id(c.model));
  EXPECT_EQ(c.model.input_shape, (Shape{3, 28, 28}));

  EXPECT_THROW(config_from_json({{"trainig", {}}}), Error);
  EXPECT_THROW(config_from_json({{"grid", {{"modes", {"three_head"}}}}}), Error);
  EXPECT_THROW(config_from_json({{"training", {{"batch_size", 0}}}}), Error);

  const auto dir = testutil::temp_dir("config");
  {
    std::ofstream out(dir / "c.json");
    out << R"({"output": {"root": "from_file"}, "simulation": {"b_pred": 0}})";
  }
  setenv("PREDBIO_OUTPUT_ROOT", "from_env", 1);
  auto loaded = load_config(dir / "c.json", {});
  EXPECT_EQ(loaded.output_root, fs::path("from_env"));
  EXPECT_EQ(loaded.simulation.b_pred, 0.0);
  loaded = load_config(dir / "c.json", {"output.root=from_flag"});
  EXPECT_EQ(loaded.output_root, fs::path("from_flag"));
  unsetenv("PREDBIO_OUTPUT_ROOT");
  EXPECT_EQ(load_config(dir / "c.json", {}).output_root, fs::path("from_file"));
  EXPECT_THROW(load_config(dir / "missing.json", {}), Error);

  // The written form reads back to the same configuration.
  const auto round = config_from_json(config_to_json(loaded));
  EXPECT_EQ(config_to_json(round), config_to_json(loaded));
}
