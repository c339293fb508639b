#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "predbio/error.hpp"
#include "predbio/sim.hpp"
#include "test_util.hpp"

using namespace predbio;

namespace {

DatasetManifest grid_manifest(std::size_t n) {
  DatasetManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    m.rows.push_back({"s" + std::to_string(i), "", static_cast<double>(i % 2),
                      static_cast<double>((i / 2) % 2), Split::train});
  }
  return m;
}

}  // namespace

TEST(Simulation, PurelyPrognosticOutcomeEqualsBiomarker) {
  std::vector<BiomarkerRow> rows{{1, 0, 0}, {1, 0, 1}, {0, 1, 1}};
  OutcomeSimConfig cfg;
  cfg.b_prog = 1;
  cfg.b_pred = 0;
  const auto y = simulate_outcomes(rows, cfg);
  EXPECT_EQ(y, (std::vector<double>{1, 1, 0}));
}

TEST(Simulation, PredictiveEffectOnlyInTreatedArm) {
  std::vector<BiomarkerRow> rows{{0, 1, 1}, {0, 1, 0}, {0.5, 0.25, 1}};
  OutcomeSimConfig cfg;
  cfg.b_prog = 2;
  cfg.b_pred = 4;
  const auto y = simulate_outcomes(rows, cfg);
  EXPECT_EQ(y, (std::vector<double>{4, 0, 2}));
}

TEST(Simulation, TreatmentAssignmentFrozen) {
  const auto t = assign_treatment(10000, 0.5, 7);
  const auto treated = std::accumulate(t.begin(), t.end(), 0);
  EXPECT_EQ(treated, 5065);
  EXPECT_NEAR(treated / 10000.0, 0.5, 0.02);
  for (int v : t) EXPECT_TRUE(v == 0 || v == 1);
}

TEST(Simulation, TreatmentProbabilityRespected) {
  const auto t = assign_treatment(20000, 0.2, 3);
  EXPECT_NEAR(std::accumulate(t.begin(), t.end(), 0) / 20000.0, 0.2, 0.01);
}

TEST(Simulation, DeterministicPerSeed) {
  EXPECT_EQ(assign_treatment(500, 0.5, 11), assign_treatment(500, 0.5, 11));
  EXPECT_NE(assign_treatment(500, 0.5, 11), assign_treatment(500, 0.5, 12));

  std::vector<BiomarkerRow> rows(300, BiomarkerRow{0.5, 0.5, 1});
  OutcomeSimConfig cfg;
  cfg.noise_sd = 0.3;
  cfg.seed = 5;
  EXPECT_EQ(simulate_outcomes(rows, cfg), simulate_outcomes(rows, cfg));
}

TEST(Simulation, NoiseHasRequestedSpread) {
  std::vector<BiomarkerRow> rows(20000, BiomarkerRow{0, 0, 0});
  OutcomeSimConfig cfg;
  cfg.noise_sd = 0.5;
  cfg.seed = 9;
  const auto y = simulate_outcomes(rows, cfg);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double ss = 0;
  for (double v : y) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(ss / (y.size() - 1)), 0.5, 0.01);
}

TEST(Simulation, RecordDependsOnlyOnItsSampleId) {
  const auto full = grid_manifest(200);
  DatasetManifest subset;
  for (std::size_t i = 0; i < 200; i += 7) subset.rows.push_back(full.rows[i]);
  OutcomeSimConfig cfg;
  cfg.noise_sd = 0.1;
  cfg.seed = 21;
  const auto a = build_rct_dataset(full, cfg);
  const auto b = build_rct_dataset(subset, cfg);
  for (std::size_t j = 0; j < b.size(); ++j) EXPECT_EQ(a[j * 7], b[j]);
}

TEST(Simulation, HundredSampleManifestArms) {
  OutcomeSimConfig cfg;
  cfg.seed = 42;
  const auto records = build_rct_dataset(grid_manifest(100), cfg);
  ASSERT_EQ(records.size(), 100u);
  int treated = 0;
  for (const auto& r : records) treated += r.T;
  EXPECT_EQ(treated, 43);
  EXPECT_THROW(build_rct_dataset(DatasetManifest{}, cfg), Error);
}

TEST(Simulation, ArmsAreExchangeable) {
  // Relabelling arms (p -> 1 - p) keeps the treated share symmetric.
  const auto a = assign_treatment(20000, 0.3, 4);
  const auto b = assign_treatment(20000, 0.7, 4);
  const double fa = std::accumulate(a.begin(), a.end(), 0) / 20000.0;
  const double fb = std::accumulate(b.begin(), b.end(), 0) / 20000.0;
  EXPECT_NEAR(fa + fb, 1.0, 0.02);
}

TEST(Simulation, InvalidInputsRejected) {
  EXPECT_THROW(assign_treatment(0, 0.5, 1), Error);
  EXPECT_THROW(assign_treatment(10, -0.1, 1), Error);
  EXPECT_THROW(assign_treatment(10, 1.5, 1), Error);
  EXPECT_EQ(assign_treatment(5, 0.0, 1), (std::vector<int>(5, 0)));
  EXPECT_EQ(assign_treatment(5, 1.0, 1), (std::vector<int>(5, 1)));
  OutcomeSimConfig negative;
  negative.b_pred = -1;
  EXPECT_THROW(negative.validate(), Error);
  std::vector<BiomarkerRow> bad{{NAN, 0, 0}};
  EXPECT_THROW(simulate_outcomes(bad, OutcomeSimConfig{}), Error);
  OutcomeSimConfig neg;
  neg.noise_sd = -1;
  EXPECT_THROW(neg.validate(), Error);
}

TEST(Simulation, CsvRoundTrip) {
  OutcomeSimConfig cfg;
  cfg.noise_sd = 0.2;
  cfg.seed = 3;
  const auto records = build_rct_dataset(grid_manifest(50), cfg);
  const auto dir = testutil::temp_dir("sim_csv");
  write_rct_csv(records, dir / "rct.csv");
  EXPECT_EQ(read_rct_csv(dir / "rct.csv"), records);
}

TEST(Simulation, ConfigJsonRoundTrip) {
  OutcomeSimConfig cfg{0.3, 0.7, 0.05, 0.4, 99};
  const nlohmann::json j = cfg;
  const auto back = j.get<OutcomeSimConfig>();
  EXPECT_EQ(back.b_prog, 0.3);
  EXPECT_EQ(back.b_pred, 0.7);
  EXPECT_EQ(back.noise_sd, 0.05);
  EXPECT_EQ(back.p_treat, 0.4);
  EXPECT_EQ(back.seed, 99u);
}
