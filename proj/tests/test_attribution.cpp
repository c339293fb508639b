#include <cmath>
#include <cstdlib>

#include <gtest/gtest.h>

#include "predbio/attribution.hpp"
#include "predbio/datasets.hpp"
#include "predbio/error.hpp"
#include "predbio/sim.hpp"
#include "test_util.hpp"

using namespace predbio;

namespace {

ModelSpec linear_spec(HeadMode mode) {
  ModelSpec s;
  s.mode = mode;
  s.input_shape = {2, 4, 4};
  s.encoder = {nn::LayerSpec{nn::LayerType::dense, 3, 3, 2}};
  s.head = {nn::LayerSpec{nn::LayerType::dense, 1, 3, 2}};
  return s;
}

Tensor image_of(const Tensor& batch, std::size_t i) {
  const auto s = batch.sample(i);
  return Tensor(batch.sample_shape(), std::vector<double>(s.begin(), s.end()));
}

double sum(const Tensor& t) {
  double s = 0;
  for (double v : t.values()) s += v;
  return s;
}

}  // namespace

TEST(ExpectedGradients, LinearModelClosedForm) {
  CateEstimator model(linear_spec(HeadMode::two_head), 1);
  const Tensor x = testutil::random_tensor({2, 4, 4}, 2, 0.0, 1.0);
  const Tensor baselines = testutil::random_tensor({5, 2, 4, 4}, 3, 0.0, 1.0);
  const auto weights = target_head_weights(model, AttributionTarget::cate);
  const auto grad = model.target_pass(testutil::random_tensor({1, 2, 4, 4}, 9), weights).input_grad;

  const auto map = expected_gradients(model, x, baselines, AttributionTarget::cate, 20, 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double mean_base = 0;
    for (std::size_t b = 0; b < 5; ++b) mean_base += baselines.sample(b)[i] / 5;
    EXPECT_NEAR(map.values[i], (x[i] - mean_base) * grad[i], 1e-12);
  }
  Tensor xb = x;
  xb.reshape({1, 2, 4, 4});
  const double fx = target_values(model, xb, AttributionTarget::cate)[0];
  double fb = 0;
  for (double v : target_values(model, baselines, AttributionTarget::cate)) fb += v / 5;
  EXPECT_NEAR(sum(map.values), fx - fb, 1e-10);
}

TEST(ExpectedGradients, ImageEqualToBaselineGivesZero) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 2);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 5, 0.0, 1.0);
  Tensor baselines = x;
  baselines.reshape({1, 3, 8, 8});
  const auto map = expected_gradients(model, x, baselines, AttributionTarget::cate, 16, 1);
  for (double v : map.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(ExpectedGradients, LinearInTheTarget) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 3);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 6, 0.0, 1.0);
  const Tensor base = testutil::random_tensor({7, 3, 8, 8}, 7, 0.0, 1.0);
  for (auto sampling : {EgSampling::stratified, EgSampling::iid}) {
    const auto cate = expected_gradients(model, x, base, AttributionTarget::cate, 40, 5, sampling);
    const auto y0 = expected_gradients(model, x, base, AttributionTarget::control_head, 40, 5, sampling);
    const auto y1 = expected_gradients(model, x, base, AttributionTarget::treatment_head, 40, 5, sampling);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(cate.values[i], y1.values[i] - y0.values[i], 1e-10);
    }
  }
}

TEST(ExpectedGradients, DeterministicPerSeed) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 4);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 8, 0.0, 1.0);
  const Tensor base = testutil::random_tensor({9, 3, 8, 8}, 9, 0.0, 1.0);
  const auto a = expected_gradients(model, x, base, AttributionTarget::cate, 30, 11);
  const auto b = expected_gradients(model, x, base, AttributionTarget::cate, 30, 11);
  const auto c = expected_gradients(model, x, base, AttributionTarget::cate, 30, 12);
  EXPECT_TRUE(std::equal(a.values.values().begin(), a.values.values().end(), b.values.values().begin()));
  EXPECT_FALSE(std::equal(a.values.values().begin(), a.values.values().end(), c.values.values().begin()));
  EXPECT_EQ(a.n_samples, 30u);
  EXPECT_EQ(a.seed, 11u);
}

TEST(ExpectedGradients, ApproximatelyComplete) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 5);
  const Tensor base = testutil::random_tensor({16, 3, 8, 8}, 10, 0.0, 1.0);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 11, 0.0, 1.0);
  Tensor xb = x;
  xb.reshape({1, 3, 8, 8});
  // iid draws need many more samples for the same accuracy.
  for (auto [sampling, k] : {std::pair{EgSampling::stratified, std::size_t{1600}},
                             std::pair{EgSampling::iid, std::size_t{64000}}}) {
    const auto map = expected_gradients(model, x, base, AttributionTarget::control_head, k, 3, sampling);
    const double fx = target_values(model, xb, AttributionTarget::control_head)[0];
    double fb = 0;
    for (double v : target_values(model, base, AttributionTarget::control_head)) fb += v / 16;
    EXPECT_NEAR(sum(map.values), fx - fb, 0.05 * std::abs(fx - fb) + 1e-6);
  }
}

TEST(ExpectedGradients, InputChecks) {
  CateEstimator two(testutil::tiny_spec(HeadMode::two_head), 6);
  CateEstimator one(testutil::tiny_spec(HeadMode::single_head), 6);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 12);
  const Tensor base = testutil::random_tensor({2, 3, 8, 8}, 13);
  EXPECT_THROW(expected_gradients(two, x, base, AttributionTarget::cate, 0, 1), Error);
  EXPECT_THROW(expected_gradients(two, testutil::random_tensor({3, 4, 4}, 1), base,
                                  AttributionTarget::cate, 4, 1),
               Error);
  try {
    expected_gradients(one, x, base, AttributionTarget::cate, 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::wrong_mode);
  }
  EXPECT_NO_THROW(expected_gradients(one, x, base, AttributionTarget::control_head, 4, 1));
}

TEST(GuidedGradCam, CamIsNonNegativeAndShaped) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 7);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor x = testutil::random_tensor({3, 8, 8}, 20 + s, 0.0, 1.0);
    const auto parts = gradcam_parts(model, x, AttributionTarget::cate);
    EXPECT_EQ(parts.cam.shape(), (Shape{8, 8}));
    EXPECT_EQ(parts.guided.shape(), (Shape{3, 8, 8}));
    EXPECT_EQ(parts.layer_index, 5u);  // after the tanh following the last conv
    for (double v : parts.cam.values()) EXPECT_GE(v, 0.0);
    const auto map = guided_gradcam(model, x, AttributionTarget::cate);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 64; ++p)
        EXPECT_EQ(map.values[c * 64 + p], parts.guided[c * 64 + p] * parts.cam[p]);
  }
}

TEST(GuidedGradCam, NeedsConvolution) {
  CateEstimator model(linear_spec(HeadMode::two_head), 1);
  try {
    guided_gradcam(model, testutil::random_tensor({2, 4, 4}, 1), AttributionTarget::cate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_conv_layer);
  }
}

TEST(GuidedGradCam, GoldenMap) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 2024);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 2025, 0.0, 1.0);
  const auto map = guided_gradcam(model, x, AttributionTarget::cate);
  const std::filesystem::path golden = std::filesystem::path(PREDBIO_TEST_DATA_DIR) / "ggcam_golden.attr";
  if (const char* update = std::getenv("PREDBIO_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    save_attribution_map(map, golden);
  }
  const auto want = load_attribution_map(golden);
  ASSERT_EQ(want.values.shape(), map.values.shape());
  double norm = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    EXPECT_EQ(map.values[i], want.values[i]) << "element " << i;
    norm += std::abs(map.values[i]);
  }
  EXPECT_GT(norm, 0.0);
}

TEST(Attribution, TrainedModelHighlightsTheDigit) {
  const auto src = synthesize_digits(900, 28, 31);
  const auto data = render_colored_digits(src, ColoredDigitSpec{}, 31);
  OutcomeSimConfig sim;
  sim.seed = 31;
  const auto rct = build_rct_dataset(data.manifest, sim);
  std::vector<int> T;
  std::vector<double> Y;
  for (const auto& r : rct) {
    T.push_back(r.T);
    Y.push_back(r.Y);
  }
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < 900; ++i) (i < 800 ? train_rows : test_rows).push_back(i);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.patience = 0;
  cfg.seed = 1;
  const TrainingSet set{data.images, T, Y, train_rows, {}};
  const auto model = train(set, ModelSpec::default_cnn({3, 28, 28}, HeadMode::two_head), cfg);
  const Tensor baselines = select_baselines(data.images, train_rows, 32, 1);

  double fg_eg = 0, bg_eg = 0, fg_gc = 0, bg_gc = 0;
  std::size_t nf = 0, nb = 0;
  const std::size_t plane = 28 * 28;
  for (std::size_t k = 0; k < 5; ++k) {
    const Tensor x = image_of(data.images, test_rows[k]);
    const auto eg = expected_gradients(model, x, baselines, AttributionTarget::cate, 64, k);
    const auto gc = guided_gradcam(model, x, AttributionTarget::cate);
    for (std::size_t p = 0; p < plane; ++p) {
      const bool ink = x[p] + x[plane + p] > 0.3;
      double e = 0, g = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        e += std::abs(eg.values[c * plane + p]);
        g += std::abs(gc.values[c * plane + p]);
      }
      (ink ? fg_eg : bg_eg) += e;
      (ink ? fg_gc : bg_gc) += g;
      (ink ? nf : nb) += 1;
    }
  }
  EXPECT_GT(fg_eg / nf, bg_eg / nb);
  EXPECT_GT(fg_gc / nf, bg_gc / nb);
}

TEST(Attribution, OverlayAndMapFiles) {
  CateEstimator model(testutil::tiny_spec(HeadMode::two_head), 8);
  const Tensor x = testutil::random_tensor({3, 8, 8}, 30, 0.0, 1.0);
  const Tensor base = testutil::random_tensor({4, 3, 8, 8}, 31, 0.0, 1.0);
  const auto map = expected_gradients(model, x, base, AttributionTarget::treatment_head, 8, 2);
  const auto dir = testutil::temp_dir("overlay");
  const auto single = render_overlay(map, x, dir / "m.png", false);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.png"));
  const auto panels = render_overlay(map, x, dir / "m.png", true);
  ASSERT_EQ(panels.size(), 3u);
  EXPECT_EQ(panels[2], dir / "m_ch2.png");
  EXPECT_THROW(render_overlay(map, testutil::random_tensor({3, 4, 4}, 1), dir / "bad.png", false), Error);

  // An all-zero map still renders (as the grayscale image).
  AttributionMap zero = map;
  zero.values.fill(0.0);
  EXPECT_NO_THROW(render_overlay(zero, x, dir / "zero.png", false));

  save_attribution_map(map, dir / "m.attr");
  const auto back = load_attribution_map(dir / "m.attr");
  EXPECT_EQ(back.target, AttributionTarget::treatment_head);
  EXPECT_EQ(back.method, AttributionMethod::expected_gradients);
  EXPECT_EQ(back.n_samples, 8u);
  EXPECT_EQ(back.seed, 2u);
  EXPECT_TRUE(std::equal(back.values.values().begin(), back.values.values().end(),
                         map.values.values().begin()));
}
