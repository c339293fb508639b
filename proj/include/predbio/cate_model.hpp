#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "predbio/network.hpp"
#include "predbio/tensor.hpp"

namespace predbio {

enum class HeadMode { two_head, single_head };

std::string_view to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view text);

/// Shared encoder followed by one (single_head) or two (two_head) identically
/// shaped, independently parameterised heads. The encoder output is flattened
/// into the first head layer; heads end in a scalar.
struct ModelSpec {
  HeadMode mode = HeadMode::two_head;
  std::vector<nn::LayerSpec> encoder;
  std::vector<nn::LayerSpec> head;
  Shape input_shape{3, 28, 28};

  /// Three conv -> ReLU -> maxpool blocks and a two-layer head.
  static ModelSpec default_cnn(Shape input_shape, HeadMode mode);

  std::size_t head_count() const { return mode == HeadMode::two_head ? 2 : 1; }
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

struct OptimizerSpec {
  std::string name = "adam";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 5;
  std::string loss = "squared_error";

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_loss_control = 0.0;
  double train_loss_treatment = 0.0;
  double val_loss_control = 0.0;
  double val_loss_treatment = 0.0;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double final_loss_control = 0.0;
  double final_loss_treatment = 0.0;
  std::vector<EpochLog> curve;
};

/// Per-head parameter gradients, laid out like the network's parameters.
struct ModelGradients {
  std::vector<std::vector<double>> encoder;
  std::vector<std::vector<std::vector<double>>> heads;
};

struct HeadOutputs {
  std::vector<double> control;    // head 0
  std::vector<double> treatment;  // head 1 (empty for single_head)
};

/// Scalar target as a weighted sum of head outputs, with the input gradient
/// and optionally one encoder activation and its gradient.
struct TargetPass {
  std::vector<double> outputs;  // per sample
  Tensor input_grad;            // same shape as the input batch
  Tensor activation;            // captured encoder activation (if requested)
  Tensor activation_grad;
};

class CateEstimator {
 public:
  CateEstimator(ModelSpec spec, std::uint64_t init_seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  HeadMode mode() const noexcept { return spec_.mode; }
  std::size_t head_count() const noexcept { return heads_.size(); }
  const nn::Sequential& encoder() const noexcept { return encoder_; }
  const nn::Sequential& head(std::size_t i) const { return heads_.at(i); }

  TrainingMeta& meta() noexcept { return meta_; }
  const TrainingMeta& meta() const noexcept { return meta_; }

  /// Parameter blocks in a fixed order: encoder layers, then head 0, head 1.
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;
  std::size_t parameter_count() const;
  ModelGradients zero_gradients() const;

  /// Copies head `from` parameters into head `to`.
  void copy_head(std::size_t from, std::size_t to);

  /// Outputs indexed [head][sample], evaluated in chunks.
  std::vector<std::vector<double>> forward_heads(const Tensor& images) const;

  /// Mean over the batch of squared errors, each sample routed to the head of
  /// its arm (single_head: always head 0). Gradients accumulate into `grads`
  /// when non-null. `arm_sse` receives per-arm sums of squared errors.
  double loss_and_gradient(const Tensor& images, std::span<const int> T,
                           std::span<const double> Y, ModelGradients* grads,
                           std::array<double, 2>* arm_sse = nullptr) const;

  /// Gradient of sum_h head_weights[h] * head_h(x) for every sample in the batch.
  /// `capture_layer` is an encoder activation index (0 = input).
  TargetPass target_pass(const Tensor& images, std::span<const double> head_weights,
                         nn::BackwardMode mode = nn::BackwardMode::standard,
                         std::optional<std::size_t> capture_layer = std::nullopt) const;

 private:
  friend CateEstimator load_checkpoint(const std::filesystem::path& path);

  ModelSpec spec_;
  nn::Sequential encoder_;
  std::vector<nn::Sequential> heads_;
  TrainingMeta meta_;
};

/// Images (N, C, H, W) with per-sample arm and outcome, and the rows used for
/// fitting and for early stopping.
struct TrainingSet {
  const Tensor& images;
  std::span<const int> T;
  std::span<const double> Y;
  std::span<const std::size_t> train_rows;
  std::span<const std::size_t> val_rows;
};

/// Adam on the routed squared-error loss. Deterministic given cfg.seed: the
/// same seed fixes initialisation and the per-epoch data order. With validation
/// rows, training stops after `patience` epochs without improvement and the
/// best-validation parameters are restored.
CateEstimator train(const TrainingSet& data, const ModelSpec& spec, const TrainConfig& cfg);

/// Requires a two_head model.
HeadOutputs predict_outcomes(const CateEstimator& model, const Tensor& images);
/// tau_i = Y1_i - Y0_i. Requires a two_head model.
std::vector<double> estimate_cate(const CateEstimator& model, const Tensor& images);
/// The single head's output. Requires a single_head model.
std::vector<double> baseline_candidate(const CateEstimator& model, const Tensor& images);

/// Self-describing binary: magic line, JSON header (spec, meta, block sizes),
/// raw little-endian doubles.
void save_checkpoint(const CateEstimator& model, const std::filesystem::path& path);
CateEstimator load_checkpoint(const std::filesystem::path& path);

/// CSV: epoch,train_loss,val_loss,train_loss_control,train_loss_treatment,val_loss_control,val_loss_treatment
void write_training_curve(const TrainingMeta& meta, const std::filesystem::path& path);

}  // namespace predbio
