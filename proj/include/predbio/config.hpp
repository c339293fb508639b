#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "predbio/attribution.hpp"
#include "predbio/cate_model.hpp"
#include "predbio/datasets.hpp"
#include "predbio/experiment.hpp"
#include "predbio/sim.hpp"

namespace predbio {

struct DatasetConfig {
  /// "colored_digits" (generated under `root`) or "annotations" (an existing table).
  std::string kind = "colored_digits";
  std::string id = "cmnist";
  std::filesystem::path root = "data/cmnist";
  std::size_t n = 5000;
  std::uint64_t seed = 0;
  std::vector<double> split_fractions{0.6, 0.2, 0.2};
  ColoredDigitSpec colored;
  /// Optional MNIST IDX files; procedurally drawn digits are used otherwise.
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::filesystem::path annotations;
  std::string prog_column = "x_prog";
  std::string pred_column = "x_pred";
  bool normalize = true;

  std::filesystem::path manifest_path() const;
};

struct AttributionConfig {
  AttributionMethod method = AttributionMethod::expected_gradients;
  AttributionTarget target = AttributionTarget::cate;
  std::size_t k = 200;
  std::size_t n_baselines = 64;
  std::uint64_t seed = 0;
  std::size_t n_images = 10;
  bool per_channel = false;
};

struct AppConfig {
  DatasetConfig dataset;
  OutcomeSimConfig simulation;
  ModelSpec model = ModelSpec::default_cnn({3, 28, 28}, HeadMode::two_head);
  TrainConfig training;
  GridSpec grid;
  std::size_t grid_workers = 1;
  std::size_t bins = 6;
  AttributionConfig attribution;
  std::filesystem::path output_root = "out";

  void validate() const;
};

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON and
/// taken as a plain string when that fails.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the JSON file (optional), then PREDBIO_OUTPUT_ROOT, then the overrides.
AppConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides);

AppConfig config_from_json(const nlohmann::json& doc);

/// Draws (or reads from IDX) the source digits and writes the colored-digit
/// dataset under dataset.root.
ColoredDigits generate_dataset(const DatasetConfig& dataset);

/// The manifest named by the dataset section (feature set a roles).
DatasetManifest load_dataset_manifest(const DatasetConfig& dataset);

/// Manifest and images of the configured dataset.
GridData load_grid_data(const DatasetConfig& dataset);
nlohmann::json config_to_json(const AppConfig& config);

}  // namespace predbio
