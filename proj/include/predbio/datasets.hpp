#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "predbio/manifest.hpp"
#include "predbio/tensor.hpp"

namespace predbio {

/// Grayscale digit images (N, 1, H, W) in [0, 1] with their classes.
struct DigitImages {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Procedurally drawn handwritten-style digits: stroke templates per class with
/// random affine distortion, vertex jitter and stroke width. Classes are drawn
/// uniformly at random.
DigitImages synthesize_digits(std::size_t n, std::size_t image_size, std::uint64_t seed);

/// Reads MNIST-format IDX files (idx3 images, idx1 labels). `limit` = 0 reads all.
DigitImages load_idx_digits(const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path, std::size_t limit = 0);

enum class ColoredFeature { color, circle };

struct ColoredDigitSpec {
  double color_probability = 0.5;
  std::set<int> circle_digit_set{0, 6, 8, 9};
  /// The other feature is predictive. color -> feature set (a), circle -> (b).
  ColoredFeature prognostic = ColoredFeature::color;
  std::size_t image_size = 28;

  ColoredFeature predictive() const {
    return prognostic == ColoredFeature::color ? ColoredFeature::circle : ColoredFeature::color;
  }
  void validate() const;
};

void to_json(nlohmann::json& j, const ColoredDigitSpec& s);
void from_json(const nlohmann::json& j, ColoredDigitSpec& s);

struct ColoredDigits {
  Tensor images;  // (N, 3, H, W); green digits on G, non-green (red) on R
  std::vector<std::string> sample_ids;
  std::vector<int> digits;
  std::vector<double> x_color;   // 1 iff green
  std::vector<double> x_circle;  // 1 iff digit class is in circle_digit_set
  DatasetManifest manifest;      // roles per spec.prognostic; image_path empty until written
};

/// In-memory construction. The colour of sample i is a Bernoulli draw from the
/// stream keyed by (seed, sample id).
ColoredDigits render_colored_digits(const DigitImages& source, const ColoredDigitSpec& spec,
                                    std::uint64_t seed);

/// Renders, splits and writes `<root>/<split>/<sample_id>.png`, `<root>/manifest.csv`
/// and `<root>/annotations.csv` (sample_id,image_path,digit,color,circle,split).
ColoredDigits generate_colored_digits(const DigitImages& source, const ColoredDigitSpec& spec,
                                      std::uint64_t seed, const std::filesystem::path& root,
                                      std::span<const double> split_fractions);

/// Builds a manifest from a CSV with sample_id, image_path, the two named feature
/// columns and an optional split column (missing -> train). With `normalize`,
/// non-binary columns are min-max scaled with train-split statistics and
/// clamped to [0, 1]; binary {0,1} columns pass through.
DatasetManifest load_annotation_table(const std::filesystem::path& path,
                                      const std::string& prog_column,
                                      const std::string& pred_column, bool normalize,
                                      bool require_images = true);

/// Random split with largest-remainder counts. Fractions map to train, val, test
/// in order and must sum to 1.
DatasetManifest split_dataset(const DatasetManifest& manifest,
                              std::span<const double> fractions, std::uint64_t seed);

/// Loads every manifest image into an (N, C, H, W) tensor.
Tensor load_images(const DatasetManifest& manifest);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace predbio
