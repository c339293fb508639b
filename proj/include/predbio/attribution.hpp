#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "predbio/cate_model.hpp"
#include "predbio/tensor.hpp"

namespace predbio {

/// cate = Y1(x) - Y0(x); control_head = Y0(x); treatment_head = Y1(x).
enum class AttributionTarget { cate, control_head, treatment_head };
enum class AttributionMethod { expected_gradients, guided_gradcam };

std::string_view to_string(AttributionTarget target);
AttributionTarget parse_attribution_target(std::string_view text);
std::string_view to_string(AttributionMethod method);

struct AttributionMap {
  Tensor values;  // (C, H, W), signed
  AttributionTarget target = AttributionTarget::cate;
  AttributionMethod method = AttributionMethod::expected_gradients;
  std::size_t n_samples = 0;
  std::string baseline;
  std::uint64_t seed = 0;
};

/// Head weights realising the target as a linear combination of head outputs.
/// Single-head models only support control_head (their only head).
std::vector<double> target_head_weights(const CateEstimator& model, AttributionTarget target);

/// Target value for each image of an (N, C, H, W) batch.
std::vector<double> target_values(const CateEstimator& model, const Tensor& images,
                                  AttributionTarget target);

/// How (baseline, alpha) pairs are drawn for expected gradients.
///  iid:        baseline uniform over the set, alpha ~ U(0, 1), weight 1/k.
///  stratified: draws are spread evenly over the baselines (every baseline is
///              used once k >= |baselines|) and alpha is stratified within each
///              baseline's draws; each baseline carries weight 1/|used|.
/// Both are unbiased for the same path-integral expectation.
enum class EgSampling { iid, stratified };

/// Expected gradients of the target for one (C, H, W) image against an
/// (B, C, H, W) baseline set. Deterministic given seed.
AttributionMap expected_gradients(const CateEstimator& model, const Tensor& image,
                                  const Tensor& baselines, AttributionTarget target,
                                  std::size_t k, std::uint64_t seed,
                                  EgSampling sampling = EgSampling::stratified);

struct GradCamParts {
  Tensor cam;     // (H, W) rectified and bilinearly upsampled class-activation map
  Tensor guided;  // (C, H, W) guided-backpropagation input gradient
  std::size_t layer_index = 0;  // encoder activation index used for the CAM
};

/// The last convolutional layer's activation (after its nonlinearity when one
/// directly follows) provides the CAM. Throws no_conv_layer otherwise.
GradCamParts gradcam_parts(const CateEstimator& model, const Tensor& image,
                           AttributionTarget target);

/// Elementwise product of the guided gradient and the CAM.
AttributionMap guided_gradcam(const CateEstimator& model, const Tensor& image,
                              AttributionTarget target);

/// Random subset of `count` images (all when fewer are available) used as EG baselines.
Tensor select_baselines(const Tensor& images, std::span<const std::size_t> rows,
                        std::size_t count, std::uint64_t seed);

/// Blends a diverging map (negative red, positive blue, scaled symmetrically by
/// the largest magnitude) over a grayscale copy of the image. With
/// `per_channel`, writes one panel per channel as <stem>_ch<c>.png; otherwise the
/// channel sum goes to `out_path`. Returns the written paths.
std::vector<std::filesystem::path> render_overlay(const AttributionMap& map, const Tensor& image,
                                                  const std::filesystem::path& out_path,
                                                  bool per_channel);

/// Binary: magic line, JSON header (shape, target, method, metadata), raw doubles.
void save_attribution_map(const AttributionMap& map, const std::filesystem::path& path);
AttributionMap load_attribution_map(const std::filesystem::path& path);

}  // namespace predbio
