#include "predbio/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "predbio/error.hpp"
#include "predbio/image_io.hpp"
#include "predbio/rng.hpp"

namespace predbio {

namespace {

constexpr char kMapMagic[] = "PREDBIO-ATTRIBUTION 1\n";
constexpr std::size_t kEgChunk = 64;

struct Draw {
  std::size_t baseline;
  double alpha;
  double weight;
};

std::vector<Draw> draw_iid(std::size_t k, std::size_t n_baselines, Rng& rng) {
  std::vector<Draw> draws(k);
  for (auto& d : draws) {
    d.baseline = static_cast<std::size_t>(rng.index(n_baselines));
    d.alpha = rng.uniform();
    d.weight = 1.0 / static_cast<double>(k);
  }
  return draws;
}

std::vector<Draw> draw_stratified(std::size_t k, std::size_t n_baselines, Rng& rng) {
  std::vector<std::size_t> order(n_baselines);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());

  const std::size_t used = std::min(k, n_baselines);
  std::vector<std::size_t> per_baseline(used, k / used);
  for (std::size_t i = 0; i < k % used; ++i) ++per_baseline[i];

  std::vector<Draw> draws;
  draws.reserve(k);
  if (k < n_baselines) {
    // One draw per distinct baseline; stratify alpha across the draws.
    std::vector<std::size_t> strata(k);
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata.begin(), strata.end());
    for (std::size_t j = 0; j < k; ++j) {
      draws.push_back({order[j], (static_cast<double>(strata[j]) + rng.uniform()) / k,
                       1.0 / static_cast<double>(k)});
    }
    return draws;
  }
  for (std::size_t b = 0; b < used; ++b) {
    const std::size_t m = per_baseline[b];
    const double w = 1.0 / (static_cast<double>(used) * static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i) {
      draws.push_back({order[b], (static_cast<double>(i) + rng.uniform()) / m, w});
    }
  }
  return draws;
}

void check_image(const CateEstimator& model, const Tensor& image) {
  if (image.shape() != model.spec().input_shape) {
    throw Error(Errc::shape_mismatch, "image " + shape_string(image.shape()) +
                                          " does not match model input " +
                                          shape_string(model.spec().input_shape));
  }
}

Tensor as_batch(const Tensor& image) {
  Shape s{1};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  Tensor b = image;
  b.reshape(s);
  return b;
}

// Bilinear resize of an (h, w) map with half-pixel centres.
Tensor upsample_bilinear(std::span<const double> src, std::size_t h, std::size_t w,
                         std::size_t H, std::size_t W) {
  Tensor out({H, W});
  const double sy = static_cast<double>(h) / static_cast<double>(H);
  const double sx = static_cast<double>(w) / static_cast<double>(W);
  for (std::size_t y = 0; y < H; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < W; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = (1 - tx) * src[y0 * w + x0] + tx * src[y0 * w + x1];
      const double bottom = (1 - tx) * src[y1 * w + x0] + tx * src[y1 * w + x1];
      out[y * W + x] = (1 - ty) * top + ty * bottom;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(AttributionTarget target) {
  switch (target) {
    case AttributionTarget::cate: return "cate";
    case AttributionTarget::control_head: return "control_head";
    case AttributionTarget::treatment_head: return "treatment_head";
  }
  return "cate";
}

AttributionTarget parse_attribution_target(std::string_view text) {
  for (auto t : {AttributionTarget::cate, AttributionTarget::control_head,
                 AttributionTarget::treatment_head}) {
    if (text == to_string(t)) return t;
  }
  throw Error(Errc::config, "unknown attribution target '" + std::string(text) + "'");
}

std::string_view to_string(AttributionMethod method) {
  return method == AttributionMethod::expected_gradients ? "expected_gradients"
                                                         : "guided_gradcam";
}

std::vector<double> target_head_weights(const CateEstimator& model, AttributionTarget target) {
  if (model.head_count() == 1) {
    if (target != AttributionTarget::control_head) {
      throw Error(Errc::wrong_mode, "single_head models only support the control_head target");
    }
    return {1.0};
  }
  switch (target) {
    case AttributionTarget::cate: return {-1.0, 1.0};
    case AttributionTarget::control_head: return {1.0, 0.0};
    case AttributionTarget::treatment_head: return {0.0, 1.0};
  }
  return {};
}

std::vector<double> target_values(const CateEstimator& model, const Tensor& images,
                                  AttributionTarget target) {
  const auto weights = target_head_weights(model, target);
  const auto heads = model.forward_heads(images);
  std::vector<double> out(images.dim(0), 0.0);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (weights[h] == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[h] * heads[h][i];
  }
  return out;
}

AttributionMap expected_gradients(const CateEstimator& model, const Tensor& image,
                                  const Tensor& baselines, AttributionTarget target,
                                  std::size_t k, std::uint64_t seed, EgSampling sampling) {
  check_image(model, image);
  if (k == 0) throw Error(Errc::invalid_argument, "expected_gradients: k must be >= 1");
  if (baselines.rank() != 4 || baselines.dim(0) == 0) {
    throw Error(Errc::invalid_argument, "expected_gradients: baselines must be a non-empty batch");
  }
  if (baselines.sample_shape() != image.shape()) {
    throw Error(Errc::shape_mismatch, "baseline shape " + shape_string(baselines.sample_shape()) +
                                          " does not match image " + shape_string(image.shape()));
  }
  const auto weights = target_head_weights(model, target);
  Rng rng(mix_seed(seed, hash_string("expected-gradients")));
  const auto draws = sampling == EgSampling::iid ? draw_iid(k, baselines.dim(0), rng)
                                                 : draw_stratified(k, baselines.dim(0), rng);

  const std::size_t dim = image.size();
  AttributionMap map;
  map.values = Tensor(image.shape(), 0.0);
  map.target = target;
  map.method = AttributionMethod::expected_gradients;
  map.n_samples = k;
  map.baseline = std::to_string(baselines.dim(0)) + " baseline images, " +
                 (sampling == EgSampling::iid ? "iid" : "stratified") + " sampling";
  map.seed = seed;

  Shape batch_shape = baselines.shape();
  for (std::size_t start = 0; start < draws.size(); start += kEgChunk) {
    const std::size_t stop = std::min(draws.size(), start + kEgChunk);
    batch_shape[0] = stop - start;
    Tensor batch(batch_shape);
    for (std::size_t j = start; j < stop; ++j) {
      auto dst = batch.sample(j - start);
      auto base = baselines.sample(draws[j].baseline);
      for (std::size_t i = 0; i < dim; ++i) {
        dst[i] = base[i] + draws[j].alpha * (image[i] - base[i]);
      }
    }
    const auto pass = model.target_pass(batch, weights);
    for (std::size_t j = start; j < stop; ++j) {
      auto grad = pass.input_grad.sample(j - start);
      auto base = baselines.sample(draws[j].baseline);
      const double w = draws[j].weight;
      for (std::size_t i = 0; i < dim; ++i) map.values[i] += w * (image[i] - base[i]) * grad[i];
    }
  }
  return map;
}

GradCamParts gradcam_parts(const CateEstimator& model, const Tensor& image,
                           AttributionTarget target) {
  check_image(model, image);
  const auto& enc = model.encoder();
  std::optional<std::size_t> last_conv;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (enc.layer(i).type() == nn::LayerType::conv) last_conv = i;
  }
  if (!last_conv) throw Error(Errc::no_conv_layer, "guided Grad-CAM needs a convolutional layer");
  std::size_t capture = *last_conv + 1;
  if (capture < enc.size()) {
    const auto next = enc.layer(capture).type();
    if (next == nn::LayerType::relu || next == nn::LayerType::tanh) ++capture;
  }

  const auto weights = target_head_weights(model, target);
  const Tensor batch = as_batch(image);
  const auto standard = model.target_pass(batch, weights, nn::BackwardMode::standard, capture);
  const auto guided = model.target_pass(batch, weights, nn::BackwardMode::guided);

  const Tensor& act = standard.activation;  // (1, K, h, w)
  const Tensor& grad = standard.activation_grad;
  const std::size_t channels = act.dim(1);
  const std::size_t h = act.dim(2);
  const std::size_t w = act.dim(3);
  const std::size_t plane = h * w;
  std::vector<double> cam(plane, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double alpha = 0.0;
    for (std::size_t p = 0; p < plane; ++p) alpha += grad[c * plane + p];
    alpha /= static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) cam[p] += alpha * act[c * plane + p];
  }
  for (auto& v : cam) v = std::max(v, 0.0);

  GradCamParts parts;
  parts.layer_index = capture;
  parts.cam = upsample_bilinear(cam, h, w, image.dim(1), image.dim(2));
  parts.guided = guided.input_grad;
  parts.guided.reshape(image.shape());
  return parts;
}

AttributionMap guided_gradcam(const CateEstimator& model, const Tensor& image,
                              AttributionTarget target) {
  const auto parts = gradcam_parts(model, image, target);
  AttributionMap map;
  map.values = parts.guided;
  const std::size_t plane = image.dim(1) * image.dim(2);
  for (std::size_t c = 0; c < image.dim(0); ++c)
    for (std::size_t p = 0; p < plane; ++p) map.values[c * plane + p] *= parts.cam[p];
  map.target = target;
  map.method = AttributionMethod::guided_gradcam;
  map.n_samples = 1;
  map.baseline = "none";
  return map;
}

Tensor select_baselines(const Tensor& images, std::span<const std::size_t> rows,
                        std::size_t count, std::uint64_t seed) {
  if (rows.empty()) throw Error(Errc::empty_dataset, "select_baselines: no candidate rows");
  std::vector<std::size_t> pool(rows.begin(), rows.end());
  Rng rng(mix_seed(seed, hash_string("baselines")));
  rng.shuffle(pool.begin(), pool.end());
  pool.resize(std::min(count, pool.size()));
  return images.gather(pool);
}

std::vector<std::filesystem::path> render_overlay(const AttributionMap& map, const Tensor& image,
                                                  const std::filesystem::path& out_path,
                                                  bool per_channel) {
  if (map.values.shape() != image.shape() || image.rank() != 3) {
    throw Error(Errc::shape_mismatch, "render_overlay: map " + shape_string(map.values.shape()) +
                                          " and image " + shape_string(image.shape()) +
                                          " differ");
  }
  const std::size_t C = image.dim(0);
  const std::size_t H = image.dim(1);
  const std::size_t W = image.dim(2);
  const std::size_t plane = H * W;

  std::vector<double> gray(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    gray[p] = C == 3 ? 0.299 * image[p] + 0.587 * image[plane + p] + 0.114 * image[2 * plane + p]
                     : image[p];
  }

  std::vector<std::vector<double>> panels;
  if (per_channel) {
    for (std::size_t c = 0; c < C; ++c) {
      panels.emplace_back(map.values.values().begin() + static_cast<std::ptrdiff_t>(c * plane),
                          map.values.values().begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    }
  } else {
    std::vector<double> sum(plane, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < plane; ++p) sum[p] += map.values[c * plane + p];
    panels.push_back(std::move(sum));
  }
  double scale = 0.0;
  for (const auto& panel : panels)
    for (double v : panel) scale = std::max(scale, std::abs(v));

  constexpr double kMaxAlpha = 0.85;
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < panels.size(); ++k) {
    Image8 out{W, H, 3, std::vector<std::uint8_t>(plane * 3)};
    for (std::size_t p = 0; p < plane; ++p) {
      const double m = scale > 0.0 ? panels[k][p] / scale : 0.0;
      const double a = kMaxAlpha * std::abs(m);
      const double rgb_target[3] = {m < 0 ? 1.0 : 0.0, 0.0, m > 0 ? 1.0 : 0.0};
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (1.0 - a) * gray[p] + a * rgb_target[c];
        out.pixels[p * 3 + c] =
            static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
    std::filesystem::path path = out_path;
    if (per_channel) {
      path = out_path.parent_path() /
             (out_path.stem().string() + "_ch" + std::to_string(k) + out_path.extension().string());
    }
    write_png(path, out);
    written.push_back(path);
  }
  return written;
}

void save_attribution_map(const AttributionMap& map, const std::filesystem::path& path) {
  const nlohmann::json header = {{"shape", map.values.shape()},
                                 {"target", to_string(map.target)},
                                 {"method", to_string(map.method)},
                                 {"n_samples", map.n_samples},
                                 {"baseline", map.baseline},
                                 {"seed", map.seed}};
  const std::string text = header.dump();
  const std::uint64_t length = text.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(kMapMagic, sizeof(kMapMagic) - 1);
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(map.values.data()),
            static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

AttributionMap load_attribution_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string magic(sizeof(kMapMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kMapMagic) throw Error(Errc::io, path.string() + ": not an attribution map");
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || length > (1u << 20)) throw Error(Errc::io, path.string() + ": bad header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  const auto header = nlohmann::json::parse(text);

  AttributionMap map;
  map.values = Tensor(header.at("shape").get<Shape>());
  map.target = parse_attribution_target(header.at("target").get<std::string>());
  map.method = header.at("method").get<std::string>() == "guided_gradcam"
                   ? AttributionMethod::guided_gradcam
                   : AttributionMethod::expected_gradients;
  map.n_samples = header.at("n_samples").get<std::size_t>();
  map.baseline = header.at("baseline").get<std::string>();
  map.seed = header.at("seed").get<std::uint64_t>();
  in.read(reinterpret_cast<char*>(map.values.data()),
          static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (!in) throw Error(Errc::io, path.string() + ": truncated values");
  return map;
}

}  // namespace predbio
