#include "predbio/cate_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "predbio/csv.hpp"
#include "predbio/error.hpp"
#include "predbio/rng.hpp"

namespace predbio {

namespace {

constexpr char kCheckpointMagic[] = "PREDBIO-CHECKPOINT 1\n";
constexpr std::size_t kInferenceChunk = 256;

}  // namespace

std::string_view to_string(HeadMode mode) {
  return mode == HeadMode::two_head ? "two_head" : "single_head";
}

HeadMode parse_head_mode(std::string_view text) {
  if (text == "two_head") return HeadMode::two_head;
  if (text == "single_head") return HeadMode::single_head;
  throw Error(Errc::config, "unknown model mode '" + std::string(text) + "'");
}

ModelSpec ModelSpec::default_cnn(Shape input_shape, HeadMode mode) {
  using nn::LayerSpec;
  using nn::LayerType;
  ModelSpec s;
  s.mode = mode;
  s.input_shape = std::move(input_shape);
  for (std::size_t channels : {8, 16, 32}) {
    s.encoder.push_back({LayerType::conv, channels, 3, 2});
    s.encoder.push_back({LayerType::relu, 0, 3, 2});
    s.encoder.push_back({LayerType::maxpool, 0, 3, 2});
  }
  s.head = {{LayerType::dense, 32, 3, 2}, {LayerType::relu, 0, 3, 2}, {LayerType::dense, 1, 3, 2}};
  return s;
}

void ModelSpec::validate() const {
  if (input_shape.size() != 3 || shape_volume(input_shape) == 0) {
    throw Error(Errc::config, "input_shape must be (channels, height, width)");
  }
  if (head.empty() || head.back().type != nn::LayerType::dense || head.back().units != 1) {
    throw Error(Errc::config, "head must end in a dense layer with one unit");
  }
  // Building the layers checks shape compatibility.
  nn::Sequential enc(encoder, input_shape);
  nn::Sequential h(head, enc.output_shape());
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"mode", to_string(s.mode)},
       {"input_shape", s.input_shape},
       {"encoder", s.encoder},
       {"head", s.head}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  const auto mode = parse_head_mode(j.value("mode", std::string("two_head")));
  Shape input = j.value("input_shape", Shape{3, 28, 28});
  s = ModelSpec::default_cnn(input, mode);
  if (j.contains("encoder")) s.encoder = j.at("encoder").get<std::vector<nn::LayerSpec>>();
  if (j.contains("head")) s.head = j.at("head").get<std::vector<nn::LayerSpec>>();
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(Errc::config, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::config, "learning_rate must be > 0");
  if (optimizer.name != "adam") {
    throw Error(Errc::config, "unsupported optimizer '" + optimizer.name + "'");
  }
  if (loss != "squared_error") throw Error(Errc::config, "unsupported loss '" + loss + "'");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"optimizer",
        {{"name", c.optimizer.name},
         {"beta1", c.optimizer.beta1},
         {"beta2", c.optimizer.beta2},
         {"epsilon", c.optimizer.epsilon}}},
       {"seed", c.seed},
       {"patience", c.patience},
       {"loss", c.loss}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.name = o.value("name", c.optimizer.name);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
  }
  c.seed = j.value("seed", c.seed);
  c.patience = j.value("patience", c.patience);
  c.loss = j.value("loss", c.loss);
}

CateEstimator::CateEstimator(ModelSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  spec_.validate();
  encoder_ = nn::Sequential(spec_.encoder, spec_.input_shape);
  Rng rng(mix_seed(init_seed, hash_string("init")));
  encoder_.initialize(rng);
  for (std::size_t h = 0; h < spec_.head_count(); ++h) {
    heads_.emplace_back(spec_.head, encoder_.output_shape());
    heads_.back().initialize(rng);
  }
  meta_.seed = init_seed;
}

std::vector<std::span<double>> CateEstimator::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (std::size_t i = 0; i < encoder_.size(); ++i) blocks.push_back(encoder_.layer(i).params());
  for (auto& h : heads_)
    for (std::size_t i = 0; i < h.size(); ++i) blocks.push_back(h.layer(i).params());
  return blocks;
}

std::vector<std::span<const double>> CateEstimator::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  for (std::size_t i = 0; i < encoder_.size(); ++i) blocks.push_back(encoder_.layer(i).params());
  for (const auto& h : heads_)
    for (std::size_t i = 0; i < h.size(); ++i) blocks.push_back(h.layer(i).params());
  return blocks;
}

std::size_t CateEstimator::parameter_count() const {
  std::size_t n = 0;
  for (auto b : parameter_blocks()) n += b.size();
  return n;
}

ModelGradients CateEstimator::zero_gradients() const {
  ModelGradients g;
  g.encoder = encoder_.zero_grads();
  for (const auto& h : heads_) g.heads.push_back(h.zero_grads());
  return g;
}

void CateEstimator::copy_head(std::size_t from, std::size_t to) {
  heads_.at(to) = heads_.at(from);
}

std::vector<std::vector<double>> CateEstimator::forward_heads(const Tensor& images) const {
  if (images.rank() != 4 || images.sample_shape() != spec_.input_shape) {
    throw Error(Errc::shape_mismatch, "images " + shape_string(images.shape()) +
                                          " do not match model input " +
                                          shape_string(spec_.input_shape));
  }
  const std::size_t n = images.dim(0);
  std::vector<std::vector<double>> out(heads_.size(), std::vector<double>(n));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += kInferenceChunk) {
    const std::size_t stop = std::min(n, start + kInferenceChunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor chunk = images.gather(idx);
    const Tensor features = encoder_.forward(chunk);
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      const Tensor y = heads_[h].forward(features);
      std::copy(y.values().begin(), y.values().end(),
                out[h].begin() + static_cast<std::ptrdiff_t>(start));
    }
  }
  return out;
}

double CateEstimator::loss_and_gradient(const Tensor& images, std::span<const int> T,
                                        std::span<const double> Y, ModelGradients* grads,
                                        std::array<double, 2>* arm_sse) const {
  const std::size_t n = images.dim(0);
  if (T.size() != n || Y.size() != n) {
    throw Error(Errc::shape_mismatch, "loss_and_gradient: T/Y length differs from batch");
  }
  nn::Tape enc_tape;
  const Tensor& features = encoder_.forward(images, enc_tape);
  Tensor dfeatures(features.shape(), 0.0);
  Tensor dfeatures_head;
  double sse = 0.0;
  std::array<double, 2> per_arm{0.0, 0.0};
  const double scale = 2.0 / static_cast<double>(n);

  for (std::size_t h = 0; h < heads_.size(); ++h) {
    nn::Tape tape;
    const Tensor& out = heads_[h].forward(features, tape);
    Tensor dout({n, 1}, 0.0);
    bool routed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t head_for_sample = heads_.size() == 2 ? static_cast<std::size_t>(T[i]) : 0;
      if (head_for_sample != h) continue;
      const double r = out[i] - Y[i];
      sse += r * r;
      per_arm[static_cast<std::size_t>(T[i])] += r * r;
      dout[i] = scale * r;
      routed = true;
    }
    if (grads && routed) {
      heads_[h].backward(tape, dout, &grads->heads[h], &dfeatures_head);
      for (std::size_t k = 0; k < dfeatures.size(); ++k) dfeatures[k] += dfeatures_head[k];
    }
  }
  if (grads) encoder_.backward(enc_tape, dfeatures, &grads->encoder, nullptr);
  if (arm_sse) *arm_sse = per_arm;
  return sse / static_cast<double>(n);
}

TargetPass CateEstimator::target_pass(const Tensor& images, std::span<const double> head_weights,
                                      nn::BackwardMode mode,
                                      std::optional<std::size_t> capture_layer) const {
  if (head_weights.size() != heads_.size()) {
    throw Error(Errc::wrong_mode, "target weights do not match the number of heads");
  }
  if (images.rank() != 4 || images.sample_shape() != spec_.input_shape) {
    throw Error(Errc::shape_mismatch, "images " + shape_string(images.shape()) +
                                          " do not match model input " +
                                          shape_string(spec_.input_shape));
  }
  if (capture_layer && *capture_layer > encoder_.size()) {
    throw Error(Errc::invalid_argument, "capture layer out of range");
  }
  const std::size_t n = images.dim(0);
  TargetPass pass;
  pass.outputs.assign(n, 0.0);
  nn::Tape enc_tape;
  const Tensor& features = encoder_.forward(images, enc_tape);
  Tensor dfeatures(features.shape(), 0.0);
  Tensor dfeatures_head;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    if (head_weights[h] == 0.0) continue;
    nn::Tape tape;
    const Tensor& out = heads_[h].forward(features, tape);
    for (std::size_t i = 0; i < n; ++i) pass.outputs[i] += head_weights[h] * out[i];
    Tensor dout({n, 1}, head_weights[h]);
    heads_[h].backward(tape, dout, nullptr, &dfeatures_head, mode);
    for (std::size_t k = 0; k < dfeatures.size(); ++k) dfeatures[k] += dfeatures_head[k];
  }
  nn::GradObserver observe;
  if (capture_layer) {
    pass.activation = enc_tape.activations[*capture_layer];
    observe = [&](std::size_t index, const Tensor& grad) {
      if (index == *capture_layer) pass.activation_grad = grad;
    };
  }
  encoder_.backward(enc_tape, dfeatures, nullptr, &pass.input_grad, mode, observe);
  return pass;
}

namespace {

void check_training_set(const TrainingSet& data, const ModelSpec& spec) {
  const auto& img = data.images;
  if (img.rank() != 4 || img.sample_shape() != spec.input_shape) {
    throw Error(Errc::shape_mismatch, "training images " + shape_string(img.shape()) +
                                          " do not match input_shape " +
                                          shape_string(spec.input_shape));
  }
  const std::size_t n = img.dim(0);
  if (data.T.size() != n || data.Y.size() != n) {
    throw Error(Errc::shape_mismatch, "T and Y must have one entry per image");
  }
  if (data.train_rows.empty()) throw Error(Errc::empty_dataset, "no training rows");
  std::array<std::size_t, 2> arm_counts{0, 0};
  for (auto r : data.train_rows) {
    if (r >= n) throw Error(Errc::invalid_argument, "training row index out of range");
    if (data.T[r] != 0 && data.T[r] != 1) throw Error(Errc::invalid_argument, "T must be 0/1");
    if (!std::isfinite(data.Y[r])) throw Error(Errc::non_finite, "non-finite outcome");
    ++arm_counts[static_cast<std::size_t>(data.T[r])];
  }
  for (auto r : data.val_rows) {
    if (r >= n) throw Error(Errc::invalid_argument, "validation row index out of range");
  }
  if (spec.mode == HeadMode::two_head && (arm_counts[0] == 0 || arm_counts[1] == 0)) {
    throw Error(Errc::arm_absent, "two_head training needs both arms; control=" +
                                      std::to_string(arm_counts[0]) +
                                      " treatment=" + std::to_string(arm_counts[1]));
  }
}

class Adam {
 public:
  Adam(const OptimizerSpec& spec, double lr, const ModelGradients& shape)
      : spec_(spec), lr_(lr), m_(flatten_shape(shape)), v_(m_) {}

  void step(std::vector<std::span<double>> params, const ModelGradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
    std::size_t b = 0;
    auto update = [&](const std::vector<double>& g) {
      auto p = params[b];
      auto& m = m_[b];
      auto& v = v_[b];
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = spec_.beta1 * m[i] + (1.0 - spec_.beta1) * g[i];
        v[i] = spec_.beta2 * v[i] + (1.0 - spec_.beta2) * g[i] * g[i];
        p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + spec_.epsilon);
      }
      ++b;
    };
    for (const auto& g : grads.encoder) update(g);
    for (const auto& head : grads.heads)
      for (const auto& g : head) update(g);
  }

 private:
  static std::vector<std::vector<double>> flatten_shape(const ModelGradients& g) {
    std::vector<std::vector<double>> out = g.encoder;
    for (const auto& h : g.heads) out.insert(out.end(), h.begin(), h.end());
    for (auto& v : out) std::fill(v.begin(), v.end(), 0.0);
    return out;
  }

  OptimizerSpec spec_;
  double lr_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

void zero(ModelGradients& g) {
  for (auto& v : g.encoder) std::fill(v.begin(), v.end(), 0.0);
  for (auto& h : g.heads)
    for (auto& v : h) std::fill(v.begin(), v.end(), 0.0);
}

struct SplitLoss {
  double total = 0.0;
  double control = 0.0;
  double treatment = 0.0;
};

SplitLoss routed_loss(const CateEstimator& model, const TrainingSet& data,
                      std::span<const std::size_t> rows) {
  SplitLoss loss;
  if (rows.empty()) return loss;
  const Tensor images = data.images.gather(rows);
  const auto outputs = model.forward_heads(images);
  std::array<std::size_t, 2> counts{0, 0};
  double sse = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int t = data.T[rows[i]];
    const std::size_t h = model.head_count() == 2 ? static_cast<std::size_t>(t) : 0;
    const double r = outputs[h][i] - data.Y[rows[i]];
    sse += r * r;
    (t == 0 ? loss.control : loss.treatment) += r * r;
    ++counts[static_cast<std::size_t>(t)];
  }
  loss.total = sse / static_cast<double>(rows.size());
  loss.control = counts[0] ? loss.control / static_cast<double>(counts[0]) : 0.0;
  loss.treatment = counts[1] ? loss.treatment / static_cast<double>(counts[1]) : 0.0;
  return loss;
}

std::vector<std::vector<double>> snapshot(const CateEstimator& model) {
  std::vector<std::vector<double>> out;
  for (auto b : model.parameter_blocks()) out.emplace_back(b.begin(), b.end());
  return out;
}

void restore(CateEstimator& model, const std::vector<std::vector<double>>& saved) {
  auto blocks = model.parameter_blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::copy(saved[i].begin(), saved[i].end(), blocks[i].begin());
  }
}

}  // namespace

CateEstimator train(const TrainingSet& data, const ModelSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  check_training_set(data, spec);

  CateEstimator model(spec, cfg.seed);
  ModelGradients grads = model.zero_gradients();
  Adam adam(cfg.optimizer, cfg.learning_rate, grads);

  std::vector<std::size_t> order(data.train_rows.begin(), data.train_rows.end());
  std::vector<std::size_t> batch_rows;
  std::vector<int> batch_t;
  std::vector<double> batch_y;

  double best_val = INFINITY;
  std::size_t since_best = 0;
  std::vector<std::vector<double>> best_params;
  auto& meta = model.meta();
  meta.seed = cfg.seed;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, epoch));
    rng.shuffle(order.begin(), order.end());

    double sse = 0.0;
    std::array<double, 2> arm_sse_total{0.0, 0.0};
    std::array<std::size_t, 2> arm_counts{0, 0};
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(stop));
      batch_t.clear();
      batch_y.clear();
      for (auto r : batch_rows) {
        batch_t.push_back(data.T[r]);
        batch_y.push_back(data.Y[r]);
        ++arm_counts[static_cast<std::size_t>(data.T[r])];
      }
      const Tensor x = data.images.gather(batch_rows);
      zero(grads);
      std::array<double, 2> arm_sse{};
      const double loss = model.loss_and_gradient(x, batch_t, batch_y, &grads, &arm_sse);
      if (!std::isfinite(loss)) {
        throw Error(Errc::nan_loss, "non-finite training loss at epoch " + std::to_string(epoch));
      }
      sse += loss * static_cast<double>(batch_rows.size());
      arm_sse_total[0] += arm_sse[0];
      arm_sse_total[1] += arm_sse[1];
      adam.step(model.parameter_blocks(), grads);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = sse / static_cast<double>(order.size());
    log.train_loss_control = arm_counts[0] ? arm_sse_total[0] / static_cast<double>(arm_counts[0]) : 0.0;
    log.train_loss_treatment = arm_counts[1] ? arm_sse_total[1] / static_cast<double>(arm_counts[1]) : 0.0;
    const auto val = routed_loss(model, data, data.val_rows);
    log.val_loss = val.total;
    log.val_loss_control = val.control;
    log.val_loss_treatment = val.treatment;
    meta.curve.push_back(log);
    meta.epochs_run = epoch;

    if (data.val_rows.empty()) {
      meta.best_epoch = epoch;
      continue;
    }
    if (val.total < best_val) {
      best_val = val.total;
      best_params = snapshot(model);
      meta.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (!best_params.empty()) restore(model, best_params);
  if (!meta.curve.empty()) {
    const auto& best = meta.curve[meta.best_epoch - 1];
    meta.final_loss_control = best.train_loss_control;
    meta.final_loss_treatment = best.train_loss_treatment;
  }
  return model;
}

HeadOutputs predict_outcomes(const CateEstimator& model, const Tensor& images) {
  if (model.mode() != HeadMode::two_head) {
    throw Error(Errc::wrong_mode, "predict_outcomes requires a two_head model");
  }
  auto out = model.forward_heads(images);
  return {std::move(out[0]), std::move(out[1])};
}

std::vector<double> estimate_cate(const CateEstimator& model, const Tensor& images) {
  if (model.mode() != HeadMode::two_head) {
    throw Error(Errc::wrong_mode,
                "estimate_cate requires a two_head model; use baseline_candidate");
  }
  const auto out = predict_outcomes(model, images);
  std::vector<double> tau(out.control.size());
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = out.treatment[i] - out.control[i];
  return tau;
}

std::vector<double> baseline_candidate(const CateEstimator& model, const Tensor& images) {
  if (model.mode() != HeadMode::single_head) {
    throw Error(Errc::wrong_mode, "baseline_candidate requires a single_head model");
  }
  return std::move(model.forward_heads(images)[0]);
}

void save_checkpoint(const CateEstimator& model, const std::filesystem::path& path) {
  const auto blocks = model.parameter_blocks();
  nlohmann::json header;
  header["spec"] = model.spec();
  const auto& meta = model.meta();
  header["meta"] = {{"seed", meta.seed},
                    {"epochs_run", meta.epochs_run},
                    {"best_epoch", meta.best_epoch},
                    {"final_loss_control", meta.final_loss_control},
                    {"final_loss_treatment", meta.final_loss_treatment}};
  auto& curve = header["meta"]["curve"] = nlohmann::json::array();
  for (const auto& e : meta.curve) {
    curve.push_back({e.epoch, e.train_loss, e.val_loss, e.train_loss_control,
                     e.train_loss_treatment, e.val_loss_control, e.val_loss_treatment});
  }
  std::vector<std::size_t> sizes;
  for (auto b : blocks) sizes.push_back(b.size());
  header["blocks"] = sizes;
  const std::string text = header.dump();
  const std::uint64_t length = text.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto b : blocks) {
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

CateEstimator load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string magic(sizeof(kCheckpointMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kCheckpointMagic) throw Error(Errc::io, path.string() + ": not a checkpoint");
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || length > (1u << 26)) throw Error(Errc::io, path.string() + ": bad header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  const auto header = nlohmann::json::parse(text);

  CateEstimator model(header.at("spec").get<ModelSpec>(), 0);
  const auto& m = header.at("meta");
  auto& meta = model.meta_;
  meta.seed = m.at("seed").get<std::uint64_t>();
  meta.epochs_run = m.at("epochs_run").get<std::size_t>();
  meta.best_epoch = m.at("best_epoch").get<std::size_t>();
  meta.final_loss_control = m.at("final_loss_control").get<double>();
  meta.final_loss_treatment = m.at("final_loss_treatment").get<double>();
  auto number = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  for (const auto& e : m.value("curve", nlohmann::json::array())) {
    meta.curve.push_back({e.at(0).get<std::size_t>(), number(e.at(1)), number(e.at(2)),
                          number(e.at(3)), number(e.at(4)), number(e.at(5)), number(e.at(6))});
  }

  const auto sizes = header.at("blocks").get<std::vector<std::size_t>>();
  auto blocks = model.parameter_blocks();
  if (sizes.size() != blocks.size()) throw Error(Errc::io, "checkpoint block count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (sizes[i] != blocks[i].size()) throw Error(Errc::io, "checkpoint block size mismatch");
    in.read(reinterpret_cast<char*>(blocks[i].data()),
            static_cast<std::streamsize>(blocks[i].size() * sizeof(double)));
  }
  if (!in) throw Error(Errc::io, path.string() + ": truncated parameters");
  return model;
}

void write_training_curve(const TrainingMeta& meta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,train_loss_control,train_loss_treatment,val_loss_control,"
         "val_loss_treatment\n";
  for (const auto& e : meta.curve) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
        << ',' << format_double(e.train_loss_control) << ','
        << format_double(e.train_loss_treatment) << ',' << format_double(e.val_loss_control)
        << ',' << format_double(e.val_loss_treatment) << '\n';
  }
}

}  // namespace predbio
