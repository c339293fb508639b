#include "predbio/network.hpp"

#include <algorithm>
#include <cmath>

#include "predbio/error.hpp"
#include "predbio/kernels.hpp"

namespace predbio::nn {

namespace {

const char* type_name(LayerType t) {
  switch (t) {
    case LayerType::conv: return "conv";
    case LayerType::relu: return "relu";
    case LayerType::tanh: return "tanh";
    case LayerType::maxpool: return "maxpool";
    case LayerType::dense: return "dense";
  }
  return "?";
}

LayerType parse_type(const std::string& s) {
  for (auto t : {LayerType::conv, LayerType::relu, LayerType::tanh, LayerType::maxpool,
                 LayerType::dense}) {
    if (s == type_name(t)) return t;
  }
  throw Error(Errc::config, "unknown layer type '" + s + "'");
}

Shape with_batch(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

void ensure_shape(Tensor& t, const Shape& shape) {
  if (t.shape() != shape) t = Tensor(shape);
}

void he_uniform(std::span<double> w, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w) v = rng.uniform(-limit, limit);
}

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t out_channels, std::size_t kernel, const Shape& in)
      : in_(in), out_{out_channels, in.at(1), in.at(2)}, kernel_(kernel) {
    params_.assign(out_channels * in[0] * kernel * kernel + out_channels, 0.0);
  }
  LayerType type() const override { return LayerType::conv; }
  LayerSpec spec() const override { return {LayerType::conv, out_[0], kernel_, 2}; }
  const Shape& output_shape() const override { return out_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  void initialize(Rng& rng) override {
    auto [w, b] = split(params_);
    he_uniform(w, in_[0] * kernel_ * kernel_, rng);
    std::fill(b.begin(), b.end(), 0.0);
  }

  void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>&) const override {
    const auto g = geometry(x.dim(0));
    ensure_shape(y, with_batch(g.batch, out_));
    auto [w, b] = split(params_);
    kernels::conv2d_forward(g, x.values(), w, b, y.values());
  }

  void backward(const Tensor& x, const Tensor&, const std::vector<std::uint32_t>&,
                const Tensor& dy, Tensor* dx, std::span<double> dparams,
                BackwardMode) const override {
    const auto g = geometry(x.dim(0));
    auto [w, b] = split(params_);
    if (!dparams.empty()) {
      auto [dw, db] = split(dparams);
      kernels::conv2d_backward_params(g, x.values(), dy.values(), dw, db);
    }
    if (dx) {
      ensure_shape(*dx, x.shape());
      kernels::conv2d_backward_input(g, dy.values(), w, dx->values());
    }
  }

 private:
  template <typename T>
  std::pair<std::span<T>, std::span<T>> split(std::span<T> all) const {
    const std::size_t nw = out_[0] * in_[0] * kernel_ * kernel_;
    return {all.first(nw), all.subspan(nw)};
  }
  std::pair<std::span<const double>, std::span<const double>> split(
      const std::vector<double>& all) const {
    return split(std::span<const double>(all));
  }
  std::pair<std::span<double>, std::span<double>> split(std::vector<double>& all) const {
    return split(std::span<double>(all));
  }
  kernels::ConvGeometry geometry(std::size_t batch) const {
    return {batch, in_[0], out_[0], in_[1], in_[2], kernel_};
  }

  Shape in_;
  Shape out_;
  std::size_t kernel_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t units, const Shape& in)
      : in_features_(shape_volume(in)), out_{units} {
    params_.assign(units * in_features_ + units, 0.0);
  }
  LayerType type() const override { return LayerType::dense; }
  LayerSpec spec() const override { return {LayerType::dense, out_[0], 3, 2}; }
  const Shape& output_shape() const override { return out_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  void initialize(Rng& rng) override {
    const std::size_t nw = out_[0] * in_features_;
    he_uniform(std::span<double>(params_).first(nw), in_features_, rng);
    std::fill(params_.begin() + static_cast<std::ptrdiff_t>(nw), params_.end(), 0.0);
  }

  void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>&) const override {
    const kernels::DenseGeometry g{x.dim(0), in_features_, out_[0]};
    ensure_shape(y, {g.batch, g.out});
    const std::span<const double> p(params_);
    kernels::dense_forward(g, x.values(), p.first(g.in * g.out), p.subspan(g.in * g.out),
                           y.values());
  }

  void backward(const Tensor& x, const Tensor&, const std::vector<std::uint32_t>&,
                const Tensor& dy, Tensor* dx, std::span<double> dparams,
                BackwardMode) const override {
    const kernels::DenseGeometry g{x.dim(0), in_features_, out_[0]};
    const std::size_t nw = g.in * g.out;
    if (!dparams.empty()) {
      kernels::dense_backward_params(g, x.values(), dy.values(), dparams.first(nw),
                                     dparams.subspan(nw));
    }
    if (dx) {
      ensure_shape(*dx, x.shape());
      kernels::dense_backward_input(g, dy.values(), std::span<const double>(params_).first(nw),
                                    dx->values());
    }
  }

 private:
  std::size_t in_features_;
  Shape out_;
};

class Relu final : public Layer {
 public:
  explicit Relu(const Shape& in) : shape_(in) {}
  LayerType type() const override { return LayerType::relu; }
  LayerSpec spec() const override { return {LayerType::relu, 0, 3, 2}; }
  const Shape& output_shape() const override { return shape_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

  void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>&) const override {
    ensure_shape(y, x.shape());
    const double* xp = x.data();
    double* yp = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) yp[i] = xp[i] > 0.0 ? xp[i] : 0.0;
  }

  void backward(const Tensor& x, const Tensor&, const std::vector<std::uint32_t>&,
                const Tensor& dy, Tensor* dx, std::span<double>,
                BackwardMode mode) const override {
    if (!dx) return;
    ensure_shape(*dx, x.shape());
    const double* xp = x.data();
    const double* gp = dy.data();
    double* out = dx->data();
    if (mode == BackwardMode::guided) {
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (xp[i] > 0.0 && gp[i] > 0.0) ? gp[i] : 0.0;
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = xp[i] > 0.0 ? gp[i] : 0.0;
    }
  }

 private:
  Shape shape_;
};

class Tanh final : public Layer {
 public:
  explicit Tanh(const Shape& in) : shape_(in) {}
  LayerType type() const override { return LayerType::tanh; }
  LayerSpec spec() const override { return {LayerType::tanh, 0, 3, 2}; }
  const Shape& output_shape() const override { return shape_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(*this); }

  void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>&) const override {
    ensure_shape(y, x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  }

  void backward(const Tensor& x, const Tensor& y, const std::vector<std::uint32_t>&,
                const Tensor& dy, Tensor* dx, std::span<double>, BackwardMode) const override {
    if (!dx) return;
    ensure_shape(*dx, x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) (*dx)[i] = dy[i] * (1.0 - y[i] * y[i]);
  }

 private:
  Shape shape_;
};

class MaxPool final : public Layer {
 public:
  MaxPool(std::size_t size, const Shape& in)
      : in_(in), out_{in.at(0), in.at(1) / size, in.at(2) / size}, size_(size) {
    if (out_[1] == 0 || out_[2] == 0) {
      throw Error(Errc::config, "maxpool window larger than its input " + shape_string(in));
    }
  }
  LayerType type() const override { return LayerType::maxpool; }
  LayerSpec spec() const override { return {LayerType::maxpool, 0, 3, size_}; }
  const Shape& output_shape() const override { return out_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }

  void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>& aux) const override {
    const auto g = geometry(x.dim(0));
    ensure_shape(y, with_batch(g.batch, out_));
    aux.resize(y.size());
    kernels::maxpool_forward(g, x.values(), y.values(), aux);
  }

  void backward(const Tensor& x, const Tensor&, const std::vector<std::uint32_t>& aux,
                const Tensor& dy, Tensor* dx, std::span<double>, BackwardMode) const override {
    if (!dx) return;
    ensure_shape(*dx, x.shape());
    kernels::maxpool_backward(geometry(x.dim(0)), dy.values(), aux, dx->values());
  }

 private:
  kernels::PoolGeometry geometry(std::size_t batch) const {
    return {batch, in_[0], in_[1], in_[2], size_};
  }

  Shape in_;
  Shape out_;
  std::size_t size_;
};

}  // namespace

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"type", type_name(s.type)}};
  switch (s.type) {
    case LayerType::conv:
      j["out_channels"] = s.units;
      j["kernel"] = s.kernel;
      break;
    case LayerType::dense: j["units"] = s.units; break;
    case LayerType::maxpool: j["size"] = s.pool; break;
    default: break;
  }
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.type = parse_type(j.at("type").get<std::string>());
  if (s.type == LayerType::conv) {
    s.units = j.at("out_channels").get<std::size_t>();
    s.kernel = j.value("kernel", std::size_t{3});
  } else if (s.type == LayerType::dense) {
    s.units = j.at("units").get<std::size_t>();
  } else if (s.type == LayerType::maxpool) {
    s.pool = j.value("size", std::size_t{2});
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape) {
  switch (spec.type) {
    case LayerType::conv:
      if (input_shape.size() != 3) {
        throw Error(Errc::config, "conv layer needs (C, H, W) input, got " +
                                      shape_string(input_shape));
      }
      if (spec.units == 0 || spec.kernel % 2 == 0) {
        throw Error(Errc::config, "conv layer needs out_channels > 0 and an odd kernel");
      }
      return std::make_unique<Conv2d>(spec.units, spec.kernel, input_shape);
    case LayerType::maxpool:
      if (input_shape.size() != 3 || spec.pool == 0) {
        throw Error(Errc::config, "maxpool needs (C, H, W) input and size > 0");
      }
      return std::make_unique<MaxPool>(spec.pool, input_shape);
    case LayerType::dense:
      if (spec.units == 0) throw Error(Errc::config, "dense layer needs units > 0");
      return std::make_unique<Dense>(spec.units, input_shape);
    case LayerType::relu: return std::make_unique<Relu>(input_shape);
    case LayerType::tanh: return std::make_unique<Tanh>(input_shape);
  }
  throw Error(Errc::config, "unknown layer");
}

Sequential::Sequential(const std::vector<LayerSpec>& specs, Shape input_shape)
    : input_shape_(std::move(input_shape)) {
  Shape shape = input_shape_;
  for (const auto& s : specs) {
    layers_.push_back(make_layer(s, shape));
    shape = layers_.back()->output_shape();
  }
}

Sequential::Sequential(const Sequential& other) : input_shape_(other.input_shape_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

const Shape& Sequential::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back()->output_shape();
}

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

void Sequential::initialize(Rng& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

const Tensor& Sequential::forward(const Tensor& x, Tape& tape) const {
  if (x.sample_shape() != input_shape_ &&
      shape_volume(x.sample_shape()) != shape_volume(input_shape_)) {
    throw Error(Errc::shape_mismatch, "network input " + shape_string(x.shape()) +
                                          " does not match " + shape_string(input_shape_));
  }
  tape.activations.resize(layers_.size() + 1);
  tape.aux.resize(layers_.size());
  tape.activations[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(tape.activations[i], tape.activations[i + 1], tape.aux[i]);
  }
  return tape.activations.back();
}

Tensor Sequential::forward(const Tensor& x) const {
  Tape tape;
  forward(x, tape);
  return std::move(tape.activations.back());
}

void Sequential::backward(const Tape& tape, const Tensor& dy,
                          std::vector<std::vector<double>>* grads, Tensor* dx,
                          BackwardMode mode, const GradObserver& observe) const {
  if (tape.activations.size() != layers_.size() + 1) {
    throw Error(Errc::invalid_argument, "tape does not belong to this network");
  }
  if (observe) observe(layers_.size(), dy);
  if (layers_.empty()) {
    if (dx) *dx = dy;
    return;
  }
  Tensor upstream = dy;
  Tensor downstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need_dx = i > 0 || dx != nullptr;
    std::span<double> dparams;
    if (grads) dparams = (*grads)[i];
    layers_[i]->backward(tape.activations[i], tape.activations[i + 1], tape.aux[i], upstream,
                         need_dx ? &downstream : nullptr, dparams, mode);
    if (!need_dx) break;
    if (observe) observe(i, downstream);
    std::swap(upstream, downstream);
  }
  if (dx) {
    upstream.reshape(tape.activations[0].shape());
    *dx = std::move(upstream);
  }
}

std::vector<std::vector<double>> Sequential::zero_grads() const {
  std::vector<std::vector<double>> g;
  for (const auto& l : layers_) g.emplace_back(l->params().size(), 0.0);
  return g;
}

}  // namespace predbio::nn
