#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "predbio/rng.hpp"
#include "predbio/tensor.hpp"

namespace predbio::nn {

enum class LayerType { conv, relu, tanh, maxpool, dense };

/// Declarative layer description. `units` is the output channel count for conv
/// and the output width for dense.
struct LayerSpec {
  LayerType type = LayerType::relu;
  std::size_t units = 0;
  std::size_t kernel = 3;
  std::size_t pool = 2;

  bool operator==(const LayerSpec&) const = default;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

/// `guided` restricts ReLU backward passes to positive gradients through
/// positively activated units (guided backpropagation). Other layers ignore it.
enum class BackwardMode { standard, guided };

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerType type() const = 0;
  virtual LayerSpec spec() const = 0;
  /// Per-sample output shape.
  virtual const Shape& output_shape() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual void forward(const Tensor& x, Tensor& y, std::vector<std::uint32_t>& aux) const = 0;
  /// dparams may be empty to skip parameter gradients; dx may be null.
  virtual void backward(const Tensor& x, const Tensor& y, const std::vector<std::uint32_t>& aux,
                        const Tensor& dy, Tensor* dx, std::span<double> dparams,
                        BackwardMode mode) const = 0;
  virtual void initialize(Rng&) {}

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

 protected:
  std::vector<double> params_;
};

/// Builds a layer for a per-sample input shape (C, H, W) or (F).
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape);

/// Activations recorded by a forward pass: activations[0] is the input,
/// activations[i + 1] the output of layer i.
struct Tape {
  std::vector<Tensor> activations;
  std::vector<std::vector<std::uint32_t>> aux;
};

/// Called with (activation index, gradient of the target w.r.t. that activation)
/// while walking backwards.
using GradObserver = std::function<void(std::size_t, const Tensor&)>;

class Sequential {
 public:
  Sequential() = default;
  Sequential(const std::vector<LayerSpec>& specs, Shape input_shape);
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  std::size_t size() const noexcept { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const;
  std::vector<LayerSpec> specs() const;

  void initialize(Rng& rng);

  const Tensor& forward(const Tensor& x, Tape& tape) const;
  Tensor forward(const Tensor& x) const;

  /// Backpropagates dy (gradient w.r.t. the last activation). Parameter
  /// gradients accumulate into `grads` (one vector per layer) when non-null;
  /// `dx` receives the input gradient when non-null.
  void backward(const Tape& tape, const Tensor& dy, std::vector<std::vector<double>>* grads,
                Tensor* dx, BackwardMode mode = BackwardMode::standard,
                const GradObserver& observe = {}) const;

  std::vector<std::vector<double>> zero_grads() const;

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace predbio::nn
