#include "predbio/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "predbio/error.hpp"

namespace predbio {

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_volume(shape_)) {
    throw Error(Errc::shape_mismatch, "tensor data size " + std::to_string(data_.size()) +
                                          " does not match shape " + shape_string(shape_));
  }
}

std::size_t Tensor::sample_size() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : data_.size() / shape_[0];
}

std::span<double> Tensor::sample(std::size_t n) {
  const std::size_t stride = sample_size();
  return std::span<double>(data_).subspan(n * stride, stride);
}

std::span<const double> Tensor::sample(std::size_t n) const {
  const std::size_t stride = sample_size();
  return std::span<const double>(data_).subspan(n * stride, stride);
}

Shape Tensor::sample_shape() const {
  if (shape_.empty()) return {};
  return Shape(shape_.begin() + 1, shape_.end());
}

void Tensor::reshape(Shape shape) {
  if (shape_volume(shape) != data_.size()) {
    throw Error(Errc::shape_mismatch,
                "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::gather(std::span<const std::size_t> indices) const {
  Shape out_shape = shape_;
  out_shape.at(0) = indices.size();
  Tensor out(std::move(out_shape));
  const std::size_t stride = sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= shape_[0]) {
      throw Error(Errc::invalid_argument, "gather index out of range");
    }
    auto src = sample(indices[i]);
    std::copy(src.begin(), src.end(), out.data() + i * stride);
  }
  return out;
}

}  // namespace predbio
