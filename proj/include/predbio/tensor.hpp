#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace predbio {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. The leading dimension is the batch
/// dimension wherever a tensor holds more than one sample.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Number of elements per entry of the leading dimension.
  std::size_t sample_size() const;
  std::span<double> sample(std::size_t n);
  std::span<const double> sample(std::size_t n) const;

  /// Shape without the leading dimension.
  Shape sample_shape() const;

  void reshape(Shape shape);
  void fill(double value);

  /// Gathers the given leading-dimension entries into a new tensor.
  Tensor gather(std::span<const std::size_t> indices) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace predbio
