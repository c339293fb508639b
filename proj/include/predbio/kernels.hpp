#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Compute kernels of the convolutional network. The top-level functions are the
// OpenMP versions used in training and attribution; `reference` holds plain
// serial formulations kept for testing and benchmarking.
//
// Every parallel kernel assigns each output element to exactly one thread and
// accumulates in a fixed order, so results are bit-identical for any thread
// count.

namespace predbio::kernels {

/// Stride-1 "same" convolution: odd kernel, zero padding kernel/2.
/// Layouts: x (N, Cin, H, W), weight (Cout, Cin, K, K), y (N, Cout, H, W).
struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 3;
};

/// x (N, in), weight (out, in), y (N, out).
struct DenseGeometry {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Non-overlapping window `size`; output (N, C, H/size, W/size), floored.
struct PoolGeometry {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t size = 2;

  std::size_t out_height() const { return height / size; }
  std::size_t out_width() const { return width / size; }
};

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y);
/// Overwrites dx.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx);
/// Accumulates into dweight and dbias.
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dweight,
                            std::span<double> dbias);

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> weight, std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dweight,
                           std::span<double> dbias);

/// argmax receives the flat in-plane index of each window maximum (first on ties).
void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                     std::span<std::uint32_t> argmax);
void maxpool_backward(const PoolGeometry& g, std::span<const double> dy,
                      std::span<const std::uint32_t> argmax, std::span<double> dx);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx);
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dweight,
                            std::span<double> dbias);

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> weight, std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dweight,
                           std::span<double> dbias);

void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y);
/// Recomputes window maxima from x and routes dy to them.
void maxpool_backward(const PoolGeometry& g, std::span<const double> x,
                      std::span<const double> dy, std::span<double> dx);

}  // namespace reference

}  // namespace predbio::kernels
