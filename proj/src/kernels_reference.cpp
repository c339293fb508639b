#include <algorithm>
#include <cstddef>

#include "predbio/kernels.hpp"

namespace predbio::kernels::reference {

namespace {

using Index = std::ptrdiff_t;

inline bool inside(Index v, std::size_t extent) {
  return v >= 0 && v < static_cast<Index>(extent);
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y) {
  const std::size_t K = g.kernel;
  const Index pad = static_cast<Index>(K / 2);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < g.height; ++oy)
        for (std::size_t ox = 0; ox < g.width; ++ox) {
          double acc = bias[oc];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const Index iy = static_cast<Index>(oy + ky) - pad;
                const Index ix = static_cast<Index>(ox + kx) - pad;
                if (!inside(iy, g.height) || !inside(ix, g.width)) continue;
                acc += weight[((oc * g.in_channels + ic) * K + ky) * K + kx] *
                       x[((n * g.in_channels + ic) * g.height + static_cast<std::size_t>(iy)) *
                             g.width +
                         static_cast<std::size_t>(ix)];
              }
          y[((n * g.out_channels + oc) * g.height + oy) * g.width + ox] = acc;
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx) {
  const std::size_t K = g.kernel;
  const Index pad = static_cast<Index>(K / 2);
  std::fill(dx.begin(), dx.end(), 0.0);
  // Scatter each output gradient back onto the inputs it read.
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < g.height; ++oy)
        for (std::size_t ox = 0; ox < g.width; ++ox) {
          const double d = dy[((n * g.out_channels + oc) * g.height + oy) * g.width + ox];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const Index iy = static_cast<Index>(oy + ky) - pad;
                const Index ix = static_cast<Index>(ox + kx) - pad;
                if (!inside(iy, g.height) || !inside(ix, g.width)) continue;
                dx[((n * g.in_channels + ic) * g.height + static_cast<std::size_t>(iy)) *
                       g.width +
                   static_cast<std::size_t>(ix)] +=
                    d * weight[((oc * g.in_channels + ic) * K + ky) * K + kx];
              }
        }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dweight,
                            std::span<double> dbias) {
  const std::size_t K = g.kernel;
  const Index pad = static_cast<Index>(K / 2);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < g.height; ++oy)
        for (std::size_t ox = 0; ox < g.width; ++ox) {
          const double d = dy[((n * g.out_channels + oc) * g.height + oy) * g.width + ox];
          dbias[oc] += d;
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const Index iy = static_cast<Index>(oy + ky) - pad;
                const Index ix = static_cast<Index>(ox + kx) - pad;
                if (!inside(iy, g.height) || !inside(ix, g.width)) continue;
                dweight[((oc * g.in_channels + ic) * K + ky) * K + kx] +=
                    d * x[((n * g.in_channels + ic) * g.height + static_cast<std::size_t>(iy)) *
                              g.width +
                          static_cast<std::size_t>(ix)];
              }
        }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> y) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < g.in; ++i) acc += weight[o * g.in + i] * x[n * g.in + i];
      y[n * g.out + o] = acc;
    }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> weight, std::span<double> dx) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t i = 0; i < g.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < g.out; ++o) acc += dy[n * g.out + o] * weight[o * g.in + i];
      dx[n * g.in + i] = acc;
    }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dweight,
                           std::span<double> dbias) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out; ++o) {
      dbias[o] += dy[n * g.out + o];
      for (std::size_t i = 0; i < g.in; ++i)
        dweight[o * g.in + i] += dy[n * g.out + o] * x[n * g.in + i];
    }
}

namespace {

std::size_t window_argmax(const PoolGeometry& g, std::span<const double> x, std::size_t plane,
                          std::size_t oy, std::size_t ox) {
  const std::size_t base = plane * g.height * g.width;
  std::size_t best = base + (oy * g.size) * g.width + ox * g.size;
  for (std::size_t wy = 0; wy < g.size; ++wy)
    for (std::size_t wx = 0; wx < g.size; ++wx) {
      const std::size_t idx = base + (oy * g.size + wy) * g.width + ox * g.size + wx;
      if (x[idx] > x[best]) best = idx;
    }
  return best;
}

}  // namespace

void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  for (std::size_t pl = 0; pl < g.batch * g.channels; ++pl)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        y[(pl * oh + oy) * ow + ox] = x[window_argmax(g, x, pl, oy, ox)];
}

void maxpool_backward(const PoolGeometry& g, std::span<const double> x,
                      std::span<const double> dy, std::span<double> dx) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t pl = 0; pl < g.batch * g.channels; ++pl)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        dx[window_argmax(g, x, pl, oy, ox)] += dy[(pl * oh + oy) * ow + ox];
}

}  // namespace predbio::kernels::reference
