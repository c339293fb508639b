#include <algorithm>
#include <cstddef>

#include "predbio/kernels.hpp"

namespace predbio::kernels {

namespace {

using Index = std::ptrdiff_t;

// Output rows/cols [lo, hi) whose input at offset `shift` stays in [0, extent).
struct Range {
  Index lo;
  Index hi;
};

inline Range valid_range(Index extent, Index shift) {
  return {std::max<Index>(0, -shift), std::min<Index>(extent, extent - shift)};
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index K = static_cast<Index>(g.kernel);
  const Index pad = K / 2;
  const Index plane = H * W;
  const Index cin = static_cast<Index>(g.in_channels);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index tasks = static_cast<Index>(g.batch) * cout;

#pragma omp parallel for schedule(static)
  for (Index task = 0; task < tasks; ++task) {
    const Index n = task / cout;
    const Index oc = task % cout;
    double* yp = y.data() + task * plane;
    std::fill(yp, yp + plane, bias[static_cast<std::size_t>(oc)]);
    for (Index ic = 0; ic < cin; ++ic) {
      const double* xp = x.data() + (n * cin + ic) * plane;
      const double* wp = weight.data() + (oc * cin + ic) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index sy = ky - pad;
        const Range rows = valid_range(H, sy);
        for (Index kx = 0; kx < K; ++kx) {
          const Index sx = kx - pad;
          const Range cols = valid_range(W, sx);
          const double w = wp[ky * K + kx];
          for (Index oy = rows.lo; oy < rows.hi; ++oy) {
            double* yrow = yp + oy * W;
            const double* xrow = xp + (oy + sy) * W + sx;
            for (Index ox = cols.lo; ox < cols.hi; ++ox) yrow[ox] += w * xrow[ox];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index K = static_cast<Index>(g.kernel);
  const Index pad = K / 2;
  const Index plane = H * W;
  const Index cin = static_cast<Index>(g.in_channels);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index tasks = static_cast<Index>(g.batch) * cin;

#pragma omp parallel for schedule(static)
  for (Index task = 0; task < tasks; ++task) {
    const Index n = task / cin;
    const Index ic = task % cin;
    double* dxp = dx.data() + task * plane;
    std::fill(dxp, dxp + plane, 0.0);
    for (Index oc = 0; oc < cout; ++oc) {
      const double* dyp = dy.data() + (n * cout + oc) * plane;
      const double* wp = weight.data() + (oc * cin + ic) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index sy = ky - pad;
        const Range rows = valid_range(H, sy);
        for (Index kx = 0; kx < K; ++kx) {
          const Index sx = kx - pad;
          const Range cols = valid_range(W, sx);
          const double w = wp[ky * K + kx];
          for (Index oy = rows.lo; oy < rows.hi; ++oy) {
            double* dxrow = dxp + (oy + sy) * W + sx;
            const double* dyrow = dyp + oy * W;
            for (Index ox = cols.lo; ox < cols.hi; ++ox) dxrow[ox] += w * dyrow[ox];
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dweight,
                            std::span<double> dbias) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index K = static_cast<Index>(g.kernel);
  const Index pad = K / 2;
  const Index plane = H * W;
  const Index cin = static_cast<Index>(g.in_channels);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index batch = static_cast<Index>(g.batch);

#pragma omp parallel for schedule(static)
  for (Index oc = 0; oc < cout; ++oc) {
    for (Index n = 0; n < batch; ++n) {
      const double* dyp = dy.data() + (n * cout + oc) * plane;
      double db = 0.0;
      for (Index p = 0; p < plane; ++p) db += dyp[p];
      dbias[static_cast<std::size_t>(oc)] += db;
      for (Index ic = 0; ic < cin; ++ic) {
        const double* xp = x.data() + (n * cin + ic) * plane;
        double* dwp = dweight.data() + (oc * cin + ic) * K * K;
        for (Index ky = 0; ky < K; ++ky) {
          const Index sy = ky - pad;
          const Range rows = valid_range(H, sy);
          for (Index kx = 0; kx < K; ++kx) {
            const Index sx = kx - pad;
            const Range cols = valid_range(W, sx);
            double acc = 0.0;
            for (Index oy = rows.lo; oy < rows.hi; ++oy) {
              const double* dyrow = dyp + oy * W;
              const double* xrow = xp + (oy + sy) * W + sx;
              for (Index ox = cols.lo; ox < cols.hi; ++ox) acc += dyrow[ox] * xrow[ox];
            }
            dwp[ky * K + kx] += acc;
          }
        }
      }
    }
  }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> y) {
  const Index batch = static_cast<Index>(g.batch);
  const std::size_t in = g.in;
  const std::size_t out = g.out;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < batch; ++n) {
    const double* xn = x.data() + static_cast<std::size_t>(n) * in;
    double* yn = y.data() + static_cast<std::size_t>(n) * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = weight.data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xn[i];
      yn[o] = bias[o] + acc;
    }
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> weight, std::span<double> dx) {
  const Index batch = static_cast<Index>(g.batch);
  const std::size_t in = g.in;
  const std::size_t out = g.out;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < batch; ++n) {
    double* dxn = dx.data() + static_cast<std::size_t>(n) * in;
    const double* dyn = dy.data() + static_cast<std::size_t>(n) * out;
    std::fill(dxn, dxn + in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dyn[o];
      const double* wo = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dxn[i] += d * wo[i];
    }
  }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dweight,
                           std::span<double> dbias) {
  const std::size_t batch = g.batch;
  const std::size_t in = g.in;
  const Index out = static_cast<Index>(g.out);
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < out; ++o) {
    double* dwo = dweight.data() + static_cast<std::size_t>(o) * in;
    for (std::size_t n = 0; n < batch; ++n) {
      const double d = dy[n * g.out + static_cast<std::size_t>(o)];
      dbias[static_cast<std::size_t>(o)] += d;
      const double* xn = x.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += d * xn[i];
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                     std::span<std::uint32_t> argmax) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = oh * ow;
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < planes; ++pl) {
    const double* xp = x.data() + static_cast<std::size_t>(pl) * in_plane;
    double* yp = y.data() + static_cast<std::size_t>(pl) * out_plane;
    std::uint32_t* ap = argmax.data() + static_cast<std::size_t>(pl) * out_plane;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = oy * g.size * g.width + ox * g.size;
        for (std::size_t wy = 0; wy < g.size; ++wy) {
          for (std::size_t wx = 0; wx < g.size; ++wx) {
            const std::size_t idx = (oy * g.size + wy) * g.width + ox * g.size + wx;
            if (xp[idx] > xp[best]) best = idx;
          }
        }
        yp[oy * ow + ox] = xp[best];
        ap[oy * ow + ox] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool_backward(const PoolGeometry& g, std::span<const double> dy,
                      std::span<const std::uint32_t> argmax, std::span<double> dx) {
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_height() * g.out_width();
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index pl = 0; pl < planes; ++pl) {
    double* dxp = dx.data() + static_cast<std::size_t>(pl) * in_plane;
    const double* dyp = dy.data() + static_cast<std::size_t>(pl) * out_plane;
    const std::uint32_t* ap = argmax.data() + static_cast<std::size_t>(pl) * out_plane;
    std::fill(dxp, dxp + in_plane, 0.0);
    for (std::size_t o = 0; o < out_plane; ++o) dxp[ap[o]] += dyp[o];
  }
}

}  // namespace predbio::kernels
