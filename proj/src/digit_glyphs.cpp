#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "predbio/datasets.hpp"
#include "predbio/error.hpp"
#include "predbio/rng.hpp"

namespace predbio {

namespace {

struct Point {
  double x;
  double y;
};
using Stroke = std::vector<Point>;
using Glyph = std::vector<Stroke>;

Stroke ellipse(double cx, double cy, double rx, double ry, int segments = 20) {
  Stroke s;
  for (int i = 0; i <= segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Unit-square templates, y pointing down. Classes 0, 6, 8, 9 contain a closed loop.
Glyph glyph_template(int digit) {
  switch (digit) {
    case 0: return {ellipse(0.5, 0.5, 0.28, 0.42)};
    case 1: return {{{0.36, 0.22}, {0.55, 0.08}, {0.55, 0.92}}};
    case 2:
      return {{{0.22, 0.30}, {0.30, 0.15}, {0.48, 0.08}, {0.68, 0.13}, {0.75, 0.28},
               {0.68, 0.45}, {0.22, 0.90}, {0.80, 0.90}}};
    case 3:
      return {{{0.22, 0.15}, {0.45, 0.07}, {0.68, 0.13}, {0.72, 0.28}, {0.45, 0.46},
               {0.72, 0.60}, {0.75, 0.78}, {0.58, 0.92}, {0.35, 0.93}, {0.20, 0.84}}};
    case 4:
      return {{{0.30, 0.08}, {0.20, 0.60}, {0.82, 0.60}}, {{0.64, 0.30}, {0.64, 0.95}}};
    case 5:
      return {{{0.76, 0.10}, {0.32, 0.10}, {0.28, 0.45}, {0.50, 0.40}, {0.70, 0.50},
               {0.75, 0.70}, {0.62, 0.88}, {0.40, 0.92}, {0.22, 0.84}}};
    case 6:
      return {{{0.70, 0.08}, {0.48, 0.22}, {0.32, 0.45}, {0.28, 0.66}},
              ellipse(0.5, 0.68, 0.22, 0.22)};
    case 7: return {{{0.20, 0.10}, {0.80, 0.10}, {0.45, 0.92}}};
    case 8: return {ellipse(0.5, 0.28, 0.19, 0.19), ellipse(0.5, 0.70, 0.24, 0.22)};
    case 9:
      return {ellipse(0.5, 0.32, 0.22, 0.22), {{0.72, 0.32}, {0.68, 0.60}, {0.58, 0.92}}};
    default: throw Error(Errc::unknown_digit, "no glyph for digit " + std::to_string(digit));
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (a.x + t * dx);
  const double ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

void draw_digit(int digit, std::size_t size, Rng& rng, std::span<double> out) {
  const double s = static_cast<double>(size);
  const double rot = rng.uniform(-0.2, 0.2);
  const double shear = rng.uniform(-0.25, 0.25);
  const double sx = rng.uniform(0.8, 1.1) * 0.72 * s;
  const double sy = rng.uniform(0.85, 1.1) * 0.72 * s;
  const double tx = s / 2 + rng.uniform(-1.5, 1.5);
  const double ty = s / 2 + rng.uniform(-1.5, 1.5);
  const double half_width = rng.uniform(1.0, 1.7);
  const double peak = rng.uniform(0.8, 1.0);
  const double c = std::cos(rot);
  const double sn = std::sin(rot);

  Glyph glyph = glyph_template(digit);
  for (auto& stroke : glyph) {
    const bool closed = stroke.size() > 2 && stroke.front().x == stroke.back().x &&
                        stroke.front().y == stroke.back().y;
    for (auto& p : stroke) {
      const double u = (p.x - 0.5 + rng.uniform(-0.025, 0.025)) * sx;
      const double v = (p.y - 0.5 + rng.uniform(-0.025, 0.025)) * sy;
      const double su = u + shear * v;
      p = {tx + c * su - sn * v, ty + sn * su + c * v};
    }
    if (closed) stroke.back() = stroke.front();
  }

  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const Point p{x + 0.5, y + 0.5};
      double d = 1e9;
      for (const auto& stroke : glyph) {
        for (std::size_t k = 1; k < stroke.size(); ++k) {
          d = std::min(d, segment_distance(p, stroke[k - 1], stroke[k]));
        }
      }
      out[y * size + x] = peak * std::clamp(half_width + 0.5 - d, 0.0, 1.0);
    }
  }
}

std::uint32_t read_be32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw Error(Errc::io, "truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace

DigitImages synthesize_digits(std::size_t n, std::size_t image_size, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::empty_dataset, "synthesize_digits: n must be >= 1");
  if (image_size < 8) throw Error(Errc::invalid_argument, "image_size must be >= 8");
  DigitImages out;
  out.images = Tensor({n, 1, image_size, image_size});
  out.labels.resize(n);
  Rng label_rng(mix_seed(seed, hash_string("digit-labels")));
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(label_rng.index(10));
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, std::to_string(i), "glyph");
    draw_digit(out.labels[i], image_size, rng, out.images.sample(i));
  }
  return out;
}

DigitImages load_idx_digits(const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path, std::size_t limit) {
  std::ifstream img(images_path, std::ios::binary);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!img) throw Error(Errc::io, "cannot open " + images_path.string());
  if (!lab) throw Error(Errc::io, "cannot open " + labels_path.string());
  if (read_be32(img) != 0x00000803) throw Error(Errc::io, "bad IDX image magic");
  if (read_be32(lab) != 0x00000801) throw Error(Errc::io, "bad IDX label magic");
  std::size_t n = read_be32(img);
  const std::size_t rows = read_be32(img);
  const std::size_t cols = read_be32(img);
  if (read_be32(lab) != n) throw Error(Errc::shape_mismatch, "IDX image/label count mismatch");
  if (rows != cols) throw Error(Errc::shape_mismatch, "IDX images must be square");
  if (limit > 0) n = std::min(n, limit);
  if (n == 0) throw Error(Errc::empty_dataset, "IDX file holds no images");

  DigitImages out;
  out.images = Tensor({n, 1, rows, cols});
  out.labels.resize(n);
  std::vector<unsigned char> buf(rows * cols);
  for (std::size_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    char label = 0;
    lab.read(&label, 1);
    if (!img || !lab) throw Error(Errc::io, "truncated IDX data");
    if (label < 0 || label > 9) throw Error(Errc::unknown_digit, "IDX label out of range");
    out.labels[i] = label;
    auto dst = out.images.sample(i);
    for (std::size_t p = 0; p < buf.size(); ++p) dst[p] = buf[p] / 255.0;
  }
  return out;
}

}  // namespace predbio
