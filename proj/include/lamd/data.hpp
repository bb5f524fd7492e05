#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lamd/error.hpp"
#include "lamd/models.hpp"
#include "lamd/rng.hpp"
#include "lamd/tensor.hpp"

namespace lamd {

/// Images (n, c, h, w) with values in [-1, 1].
struct ImageDataset {
  Tensor images{Shape{0, 1, 1, 1}};
  std::string source;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> labels;  // empty unless loaded with labels

  std::size_t size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  ImageShape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  Tensor image(std::size_t i) const { return batch_item(images, i); }
};

namespace detail {

// Parameters of one synthetic image, all in unit coordinates.
struct EllipseParams {
  double cx, cy, ax, ay, theta;
  double fg, bg, grad_x, grad_y;
  double eye_dx, eye_dy, eye_r, eye_level;
};

inline EllipseParams draw_ellipse_params(Rng& rng) {
  EllipseParams p{};
  p.cx = 0.5 + rng.uniform(-0.06, 0.06);
  p.cy = 0.5 + rng.uniform(-0.06, 0.06);
  p.ax = rng.uniform(0.22, 0.36);
  p.ay = rng.uniform(0.26, 0.40);
  p.theta = rng.uniform(-0.4, 0.4);
  p.fg = rng.uniform(0.1, 0.9);
  p.bg = rng.uniform(-0.95, -0.3);
  p.grad_x = rng.uniform(-0.25, 0.25);
  p.grad_y = rng.uniform(-0.25, 0.25);
  p.eye_dx = rng.uniform(0.25, 0.45);
  p.eye_dy = rng.uniform(-0.35, -0.1);
  p.eye_r = rng.uniform(0.04, 0.08);
  p.eye_level = rng.uniform(-0.8, -0.2);
  return p;
}

// Fraction of a pixel covered by a shape whose signed distance (in pixels,
// negative inside) is `dist`.
inline double coverage(double dist) { return std::clamp(0.5 - dist, 0.0, 1.0); }

inline void render_ellipse(const EllipseParams& p, std::size_t side, double* out) {
  const double s = static_cast<double>(side);
  const double ct = std::cos(p.theta), st = std::sin(p.theta);
  const double min_axis = std::min(p.ax, p.ay);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / s;
      const double v = (static_cast<double>(y) + 0.5) / s;
      const double bg = p.bg + p.grad_x * (u - 0.5) + p.grad_y * (v - 0.5);
      // Rotate into the ellipse frame.
      const double du = u - p.cx, dv = v - p.cy;
      const double eu = ct * du + st * dv, ev = -st * du + ct * dv;
      const double r = std::sqrt((eu / p.ax) * (eu / p.ax) + (ev / p.ay) * (ev / p.ay));
      const double body = coverage((r - 1.0) * min_axis * s);
      double value = bg * (1.0 - body) + p.fg * body;
      for (double side_sign : {-1.0, 1.0}) {
        const double ex = side_sign * p.eye_dx * p.ax, ey = p.eye_dy * p.ay;
        const double d = std::hypot(eu - ex, ev - ey);
        const double eye = coverage((d - p.eye_r) * s) * body;
        value = value * (1.0 - eye) + p.eye_level * eye;
      }
      out[y * side + x] = std::clamp(value, -1.0, 1.0);
    }
  }
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

/// Deterministic "registered" toy images: a roughly centred antialiased
/// ellipse with two darker blobs on a gradient background, one channel.
/// Image i depends only on (seed, i), so datasets of different sizes share
/// their common prefix.
inline ImageDataset gen_synthetic(std::size_t n, std::size_t side, std::uint64_t seed) {
  if (side != 16 && side != 32) throw DataError("synthetic side must be 16 or 32");
  if (n == 0) throw DataError("synthetic dataset must contain at least one image");
  ImageDataset ds;
  ds.images = Tensor({n, 1, side, side});
  ds.source = "synthetic";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    detail::render_ellipse(detail::draw_ellipse_params(rng), side, ds.images.ptr() + i * side * side);
  }
  return ds;
}

/// Loads an IDX image file (magic 0x00000803) and optionally the matching
/// label file (0x00000801). Bytes map affinely from [0, 255] to [-1, 1].
inline ImageDataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path = {},
                             bool pad_to_32 = false) {
  const auto bytes = detail::read_file(images_path);
  if (bytes.size() < 16) throw DataError("IDX image file truncated: " + images_path);
  if (detail::read_be32(bytes, 0) != 0x00000803) throw DataError("bad IDX image magic in " + images_path);
  const std::uint64_t n = detail::read_be32(bytes, 4);
  const std::uint64_t rows = detail::read_be32(bytes, 8);
  const std::uint64_t cols = detail::read_be32(bytes, 12);
  if (n == 0 || rows == 0 || cols == 0) throw DataError("IDX file declares an empty dimension");
  // rows * cols always fits in 64 bits; only the final product can overflow.
  if (rows * cols > std::numeric_limits<std::uint64_t>::max() / n) throw DataError("IDX dimensions overflow");
  const std::uint64_t pixels = n * rows * cols;
  if (bytes.size() - 16 != pixels) {
    throw DataError("IDX image file size " + std::to_string(bytes.size()) + " disagrees with declared " +
                    std::to_string(pixels) + " pixels");
  }
  const std::size_t pad = pad_to_32 ? 2 : 0;
  if (pad_to_32 && (rows != 28 || cols != 28)) throw DataError("padding to 32 requires 28x28 images");
  const std::size_t h = rows + 2 * pad, w = cols + 2 * pad;
  ImageDataset ds;
  ds.images = Tensor({static_cast<std::size_t>(n), 1, h, w}, -1.0);
  ds.source = images_path;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < rows; ++y)
      for (std::size_t x = 0; x < cols; ++x) {
        const unsigned char b = bytes[16 + (i * rows + y) * cols + x];
        ds.images[(i * h + y + pad) * w + x + pad] = static_cast<double>(b) / 127.5 - 1.0;
      }
  if (labels_path) {
    const auto lb = detail::read_file(*labels_path);
    if (lb.size() < 8) throw DataError("IDX label file truncated: " + *labels_path);
    if (detail::read_be32(lb, 0) != 0x00000801) throw DataError("bad IDX label magic in " + *labels_path);
    const std::uint64_t ln = detail::read_be32(lb, 4);
    if (ln != n) throw DataError("IDX label count differs from image count");
    if (lb.size() - 8 != ln) throw DataError("IDX label file size disagrees with declared count");
    ds.labels.assign(lb.begin() + 8, lb.end());
  }
  return ds;
}

struct SplitSpec {
  std::size_t n_train = 0;
};

/// First n_train images to train, the rest to validation, order preserved.
inline std::pair<ImageDataset, ImageDataset> split(const ImageDataset& ds, const SplitSpec& spec) {
  const std::size_t n = ds.size();
  if (spec.n_train == 0 || spec.n_train >= n) {
    throw DataError("split: n_train must satisfy 0 < n_train < " + std::to_string(n));
  }
  auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> rows(end - begin);
    for (std::size_t i = begin; i < end; ++i) rows[i - begin] = i;
    ImageDataset part;
    part.images = gather_rows(ds.images, rows);
    part.source = ds.source;
    part.seed = ds.seed;
    if (!ds.labels.empty()) part.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                               ds.labels.begin() + static_cast<std::ptrdiff_t>(end));
    return part;
  };
  return {take(0, spec.n_train), take(spec.n_train, n)};
}

/// First `count` images of a dataset as a list of (1, c, h, w) tensors.
inline std::vector<Tensor> take_images(const ImageDataset& ds, std::size_t count) {
  std::vector<Tensor> out;
  const std::size_t n = std::min(count, ds.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ds.image(i));
  return out;
}

}  // namespace lamd
