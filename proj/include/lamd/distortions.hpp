#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lamd/error.hpp"
#include "lamd/rng.hpp"
#include "lamd/tensor.hpp"

// Image distortions probing how specific a generator's manifold is. All
// operate on (c, h, w) or (1, c, h, w) images in [-1, 1] and are
// deterministic in the supplied Rng.

namespace lamd {

enum class DistortionKind { warp, patch_noise, additive_noise };

inline const char* to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::warp: return "warp";
    case DistortionKind::patch_noise: return "patch_noise";
    case DistortionKind::additive_noise: return "additive_noise";
  }
  return "?";
}

inline DistortionKind distortion_from_string(const std::string& s) {
  if (s == "warp") return DistortionKind::warp;
  if (s == "patch_noise") return DistortionKind::patch_noise;
  if (s == "additive_noise") return DistortionKind::additive_noise;
  throw ConfigError("unknown distortion '" + s + "'");
}

struct DistortionSpec {
  DistortionKind kind = DistortionKind::warp;
  double sigma_d = 0.0;            // warp: pixels; noise kinds: intensity
  double smoothing_radius = 1.5;   // warp: std-dev of the Gaussian smoothing kernel, pixels
  std::size_t patch_size = 0;      // patch_noise: side of the square patch

  void validate(std::size_t side) const {
    if (!(sigma_d >= 0.0)) throw ConfigError("sigma_d must be >= 0");
    if (kind == DistortionKind::warp && !(smoothing_radius >= 0.0)) {
      throw ConfigError("smoothing_radius must be >= 0");
    }
    if (kind == DistortionKind::patch_noise && patch_size > side) {
      throw ConfigError("patch_size exceeds image side");
    }
  }
};

namespace detail {

struct PlaneDims {
  std::size_t channels, height, width;
};

inline PlaneDims plane_dims(const Tensor& image) {
  const Shape& s = image.shape();
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 4 && s[0] == 1) return {s[1], s[2], s[3]};
  throw ShapeError("distortions expect a (c, h, w) or (1, c, h, w) image, got " + shape_str(s));
}

// Normalised 1-D Gaussian taps with standard deviation `sigma`, truncated at
// 3 sigma.
inline std::vector<double> gaussian_taps(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

// Separable Gaussian smoothing of an h x w field with edge clamping.
inline std::vector<double> smooth_field(const std::vector<double>& field, std::size_t h, std::size_t w, double sigma) {
  const std::vector<double> taps = gaussian_taps(sigma);
  const long r = static_cast<long>(taps.size() / 2);
  auto clampi = [](long v, long hi) { return std::clamp(v, 0L, hi); };
  std::vector<double> tmp(field.size(), 0.0), out(field.size(), 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -r; k <= r; ++k)
        acc += taps[static_cast<std::size_t>(k + r)] *
               field[y * w + static_cast<std::size_t>(clampi(static_cast<long>(x) + k, static_cast<long>(w) - 1))];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long k = -r; k <= r; ++k)
        acc += taps[static_cast<std::size_t>(k + r)] *
               tmp[static_cast<std::size_t>(clampi(static_cast<long>(y) + k, static_cast<long>(h) - 1)) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Resamples every channel at (x + dx, y + dy) by bilinear interpolation with
/// edge clamping. dx, dy are h x w row-major displacement fields in pixels.
inline Tensor warp_with_field(const Tensor& image, const std::vector<double>& dx, const std::vector<double>& dy) {
  const auto [c, h, w] = detail::plane_dims(image);
  if (dx.size() != h * w || dy.size() != h * w) throw ShapeError("warp field size mismatch");
  Tensor out(image.shape());
  const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = std::clamp(static_cast<double>(x) + dx[y * w + x], 0.0, max_x);
      const double sy = std::clamp(static_cast<double>(y) + dy[y * w + x], 0.0, max_y);
      const std::size_t x0 = static_cast<std::size_t>(std::floor(sx)), y0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = image.ptr() + ch * h * w;
        const double top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
        const double bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
        out[ch * h * w + y * w + x] = top * (1.0 - fy) + bottom * fy;
      }
    }
  return out;
}

/// Smooth random warp: per-pixel displacements ~ N(0, sigma_d^2), smoothed by
/// a normalised Gaussian of std-dev `smoothing_radius`, then bilinear
/// resampling. sigma_d = 0 returns the input unchanged.
inline Tensor warp(const Tensor& image, double sigma_d, double smoothing_radius, Rng& rng) {
  const auto [c, h, w] = detail::plane_dims(image);
  (void)c;
  if (sigma_d == 0.0) return image;
  std::vector<double> fx(h * w), fy(h * w);
  for (double& v : fx) v = rng.normal() * sigma_d;
  for (double& v : fy) v = rng.normal() * sigma_d;
  return warp_with_field(image, detail::smooth_field(fx, h, w, smoothing_radius),
                         detail::smooth_field(fy, h, w, smoothing_radius));
}

/// Replaces one square patch at a random position with N(0, sigma_d^2) noise
/// clipped to [-1, 1]. The patch covers all channels.
inline Tensor patch_noise(const Tensor& image, std::size_t patch_size, double sigma_d, Rng& rng) {
  const auto [c, h, w] = detail::plane_dims(image);
  if (patch_size > std::min(h, w)) throw ConfigError("patch_size exceeds image side");
  if (patch_size == 0) return image;
  const std::size_t top = rng.uniform_index(h - patch_size + 1);
  const std::size_t left = rng.uniform_index(w - patch_size + 1);
  Tensor out = image;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = top; y < top + patch_size; ++y)
      for (std::size_t x = left; x < left + patch_size; ++x)
        out[ch * h * w + y * w + x] = std::clamp(rng.normal() * sigma_d, -1.0, 1.0);
  return out;
}

/// clip(image + W, -1, 1) with W i.i.d. N(0, sigma_d^2).
inline Tensor additive_noise(const Tensor& image, double sigma_d, Rng& rng) {
  detail::plane_dims(image);
  if (sigma_d == 0.0) return image;
  Tensor out = image;
  for (double& v : out.data()) v = std::clamp(v + rng.normal() * sigma_d, -1.0, 1.0);
  return out;
}

inline Tensor apply_distortion(const Tensor& image, const DistortionSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case DistortionKind::warp: return warp(image, spec.sigma_d, spec.smoothing_radius, rng);
    case DistortionKind::patch_noise: return patch_noise(image, spec.patch_size, spec.sigma_d, rng);
    case DistortionKind::additive_noise: return additive_noise(image, spec.sigma_d, rng);
  }
  return image;
}

// Sweep grids. Patch sizes are fractions of the image side.
inline constexpr std::array<double, 5> kWarpSigmaGrid{0.0, 0.5, 1.0, 2.0, 4.0};
inline constexpr std::array<double, 5> kPatchFractionGrid{0.0, 0.25, 0.5, 0.75, 1.0};
inline constexpr std::array<double, 5> kAdditiveSigmaGrid{0.0, 0.05, 0.1, 0.2, 0.4};
inline constexpr double kPatchNoiseSigma = 1.0;

/// Distortion at grid point `index` of the sweep for `kind`.
inline DistortionSpec grid_distortion(DistortionKind kind, std::size_t index, std::size_t side,
                                      double smoothing_radius = 1.5) {
  if (index >= kWarpSigmaGrid.size()) throw ConfigError("distortion grid index out of range");
  DistortionSpec spec;
  spec.kind = kind;
  spec.smoothing_radius = smoothing_radius;
  switch (kind) {
    case DistortionKind::warp: spec.sigma_d = kWarpSigmaGrid[index]; break;
    case DistortionKind::patch_noise:
      spec.sigma_d = kPatchNoiseSigma;
      spec.patch_size = static_cast<std::size_t>(std::lround(kPatchFractionGrid[index] * static_cast<double>(side)));
      break;
    case DistortionKind::additive_noise: spec.sigma_d = kAdditiveSigmaGrid[index]; break;
  }
  return spec;
}

/// The "small distort" setting: the middle point of each grid.
inline DistortionSpec small_distortion(DistortionKind kind, std::size_t side) {
  return grid_distortion(kind, kWarpSigmaGrid.size() / 2, side);
}

}  // namespace lamd
