#include <gtest/gtest.h>

#include <cmath>

#include "lamd/data.hpp"
#include "lamd/distortions.hpp"

using namespace lamd;

namespace {

Tensor ramp(std::size_t h, std::size_t w) {
  Tensor t({1, 1, h, w});
  for (std::size_t i = 0; i < h * w; ++i) t[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(h * w - 1);
  return t;
}

// Hand-rolled bilinear sample of a single h x w plane at (sx, sy), clamped.
double bilinear(const Tensor& img, std::size_t h, std::size_t w, double sx, double sy) {
  sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
  sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
  const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
  const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = sx - static_cast<double>(x0), ay = sy - static_cast<double>(y0);
  const double v00 = img[y0 * w + x0], v01 = img[y0 * w + x1], v10 = img[y1 * w + x0], v11 = img[y1 * w + x1];
  return (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
}

}  // namespace

TEST(Warp, ZeroSigmaIsIdentity) {
  const Tensor img = gen_synthetic(1, 16, 1).images;
  Rng rng(0, 0);
  EXPECT_EQ(warp(img, 0.0, 1.5, rng), img);
  EXPECT_EQ(additive_noise(img, 0.0, rng), img);
  EXPECT_EQ(patch_noise(img, 0, 1.0, rng), img);
}

TEST(Warp, UnitShiftMovesPixelsLeft) {
  const std::size_t h = 5, w = 6;
  const Tensor img = ramp(h, w);
  const Tensor out = warp_with_field(img, std::vector<double>(h * w, 1.0), std::vector<double>(h * w, 0.0));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) EXPECT_EQ(out[y * w + x], img[y * w + std::min(x + 1, w - 1)]);
}

TEST(Warp, MatchesHandRolledBilinearOracle) {
  const std::size_t h = 4, w = 4;
  Rng rng(3, 0);
  Tensor img({1, 1, h, w});
  for (double& v : img.data()) v = rng.uniform(-1, 1);
  std::vector<double> dx(h * w), dy(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    dx[i] = rng.uniform(-1.7, 1.7);
    dy[i] = rng.uniform(-1.7, 1.7);
  }
  const Tensor out = warp_with_field(img, dx, dy);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      EXPECT_NEAR(out[i], bilinear(img, h, w, static_cast<double>(x) + dx[i], static_cast<double>(y) + dy[i]), 1e-14);
    }
}

TEST(Warp, ConstantImageIsUnchanged) {
  const Tensor img({1, 1, 16, 16}, 0.37);
  Rng rng(4, 0);
  const Tensor out = warp(img, 4.0, 1.5, rng);
  for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Warp, SmoothingKernelIsNormalised) {
  for (double s : {0.5, 1.5, 3.0}) {
    double total = 0;
    for (double v : detail::gaussian_taps(s)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
  const std::vector<double> flat(64, 2.5);
  for (double v : detail::smooth_field(flat, 8, 8, 1.5)) EXPECT_NEAR(v, 2.5, 1e-14);
}

TEST(PatchNoise, ChangesExactlyOneSquare) {
  const Tensor img({1, 1, 16, 16}, 0.123);
  for (std::size_t p : {1u, 4u, 8u, 16u}) {
    Rng rng(p, 0);
    const Tensor out = patch_noise(img, p, 1.0, rng);
    std::size_t changed = 0, rmin = 16, rmax = 0, cmin = 16, cmax = 0;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        if (out[y * 16 + x] != 0.123) {
          ++changed;
          rmin = std::min(rmin, y), rmax = std::max(rmax, y), cmin = std::min(cmin, x), cmax = std::max(cmax, x);
        }
    EXPECT_EQ(changed, p * p) << "patch " << p;
    EXPECT_EQ(rmax - rmin + 1, p);
    EXPECT_EQ(cmax - cmin + 1, p);
  }
  Rng rng(0, 0);
  EXPECT_THROW(patch_noise(img, 17, 1.0, rng), ConfigError);
}

TEST(AdditiveNoise, VarianceMatchesSigma) {
  const Tensor img({1, 1, 32, 32}, 0.0);
  Rng rng(5, 0);
  const double sigma = 0.1;
  double s2 = 0;
  std::size_t n = 0;
  for (int rep = 0; rep < 10; ++rep) {
    for (double v : additive_noise(img, sigma, rng).data()) s2 += v * v;
    n += img.size();
  }
  EXPECT_NEAR(s2 / static_cast<double>(n), sigma * sigma, 0.1 * sigma * sigma);
}

TEST(Distortions, OutputsStayInRange) {
  const Tensor img = gen_synthetic(1, 32, 2).images;
  Rng rng(6, 0);
  for (DistortionKind k : {DistortionKind::warp, DistortionKind::patch_noise, DistortionKind::additive_noise})
    for (std::size_t g = 0; g < 5; ++g) {
      const Tensor out = apply_distortion(img, grid_distortion(k, g, 32), rng);
      EXPECT_EQ(out.shape(), img.shape());
      for (double v : out.data()) {
        ASSERT_GE(v, -1.0);
        ASSERT_LE(v, 1.0);
      }
    }
}

TEST(Distortions, SameStreamSameOutput) {
  const Tensor img = gen_synthetic(1, 16, 3).images;
  for (DistortionKind k : {DistortionKind::warp, DistortionKind::patch_noise, DistortionKind::additive_noise}) {
    Rng a(9, 21), b(9, 21);
    const DistortionSpec spec = grid_distortion(k, 3, 16);
    EXPECT_EQ(apply_distortion(img, spec, a), apply_distortion(img, spec, b));
  }
}

TEST(Distortions, GridAndNames) {
  EXPECT_EQ(grid_distortion(DistortionKind::patch_noise, 2, 32).patch_size, 16u);
  EXPECT_EQ(grid_distortion(DistortionKind::patch_noise, 4, 32).patch_size, 32u);
  EXPECT_EQ(grid_distortion(DistortionKind::warp, 0, 32).sigma_d, 0.0);
  EXPECT_EQ(small_distortion(DistortionKind::additive_noise, 32).sigma_d, 0.1);
  EXPECT_THROW(grid_distortion(DistortionKind::warp, 5, 32), ConfigError);
  for (DistortionKind k : {DistortionKind::warp, DistortionKind::patch_noise, DistortionKind::additive_noise})
    EXPECT_EQ(distortion_from_string(to_string(k)), k);
  EXPECT_THROW(distortion_from_string("blur"), ConfigError);
}

TEST(Distortions, SpecValidation) {
  DistortionSpec s;
  s.sigma_d = -1;
  EXPECT_THROW(s.validate(16), ConfigError);
  s = DistortionSpec{DistortionKind::patch_noise, 1.0, 1.5, 20};
  EXPECT_THROW(s.validate(16), ConfigError);
  EXPECT_THROW(warp_with_field(Tensor({1, 1, 4, 4}), {0.0}, {0.0}), ShapeError);
  Rng rng(0, 0);
  EXPECT_THROW(additive_noise(Tensor({16, 16}), 0.1, rng), ShapeError);
}
