#include <gtest/gtest.h>

#include <cmath>

#include "hlsalign/synth.hpp"
#include "test_support.hpp"

using namespace hlsalign;
using testsupport::random_float_raster;

namespace {

std::vector<float> values(const MultiBandRaster& r, std::size_t b = 0) {
  const auto s = r.band(b).float32();
  return {s.begin(), s.end()};
}

}  // namespace

TEST(Synth, IdentitySpecReturnsInput) {
  const auto hr = random_float_raster(20, 16, 3, 1);
  const auto pair = make_pair(hr, DistortionSpec::identity(3));
  ASSERT_EQ(pair.lr.width(), 20u);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(values(pair.lr, b), values(hr, b));
}

TEST(Synth, GainBiasOnConstant) {
  const auto hr = make_float_raster(9, 9, {std::vector<float>(81, 0.2f)});
  auto spec = DistortionSpec::identity(1);
  spec.gain = {2.0};
  spec.bias = {0.1};
  for (float v : values(make_pair(hr, spec).lr)) EXPECT_FLOAT_EQ(v, 0.5f);
  spec.scale_factor = 3.0;
  const auto lr = make_pair(hr, spec).lr;
  EXPECT_EQ(lr.width(), 3u);
  for (float v : values(lr)) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Synth, MixingThenGamma) {
  const auto hr = make_float_raster(1, 1, {{0.25f}, {0.5f}});
  auto spec = DistortionSpec::identity(2);
  spec.mixing = std::vector<double>{0.0, 1.0, 1.0, 0.0};
  spec.gamma = std::vector<double>{2.0, 2.0};
  spec.bias = {0.0, -1.0};
  const auto lr = make_pair(hr, spec).lr;
  EXPECT_FLOAT_EQ(values(lr, 0)[0], 0.25f);
  // Gamma keeps the sign of negative values.
  EXPECT_FLOAT_EQ(values(lr, 1)[0], -0.5625f);
}

TEST(Synth, SameSeedIsBitIdentical) {
  const auto hr = make_smooth_scene(48, 48, 2, 3);
  auto spec = random_affine_distortion(2, 7, 0.01);
  const auto a = make_pair(hr, spec), b = make_pair(hr, spec);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(values(a.lr, k), values(b.lr, k));
  EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
  spec.seed = 8;
  EXPECT_NE(values(make_pair(hr, spec).lr), values(a.lr));
}

TEST(Synth, ThreadCountDoesNotChangeOutput) {
  const auto hr = make_smooth_scene(96, 72, 3, 5);
  const auto spec = random_affine_distortion(3, 2, 0.02);
  set_max_threads(1);
  const auto one = make_pair(hr, spec);
  set_max_threads(8);
  const auto eight = make_pair(hr, spec);
  set_max_threads(0);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(values(one.lr, b), values(eight.lr, b));
}

TEST(Synth, NoiseIsStandardNormal) {
  const std::size_t n = 200000;
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = noise::standard_normal(42, 1, i);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n, var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
  EXPECT_NE(noise::standard_normal(42, 0, 5), noise::standard_normal(42, 1, 5));
  EXPECT_EQ(noise::standard_normal(1, 2, 3), noise::standard_normal(1, 2, 3));
}

TEST(Synth, NoiseSigmaMatches) {
  const auto hr = make_float_raster(300, 300, {std::vector<float>(90000, 0.3f)});
  auto spec = DistortionSpec::identity(1);
  spec.noise_sigma = 0.05;
  double sum_sq = 0;
  for (float v : values(make_pair(hr, spec).lr)) sum_sq += (v - 0.3) * (v - 0.3);
  EXPECT_NEAR(std::sqrt(sum_sq / 90000), 0.05, 0.001);
}

TEST(Synth, SceneIsSmoothAndInRange) {
  const auto s = make_smooth_scene(64, 64, 4, 9);
  EXPECT_EQ(s.band_count(), 4u);
  for (std::size_t b = 0; b < 4; ++b)
    for (float v : values(s, b)) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 0.7f);
    }
  EXPECT_EQ(values(make_smooth_scene(64, 64, 4, 9), 2), values(s, 2));
}

TEST(Synth, RandomDistortionBounds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = random_affine_distortion(6, seed, 0.0);
    s.validate(6);
    for (std::size_t b = 0; b < 6; ++b) {
      const double g = std::abs(s.gain[b] - 1.0), o = std::abs(s.bias[b]);
      EXPECT_GE(g, 0.15);
      EXPECT_LE(g, 0.5);
      EXPECT_GE(o, 0.02);
      EXPECT_LE(o, 0.08);
    }
  }
}

TEST(Synth, SpecJsonRoundTrip) {
  auto s = random_affine_distortion(2, 4, 0.01);
  s.gamma = std::vector<double>{1.1, 0.9};
  const nlohmann::json j = s;
  const auto back = j.get<DistortionSpec>();
  EXPECT_EQ(back.gain, s.gain);
  EXPECT_EQ(back.bias, s.bias);
  EXPECT_EQ(back.gamma, s.gamma);
  EXPECT_FALSE(back.mixing);
  EXPECT_EQ(back.seed, 4u);
  EXPECT_EQ(back.noise_sigma, 0.01);
}

TEST(Synth, ValidateListsEveryProblem) {
  DistortionSpec s;
  s.gain = {1.0, 0.0};
  s.bias = {0.0};
  s.gamma = std::vector<double>{-1.0, 1.0};
  s.noise_sigma = -1.0;
  s.scale_factor = 0.5;
  try {
    s.validate(2);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems().size(), 5u) << e.what();
  }
  EXPECT_THROW(make_pair(random_float_raster(4, 4, 2, 1), s), ConfigError);
}

TEST(Recovery, FdmUndoesAffineDistortionExactly) {
  const auto hr = make_smooth_scene(60, 60, 4, 2);
  auto spec = random_affine_distortion(4, 3, 0.0, 1.0);
  const auto r = verify_recovery(hr, spec, AlignMethod::fdm);
  EXPECT_LT(r.post.aggregate.mse, 1e-12);
  EXPECT_GT(r.pre.aggregate.mse, 1e-4);
}

TEST(Recovery, AlignmentImprovesDownscaledPair) {
  const auto hr = make_smooth_scene(96, 96, 3, 4);
  const auto spec = random_affine_distortion(3, 5, 0.005);
  for (auto m : {AlignMethod::hm, AlignMethod::fdm}) {
    const auto r = verify_recovery(hr, spec, m);
    EXPECT_GT(r.post.aggregate.psnr, r.pre.aggregate.psnr);
    EXPECT_GT(r.post.aggregate.ssim, r.pre.aggregate.ssim);
  }
}

TEST(Recovery, Errors) {
  const auto hr = make_smooth_scene(32, 32, 2, 1);
  EXPECT_THROW(verify_recovery(hr, DistortionSpec::identity(2), AlignMethod::none), ConfigError);
  EXPECT_THROW(verify_recovery(hr, DistortionSpec::identity(2), AlignMethod::hm, 0.0), DataError);
}
