#pragma once

// Synthetic cross-sensor pairs with known distortion, for checking that
// alignment actually undoes what a second sensor would do to a scene.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlsalign/align.hpp"
#include "hlsalign/error.hpp"
#include "hlsalign/metrics.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster.hpp"
#include "hlsalign/resample.hpp"

namespace hlsalign {

struct DistortionSpec {
  std::vector<double> gain;  ///< per band
  std::vector<double> bias;  ///< per band
  std::optional<std::vector<double>> mixing;  ///< c×c row-major, applied first
  std::optional<std::vector<double>> gamma;   ///< per band, sign-preserving power
  double noise_sigma = 0.0;
  double scale_factor = 3.0;
  std::uint64_t seed = 0;
  ResampleKernel kernel = ResampleKernel::lanczos3;

  static DistortionSpec identity(std::size_t bands) {
    DistortionSpec s;
    s.gain.assign(bands, 1.0);
    s.bias.assign(bands, 0.0);
    s.scale_factor = 1.0;
    return s;
  }

  void validate(std::size_t bands) const {
    std::vector<std::string> problems;
    if (gain.size() != bands) problems.push_back("gain needs " + std::to_string(bands) + " values");
    if (bias.size() != bands) problems.push_back("bias needs " + std::to_string(bands) + " values");
    for (std::size_t b = 0; b < gain.size(); ++b)
      if (gain[b] == 0.0 || !std::isfinite(gain[b])) problems.push_back("gain[" + std::to_string(b) + "] must be finite and nonzero");
    for (std::size_t b = 0; b < bias.size(); ++b)
      if (!std::isfinite(bias[b])) problems.push_back("bias[" + std::to_string(b) + "] must be finite");
    if (mixing && mixing->size() != bands * bands)
      problems.push_back("mixing must be a " + std::to_string(bands) + "x" + std::to_string(bands) + " matrix");
    if (gamma) {
      if (gamma->size() != bands) problems.push_back("gamma needs " + std::to_string(bands) + " values");
      for (double g : *gamma)
        if (!(g > 0.0) || !std::isfinite(g)) problems.push_back("gamma values must be positive");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) problems.push_back("noise_sigma must be >= 0");
    if (!(scale_factor >= 1.0) || !std::isfinite(scale_factor)) problems.push_back("scale_factor must be >= 1");
    if (!problems.empty()) throw ConfigError(problems);
  }
};

inline void to_json(nlohmann::json& j, const DistortionSpec& s) {
  j = nlohmann::json{{"gain", s.gain},
                     {"bias", s.bias},
                     {"noise_sigma", s.noise_sigma},
                     {"scale_factor", s.scale_factor},
                     {"seed", s.seed},
                     {"kernel", to_string(s.kernel)}};
  j["mixing"] = s.mixing ? nlohmann::json(*s.mixing) : nlohmann::json(nullptr);
  j["gamma"] = s.gamma ? nlohmann::json(*s.gamma) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, DistortionSpec& s) {
  j.at("gain").get_to(s.gain);
  j.at("bias").get_to(s.bias);
  s.noise_sigma = j.value("noise_sigma", 0.0);
  s.scale_factor = j.value("scale_factor", 3.0);
  s.seed = j.value("seed", std::uint64_t{0});
  s.kernel = parse_resample_kernel(j.value("kernel", std::string("lanczos3")));
  s.mixing.reset();
  s.gamma.reset();
  if (j.contains("mixing") && !j["mixing"].is_null()) s.mixing = j["mixing"].get<std::vector<double>>();
  if (j.contains("gamma") && !j["gamma"].is_null()) s.gamma = j["gamma"].get<std::vector<double>>();
}

namespace noise {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Standard normal deviate addressed by (seed, band, index): two SplitMix64
/// counter hashes feed the cosine branch of Box-Muller. Independent of
/// evaluation order, so any thread split gives the same field.
inline double standard_normal(std::uint64_t seed, std::uint64_t band, std::uint64_t index) {
  const std::uint64_t stream = splitmix64(seed ^ splitmix64(band));
  const std::uint64_t a = splitmix64(stream + 2 * index);
  const std::uint64_t b = splitmix64(stream + 2 * index + 1);
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace noise

struct SynthPair {
  MultiBandRaster lr;
  nlohmann::json manifest;
};

/// mix -> gain/bias -> gamma -> downscale -> noise.
inline SynthPair make_pair(const MultiBandRaster& hr, const DistortionSpec& spec) {
  const std::size_t nb = hr.band_count();
  spec.validate(nb);
  const std::size_t n = hr.pixel_count();
  const float nodata_out = hr.nodata() ? static_cast<float>(*hr.nodata()) : 0.0f;

  std::vector<std::vector<double>> src(nb);
  for (std::size_t b = 0; b < nb; ++b) src[b] = band_values(hr, b);
  std::vector<std::uint8_t> valid(n, 1);
  if (hr.nodata())
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t i = 0; i < n; ++i)
        if (hr.is_nodata(src[b][i])) valid[i] = 0;

  std::vector<std::vector<float>> out(nb, std::vector<float>(n));
  constexpr std::size_t kChunk = 1 << 14;
  parallel_for(chunk_count(n, kChunk), [&](std::size_t c) {
    std::vector<double> px(nb), mixed(nb);
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      if (!valid[i]) {
        for (std::size_t b = 0; b < nb; ++b) out[b][i] = nodata_out;
        continue;
      }
      for (std::size_t b = 0; b < nb; ++b) px[b] = src[b][i];
      if (spec.mixing) {
        for (std::size_t r = 0; r < nb; ++r) {
          double s = 0.0;
          for (std::size_t k = 0; k < nb; ++k) s += (*spec.mixing)[r * nb + k] * px[k];
          mixed[r] = s;
        }
        px.swap(mixed);
      }
      for (std::size_t b = 0; b < nb; ++b) {
        double v = spec.gain[b] * px[b] + spec.bias[b];
        if (spec.gamma) v = std::copysign(std::pow(std::abs(v), (*spec.gamma)[b]), v);
        out[b][i] = static_cast<float>(v);
      }
    }
  });
  MultiBandRaster distorted =
      make_float_raster(hr.width(), hr.height(), std::move(out), hr.band_names(), hr.nodata(), hr.geo_meta());

  if (spec.scale_factor > 1.0) distorted = resample(distorted, scaled_spec(distorted, 1.0 / spec.scale_factor, spec.kernel));

  if (spec.noise_sigma > 0.0) {
    const std::size_t m = distorted.pixel_count();
    std::vector<std::vector<float>> noisy(nb);
    parallel_for(nb, [&](std::size_t b) {
      const auto& v = distorted.band(b).float32();
      noisy[b].assign(v.begin(), v.end());
      for (std::size_t i = 0; i < m; ++i) {
        if (distorted.is_nodata(v[i])) continue;
        noisy[b][i] = static_cast<float>(v[i] + spec.noise_sigma * noise::standard_normal(spec.seed, b, i));
      }
    });
    distorted = make_float_raster(distorted.width(), distorted.height(), std::move(noisy), hr.band_names(),
                                  hr.nodata(), hr.geo_meta());
  }

  nlohmann::json manifest{{"distortion", spec},
                          {"noise_generator", "splitmix64-counter box-muller-cos"},
                          {"pipeline", {"mix", "gain_bias", "gamma", "downscale", "noise"}},
                          {"hr", {{"width", hr.width()}, {"height", hr.height()}, {"bands", hr.band_names()}}},
                          {"lr", {{"width", distorted.width()}, {"height", distorted.height()}}}};
  return {std::move(distorted), std::move(manifest)};
}

/// Smooth multi-band scene with correlated bands and values in roughly
/// [0.05, 0.55]: a few random low-frequency sinusoids shared across bands
/// plus a per-band component.
inline MultiBandRaster make_smooth_scene(std::size_t width, std::size_t height, std::size_t bands,
                                         std::uint64_t seed, double min_period = 12.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Wave {
    double fx, fy, phase, amp;
  };
  auto make_waves = [&](std::size_t count) {
    std::vector<Wave> w;
    for (std::size_t k = 0; k < count; ++k) {
      const double period = min_period + unit(rng) * 6.0 * min_period;
      const double angle = unit(rng) * std::numbers::pi;
      const double f = 2.0 * std::numbers::pi / period;
      w.push_back({f * std::cos(angle), f * std::sin(angle), unit(rng) * 2.0 * std::numbers::pi, 0.3 + unit(rng)});
    }
    return w;
  };
  const auto shared = make_waves(6);
  std::vector<std::vector<Wave>> own(bands);
  std::vector<double> weight(bands), offset(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    own[b] = make_waves(3);
    weight[b] = 0.4 + 0.5 * unit(rng);
    offset[b] = 0.2 + 0.15 * unit(rng);
  }
  auto field = [](const std::vector<Wave>& waves, double x, double y) {
    double s = 0.0, norm = 0.0;
    for (const auto& w : waves) {
      s += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      norm += w.amp;
    }
    return s / norm;
  };

  std::vector<std::vector<float>> out(bands, std::vector<float>(width * height));
  parallel_for(height, [&](std::size_t y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double common = field(shared, static_cast<double>(x), static_cast<double>(y));
      for (std::size_t b = 0; b < bands; ++b) {
        const double local = field(own[b], static_cast<double>(x), static_cast<double>(y));
        out[b][y * width + x] = static_cast<float>(offset[b] + 0.15 * (weight[b] * common + (1.0 - weight[b]) * local));
      }
    }
  });
  return make_float_raster(width, height, std::move(out));
}

/// Seeded affine+noise distortion: gains away from 1, biases away from 0.
inline DistortionSpec random_affine_distortion(std::size_t bands, std::uint64_t seed, double noise_sigma,
                                               double scale_factor = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DistortionSpec s;
  for (std::size_t b = 0; b < bands; ++b) {
    const double g = 0.15 + 0.35 * unit(rng);
    s.gain.push_back(unit(rng) < 0.5 ? 1.0 - g : 1.0 + g);
    const double o = 0.02 + 0.06 * unit(rng);
    s.bias.push_back(unit(rng) < 0.5 ? -o : o);
  }
  s.noise_sigma = noise_sigma;
  s.scale_factor = scale_factor;
  s.seed = seed;
  return s;
}

struct RecoveryReport {
  AlignMethod method = AlignMethod::hm;
  double data_range = 0.0;
  MetricReport pre;
  MetricReport post;
};

inline void to_json(nlohmann::json& j, const RecoveryReport& r) {
  j = nlohmann::json{{"method", to_string(r.method)}, {"data_range", r.data_range}, {"pre", r.pre}, {"post", r.post}};
}

/// Distorts hr, upscales the result back to hr size and compares it with hr
/// before and after alignment. data_range defaults to hr's valid max - min.
inline RecoveryReport verify_recovery(const MultiBandRaster& hr, const DistortionSpec& spec, AlignMethod method,
                                      std::optional<double> data_range = {}) {
  if (method == AlignMethod::none) throw ConfigError("verify_recovery needs method hm or fdm");
  double range = 0.0;
  if (data_range) {
    range = *data_range;
  } else {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t b = 0; b < hr.band_count(); ++b)
      for (double v : band_values(hr, b))
        if (!hr.is_nodata(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
    range = hi - lo;
  }
  if (!(range > 0.0)) throw DataError("data_range must be positive");

  const SynthPair pair = make_pair(hr, spec);
  MultiBandRaster up = pair.lr;
  if (up.width() != hr.width() || up.height() != hr.height())
    up = resample(up, {hr.width(), hr.height(), spec.kernel});

  RecoveryReport r;
  r.method = method;
  r.data_range = range;
  r.pre = evaluate_pair(up, hr, range);
  r.post = evaluate_pair(align(up, hr, method), hr, range);
  return r;
}

}  // namespace hlsalign
