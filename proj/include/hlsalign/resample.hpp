#pragma once

// Separable resampling with Lanczos-3 or Catmull-Rom kernels.
//
// Output pixel i samples source coordinate (i + 0.5) * src / dst - 0.5
// (pixel centers aligned). When shrinking, the kernel is stretched by the
// scale factor so it low-pass filters before decimation. Weights are
// renormalized per output sample over the taps that hit valid pixels, which
// gives unit DC gain everywhere including borders and nodata holes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hlsalign/error.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster.hpp"

namespace hlsalign {

enum class ResampleKernel { lanczos3, bicubic };
enum class EdgePolicy { clamp };

inline ResampleKernel parse_resample_kernel(std::string_view s) {
  if (s == "lanczos3" || s == "lanczos") return ResampleKernel::lanczos3;
  if (s == "bicubic" || s == "catmull-rom") return ResampleKernel::bicubic;
  throw ConfigError("unknown resample kernel '" + std::string(s) + "' (expected lanczos3 or bicubic)");
}

inline std::string_view to_string(ResampleKernel k) { return k == ResampleKernel::lanczos3 ? "lanczos3" : "bicubic"; }

struct ResampleSpec {
  std::size_t target_width = 0;
  std::size_t target_height = 0;
  ResampleKernel kernel = ResampleKernel::lanczos3;
  EdgePolicy edge_policy = EdgePolicy::clamp;
};

namespace kernels {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double lanczos3(double x) {
  x = std::abs(x);
  return x < 3.0 ? sinc(x) * sinc(x / 3.0) : 0.0;
}

/// Keys cubic with a = -0.5.
inline double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

inline double radius(ResampleKernel k) { return k == ResampleKernel::lanczos3 ? 3.0 : 2.0; }

inline double evaluate(ResampleKernel k, double x) {
  return k == ResampleKernel::lanczos3 ? lanczos3(x) : catmull_rom(x);
}

}  // namespace kernels

/// Source taps and weights for every output position along one axis.
struct AxisTaps {
  std::vector<std::size_t> begin;  ///< size dst + 1, offsets into index/weight
  std::vector<std::size_t> index;
  std::vector<double> weight;  ///< normalized to sum 1 per output position

  static AxisTaps build(std::size_t src, std::size_t dst, ResampleKernel kernel) {
    AxisTaps t;
    const double ratio = static_cast<double>(src) / static_cast<double>(dst);
    const double stretch = std::max(1.0, ratio);
    const double support = kernels::radius(kernel) * stretch;
    t.begin.reserve(dst + 1);
    for (std::size_t i = 0; i < dst; ++i) {
      t.begin.push_back(t.index.size());
      const double center = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      const auto lo = static_cast<long>(std::ceil(center - support));
      const auto hi = static_cast<long>(std::floor(center + support));
      double sum = 0.0;
      const std::size_t first = t.weight.size();
      for (long j = lo; j <= hi; ++j) {
        const double w = kernels::evaluate(kernel, (static_cast<double>(j) - center) / stretch);
        if (w == 0.0) continue;
        t.index.push_back(static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(src) - 1)));
        t.weight.push_back(w);
        sum += w;
      }
      for (std::size_t k = first; k < t.weight.size(); ++k) t.weight[k] /= sum;
    }
    t.begin.push_back(t.index.size());
    return t;
  }
};

namespace detail {

/// Weighted sum over valid (non-NaN) taps, renormalized; NaN when no tap is
/// valid. Sums deviations from the first valid tap so a constant neighborhood
/// comes back bit-exact.
template <class Get>
double filter_taps(const AxisTaps& taps, std::size_t i, Get&& get) {
  double anchor = std::nan(""), acc = 0.0, wsum = 0.0;
  for (std::size_t k = taps.begin[i]; k < taps.begin[i + 1]; ++k) {
    const double v = get(taps.index[k]);
    if (std::isnan(v)) continue;
    if (std::isnan(anchor)) anchor = v;
    acc += taps.weight[k] * (v - anchor);
    wsum += taps.weight[k];
  }
  if (std::abs(wsum) < 1e-12) return std::nan("");
  return anchor + acc / wsum;
}

}  // namespace detail

/// Horizontal pass then vertical pass. Output is float32 with the input's
/// band names, nodata and metadata.
inline MultiBandRaster resample(const MultiBandRaster& raster, const ResampleSpec& spec) {
  if (spec.target_width == 0 || spec.target_height == 0) throw DataError("resample target must be non-empty");
  const std::size_t sw = raster.width(), sh = raster.height();
  const std::size_t dw = spec.target_width, dh = spec.target_height;
  const std::size_t nb = raster.band_count();
  const AxisTaps htaps = AxisTaps::build(sw, dw, spec.kernel);
  const AxisTaps vtaps = AxisTaps::build(sh, dh, spec.kernel);
  const float nodata_out = raster.nodata() ? static_cast<float>(*raster.nodata()) : 0.0f;

  std::vector<std::vector<float>> out(nb, std::vector<float>(dw * dh));
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> src = band_values(raster, b);
    if (raster.nodata())
      for (auto& v : src)
        if (raster.is_nodata(v)) v = std::nan("");

    std::vector<double> tmp(dw * sh);
    parallel_for(sh, [&](std::size_t y) {
      const double* row = src.data() + y * sw;
      for (std::size_t x = 0; x < dw; ++x)
        tmp[y * dw + x] = detail::filter_taps(htaps, x, [&](std::size_t j) { return row[j]; });
    });
    parallel_for(dh, [&](std::size_t y) {
      for (std::size_t x = 0; x < dw; ++x) {
        const double v = detail::filter_taps(vtaps, y, [&](std::size_t j) { return tmp[j * dw + x]; });
        out[b][y * dw + x] = std::isnan(v) ? nodata_out : static_cast<float>(v);
      }
    });
  }
  return make_float_raster(dw, dh, std::move(out), raster.band_names(), raster.nodata(), raster.geo_meta());
}

/// Convenience for integer magnification or reduction by `factor` per axis.
inline ResampleSpec scaled_spec(const MultiBandRaster& r, double factor, ResampleKernel kernel) {
  if (!(factor > 0.0)) throw DataError("scale factor must be positive");
  ResampleSpec s;
  s.target_width = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(r.width()) * factor)));
  s.target_height = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(r.height()) * factor)));
  s.kernel = kernel;
  return s;
}

}  // namespace hlsalign
