#pragma once

// Band-wise image comparison: MSE / RMSE / MAE, PSNR, Gaussian-window SSIM,
// signed difference maps and shared-bin histograms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hlsalign/dataset.hpp"
#include "hlsalign/error.hpp"
#include "hlsalign/format.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster.hpp"
#include "hlsalign/raster_io.hpp"

namespace hlsalign {

namespace detail {

inline void check_same_shape(const MultiBandRaster& a, const MultiBandRaster& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height() || a.band_count() != b.band_count())
    throw DataError(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + "x" + std::to_string(a.band_count()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                    std::to_string(b.band_count()) + ")");
}

inline bool valid_pair(const MultiBandRaster& a, double va, const MultiBandRaster& b, double vb) {
  return !a.is_nodata(va) && !b.is_nodata(vb);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pixel errors

/// Sums behind MSE and MAE; merging pools samples.
struct ErrorAccumulator {
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  std::uint64_t count = 0;

  void merge(const ErrorAccumulator& o) {
    sum_sq += o.sum_sq;
    sum_abs += o.sum_abs;
    count += o.count;
  }
  double mse() const { return sum_sq / static_cast<double>(count); }
  double mae() const { return sum_abs / static_cast<double>(count); }
};

struct ErrorStats {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::uint64_t count = 0;

  static ErrorStats from(const ErrorAccumulator& a) {
    if (a.count == 0) throw DataError("no valid pixels to compare");
    const double mse = a.mse();
    return {mse, std::sqrt(mse), a.mae(), a.count};
  }
};

struct PixelErrors {
  std::vector<ErrorStats> per_band;
  ErrorStats aggregate;
};

namespace detail {

inline std::vector<ErrorAccumulator> error_sums(const MultiBandRaster& pred, const MultiBandRaster& ref) {
  check_same_shape(pred, ref, "pixel_errors");
  const std::size_t nb = pred.band_count(), n = pred.pixel_count();
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = chunk_count(n, kChunk);
  std::vector<ErrorAccumulator> partial(nb * chunks);
  parallel_for(nb * chunks, [&](std::size_t t) {
    const std::size_t b = t / chunks, begin = (t % chunks) * kChunk, end = std::min(n, begin + kChunk);
    ErrorAccumulator acc;
    pred.band(b).visit([&](const auto& pv) {
      ref.band(b).visit([&](const auto& rv) {
        for (std::size_t i = begin; i < end; ++i) {
          const double x = pv[i], y = rv[i];
          if (!valid_pair(pred, x, ref, y)) continue;
          const double d = x - y;
          acc.sum_sq += d * d;
          acc.sum_abs += std::abs(d);
          ++acc.count;
        }
      });
    });
    partial[t] = acc;
  });
  std::vector<ErrorAccumulator> per_band(nb);
  for (std::size_t t = 0; t < partial.size(); ++t) per_band[t / chunks].merge(partial[t]);
  return per_band;
}

}  // namespace detail

/// MSE, RMSE and MAE per band and pooled over all bands. Pixels where either
/// side is nodata are skipped.
inline PixelErrors pixel_errors(const MultiBandRaster& pred, const MultiBandRaster& ref) {
  const auto sums = detail::error_sums(pred, ref);
  PixelErrors out;
  ErrorAccumulator pooled;
  for (std::size_t b = 0; b < sums.size(); ++b) {
    if (sums[b].count == 0) throw DataError("band " + pred.band_name(b) + " has no valid pixels to compare");
    out.per_band.push_back(ErrorStats::from(sums[b]));
    pooled.merge(sums[b]);
  }
  out.aggregate = ErrorStats::from(pooled);
  return out;
}

// ---------------------------------------------------------------------------
// PSNR

/// 10 log10(range^2 / mse); +inf when mse is zero.
inline double psnr_from_mse(double mse, double data_range) {
  if (!(data_range > 0.0)) throw DomainError("data_range must be positive");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

struct PsnrResult {
  std::vector<double> per_band;
  double aggregate = 0.0;
};

inline PsnrResult psnr(const MultiBandRaster& pred, const MultiBandRaster& ref, double data_range) {
  if (!(data_range > 0.0)) throw DomainError("data_range must be positive");
  const auto errors = pixel_errors(pred, ref);
  PsnrResult r;
  for (const auto& e : errors.per_band) r.per_band.push_back(psnr_from_mse(e.mse, data_range));
  r.aggregate = psnr_from_mse(errors.aggregate.mse, data_range);
  return r;
}

// ---------------------------------------------------------------------------
// SSIM

struct SsimParams {
  double data_range = 1.0;
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Sum of local SSIM values and the number of windows contributing.
struct SsimAccumulator {
  double sum = 0.0;
  std::uint64_t windows = 0;

  void merge(const SsimAccumulator& o) {
    sum += o.sum;
    windows += o.windows;
  }
  double mean() const { return sum / static_cast<double>(windows); }
};

struct SsimResult {
  std::vector<double> per_band;
  double aggregate = 0.0;
  std::vector<SsimAccumulator> sums;
};

inline std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = 0.5 * static_cast<double>(size - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double x = static_cast<double>(k) - c;
    g[k] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += g[k];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace detail {

/// Local SSIM sums for one band over every window position that lies fully
/// inside the image and holds no nodata on either side.
inline SsimAccumulator ssim_band(const MultiBandRaster& pred, const MultiBandRaster& ref, std::size_t b,
                                 const SsimParams& p) {
  const std::size_t w = pred.width(), h = pred.height(), win = p.window;
  const std::size_t ow = w - win + 1, oh = h - win + 1;
  const auto g = gaussian_window(win, p.sigma);
  const std::vector<double> x = band_values(pred, b);
  const std::vector<double> y = band_values(ref, b);

  // Integral image of invalid pixels for window rejection.
  std::vector<std::uint32_t> bad((w + 1) * (h + 1), 0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const bool invalid = !valid_pair(pred, x[r * w + c], ref, y[r * w + c]);
      bad[(r + 1) * (w + 1) + c + 1] =
          bad[r * (w + 1) + c + 1] + bad[(r + 1) * (w + 1) + c] - bad[r * (w + 1) + c] + (invalid ? 1 : 0);
    }
  auto window_bad = [&](std::size_t r, std::size_t c) {
    return bad[(r + win) * (w + 1) + c + win] - bad[r * (w + 1) + c + win] - bad[(r + win) * (w + 1) + c] +
           bad[r * (w + 1) + c];
  };

  // Horizontal pass for the five moment images.
  enum { kX, kY, kXX, kYY, kXY, kMoments };
  std::vector<std::array<double, kMoments>> hsum(h * ow);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      std::array<double, kMoments> s{};
      for (std::size_t k = 0; k < win; ++k) {
        const std::size_t i = r * w + c + k;
        double xv = x[i], yv = y[i];
        if (!valid_pair(pred, xv, ref, yv)) xv = yv = 0.0;
        s[kX] += g[k] * xv;
        s[kY] += g[k] * yv;
        s[kXX] += g[k] * (xv * xv);
        s[kYY] += g[k] * (yv * yv);
        s[kXY] += g[k] * (xv * yv);
      }
      hsum[r * ow + c] = s;
    }

  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  SsimAccumulator acc;
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      if (window_bad(r, c) != 0) continue;
      std::array<double, kMoments> m{};
      for (std::size_t k = 0; k < win; ++k)
        for (int q = 0; q < kMoments; ++q) m[q] += g[k] * hsum[(r + k) * ow + c][q];
      const double mx = m[kX], my = m[kY];
      const double vx = m[kXX] - mx * mx;
      const double vy = m[kYY] - my * my;
      const double cov = m[kXY] - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      acc.sum += num / den;
      ++acc.windows;
    }
  return acc;
}

}  // namespace detail

/// Mean SSIM per band (Gaussian window, population moments) and over all
/// bands' windows pooled.
inline SsimResult ssim(const MultiBandRaster& pred, const MultiBandRaster& ref, const SsimParams& params) {
  detail::check_same_shape(pred, ref, "ssim");
  if (!(params.data_range > 0.0)) throw DomainError("data_range must be positive");
  if (pred.width() < params.window || pred.height() < params.window)
    throw DataError("image " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                    " is smaller than the " + std::to_string(params.window) + "x" + std::to_string(params.window) +
                    " SSIM window");
  SsimResult r;
  r.sums.resize(pred.band_count());
  parallel_for(pred.band_count(), [&](std::size_t b) { r.sums[b] = detail::ssim_band(pred, ref, b, params); });
  SsimAccumulator pooled;
  for (std::size_t b = 0; b < r.sums.size(); ++b) {
    if (r.sums[b].windows == 0) throw DataError("band " + pred.band_name(b) + " has no nodata-free SSIM window");
    r.per_band.push_back(r.sums[b].mean());
    pooled.merge(r.sums[b]);
  }
  r.aggregate = pooled.mean();
  return r;
}

inline SsimResult ssim(const MultiBandRaster& pred, const MultiBandRaster& ref, double data_range) {
  SsimParams p;
  p.data_range = data_range;
  return ssim(pred, ref, p);
}

// ---------------------------------------------------------------------------
// Difference maps

struct DiffSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double mean_abs = 0.0;
  std::uint64_t count = 0;
};

struct DiffMap {
  MultiBandRaster map;  ///< pred - ref, float32; NaN nodata when either input has nodata
  std::vector<DiffSummary> per_band;
  DiffSummary aggregate;
};

inline DiffMap diff_map(const MultiBandRaster& pred, const MultiBandRaster& ref) {
  detail::check_same_shape(pred, ref, "diff_map");
  const std::size_t nb = pred.band_count(), n = pred.pixel_count();
  const bool has_nodata = pred.nodata() || ref.nodata();
  const float nodata_out = std::numeric_limits<float>::quiet_NaN();

  struct Sums {
    double sum = 0.0, sum_abs = 0.0, min = INFINITY, max = -INFINITY;
    std::uint64_t count = 0;
  };
  std::vector<std::vector<float>> out(nb, std::vector<float>(n));
  std::vector<Sums> sums(nb);
  parallel_for(nb, [&](std::size_t b) {
    Sums s;
    pred.band(b).visit([&](const auto& pv) {
      ref.band(b).visit([&](const auto& rv) {
        for (std::size_t i = 0; i < n; ++i) {
          const double x = pv[i], y = rv[i];
          if (!detail::valid_pair(pred, x, ref, y)) {
            out[b][i] = nodata_out;
            continue;
          }
          const double d = x - y;
          out[b][i] = static_cast<float>(d);
          s.sum += d;
          s.sum_abs += std::abs(d);
          s.min = std::min(s.min, d);
          s.max = std::max(s.max, d);
          ++s.count;
        }
      });
    });
    sums[b] = s;
  });

  auto summarize = [](const Sums& s) {
    DiffSummary d;
    d.count = s.count;
    if (s.count > 0) {
      d.min = s.min;
      d.max = s.max;
      d.mean = s.sum / static_cast<double>(s.count);
      d.mean_abs = s.sum_abs / static_cast<double>(s.count);
    }
    return d;
  };
  DiffMap result{make_float_raster(pred.width(), pred.height(), std::move(out), pred.band_names(),
                                   has_nodata ? std::optional<double>(nodata_out) : std::nullopt, ref.geo_meta()),
                 {},
                 {}};
  Sums pooled;
  for (const auto& s : sums) {
    result.per_band.push_back(summarize(s));
    pooled.sum += s.sum;
    pooled.sum_abs += s.sum_abs;
    pooled.min = std::min(pooled.min, s.min);
    pooled.max = std::max(pooled.max, s.max);
    pooled.count += s.count;
  }
  result.aggregate = summarize(pooled);
  return result;
}

/// Grayscale PNG of one difference band with the symmetric window (-r, r),
/// r = max |diff| (1 when the map is all zero).
inline void export_diff_png(const DiffMap& diff, std::size_t band, const std::filesystem::path& path) {
  const auto& s = diff.per_band.at(band);
  double r = std::max(std::abs(s.min), std::abs(s.max));
  if (!(r > 0.0)) r = 1.0;
  export_png(diff.map, {band, band, band}, {-r, r}, path);
}

// ---------------------------------------------------------------------------
// Histograms

struct HistogramSource {
  std::string label;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
};

/// Counts of several rasters' band over one shared set of bins.
struct HistogramReport {
  std::size_t band = 0;
  std::vector<double> bin_edges;
  std::vector<HistogramSource> sources;

  std::string to_csv() const {
    std::string out = "bin_low,bin_high";
    for (const auto& s : sources) out += "," + s.label;
    out += "\n";
    for (std::size_t k = 0; k + 1 < bin_edges.size(); ++k) {
      out += format_double(bin_edges[k]) + "," + format_double(bin_edges[k + 1]);
      for (const auto& s : sources) out += "," + std::to_string(s.counts[k]);
      out += "\n";
    }
    return out;
  }
};

struct LabeledRaster {
  std::string label;
  const MultiBandRaster* raster = nullptr;
};

/// Bins span the union of the sources' valid ranges. A zero-width union is
/// widened to +-0.5 around the single value.
inline HistogramReport histogram_compare(const std::vector<LabeledRaster>& rasters, std::size_t band,
                                         std::size_t bins = kDefaultHistogramBins) {
  if (rasters.empty()) throw DataError("histogram_compare needs at least one raster");
  if (bins == 0) throw DataError("histogram needs at least one bin");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& lr : rasters) {
    if (band >= lr.raster->band_count())
      throw DataError("band " + std::to_string(band) + " missing from '" + lr.label + "'");
    lr.raster->band(band).visit([&](const auto& v) {
      for (auto s : v) {
        const double x = s;
        if (lr.raster->is_nodata(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    });
  }
  if (!(lo <= hi)) throw DataError("histogram_compare: no valid samples in any source");
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  HistogramReport report;
  report.band = band;
  report.bin_edges = bin_edges(lo, hi, bins);
  for (const auto& lr : rasters) {
    HistogramSource src{lr.label, std::vector<std::uint64_t>(bins, 0), 0};
    lr.raster->band(band).visit([&](const auto& v) {
      for (auto s : v) {
        const double x = s;
        if (lr.raster->is_nodata(x)) continue;
        ++src.counts[bin_index(x, lo, hi, bins)];
        ++src.total;
      }
    });
    report.sources.push_back(std::move(src));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reports

struct BandMetrics {
  std::string band_name;
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double psnr = 0.0;  ///< +inf when mse == 0
  double ssim = 0.0;
  std::uint64_t sample_count = 0;

  bool psnr_infinite() const { return std::isinf(psnr); }
};

struct MetricReport {
  std::vector<BandMetrics> per_band;
  BandMetrics aggregate;
  double data_range = 0.0;
  std::uint64_t sample_count = 0;
};

/// Error and SSIM sums for one comparison; pooling several of these gives
/// corpus-level metrics.
struct MetricAccumulator {
  std::vector<std::string> band_names;
  std::vector<ErrorAccumulator> errors;
  std::vector<SsimAccumulator> ssim;

  void merge(const MetricAccumulator& o) {
    if (errors.empty()) {
      *this = o;
      return;
    }
    if (o.errors.size() != errors.size()) throw DataError("cannot pool reports with different band counts");
    for (std::size_t b = 0; b < errors.size(); ++b) {
      errors[b].merge(o.errors[b]);
      ssim[b].merge(o.ssim[b]);
    }
  }

  MetricReport report(double data_range) const {
    MetricReport r;
    r.data_range = data_range;
    auto row = [&](std::string name, const ErrorAccumulator& e, const SsimAccumulator& s) {
      const ErrorStats es = ErrorStats::from(e);
      BandMetrics m;
      m.band_name = std::move(name);
      m.mse = es.mse;
      m.rmse = es.rmse;
      m.mae = es.mae;
      m.psnr = psnr_from_mse(es.mse, data_range);
      m.ssim = s.mean();
      m.sample_count = es.count;
      return m;
    };
    ErrorAccumulator pooled_e;
    SsimAccumulator pooled_s;
    for (std::size_t b = 0; b < errors.size(); ++b) {
      r.per_band.push_back(row(band_names[b], errors[b], ssim[b]));
      pooled_e.merge(errors[b]);
      pooled_s.merge(ssim[b]);
    }
    r.aggregate = row("all", pooled_e, pooled_s);
    r.sample_count = pooled_e.count;
    return r;
  }
};

inline MetricAccumulator accumulate_metrics(const MultiBandRaster& pred, const MultiBandRaster& ref,
                                            double data_range) {
  MetricAccumulator acc;
  acc.band_names = ref.band_names();
  acc.errors = detail::error_sums(pred, ref);
  acc.ssim = ssim(pred, ref, data_range).sums;
  return acc;
}

/// Full per-band and aggregate report for one prediction/reference pair.
inline MetricReport evaluate_pair(const MultiBandRaster& pred, const MultiBandRaster& ref, double data_range) {
  return accumulate_metrics(pred, ref, data_range).report(data_range);
}

inline nlohmann::json to_json_value(const BandMetrics& m) {
  nlohmann::json j{{"band", m.band_name}, {"mse", m.mse},   {"rmse", m.rmse},
                   {"mae", m.mae},        {"ssim", m.ssim}, {"sample_count", m.sample_count}};
  j["psnr"] = m.psnr_infinite() ? nlohmann::json(nullptr) : nlohmann::json(m.psnr);
  j["psnr_infinite"] = m.psnr_infinite();
  return j;
}

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : r.per_band) bands.push_back(to_json_value(b));
  j = nlohmann::json{{"data_range", r.data_range},
                     {"sample_count", r.sample_count},
                     {"per_band", bands},
                     {"aggregate", to_json_value(r.aggregate)}};
}

/// CSV header matching metric_csv_row().
inline constexpr const char* kMetricCsvHeader = "patch_id,source,band,mse,rmse,mae,psnr,psnr_infinite,ssim,sample_count";

inline std::string metric_csv_row(const std::string& patch, const std::string& source, const BandMetrics& m) {
  return patch + "," + source + "," + m.band_name + "," + format_double(m.mse) + "," + format_double(m.rmse) + "," +
         format_double(m.mae) + "," + (m.psnr_infinite() ? std::string() : format_double(m.psnr)) + "," +
         (m.psnr_infinite() ? "true" : "false") + "," + format_double(m.ssim) + "," +
         std::to_string(m.sample_count);
}

}  // namespace hlsalign
