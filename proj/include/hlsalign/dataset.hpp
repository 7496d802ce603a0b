#pragma once

// Patch-grid extraction, dataset statistics and min-max normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hlsalign/error.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster.hpp"

namespace hlsalign {

// ---------------------------------------------------------------------------
// Patch grid

/// Non-overlapping tiling anchored at the upper-left corner. Pixels past the
/// last full patch on each axis are discarded.
struct PatchGrid {
  std::size_t patch_size = 0;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t discarded_right = 0;
  std::size_t discarded_bottom = 0;

  std::size_t count() const noexcept { return cols * rows; }
  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

inline PatchGrid make_patch_grid(std::size_t width, std::size_t height, std::size_t patch_size) {
  if (patch_size == 0) throw DataError("patch size must be positive");
  if (patch_size > std::min(width, height))
    throw DataError("patch size " + std::to_string(patch_size) + " exceeds raster " + std::to_string(width) + "x" +
                    std::to_string(height));
  PatchGrid g;
  g.patch_size = patch_size;
  g.cols = width / patch_size;
  g.rows = height / patch_size;
  g.discarded_right = width - g.cols * patch_size;
  g.discarded_bottom = height - g.rows * patch_size;
  return g;
}

inline std::string patch_id(std::size_t row, std::size_t col) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%03zu_c%03zu", row, col);
  return buf;
}

struct Patch {
  std::string id;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t x_offset = 0;
  std::size_t y_offset = 0;
  MultiBandRaster raster;
};

/// Copies a window out of a raster, keeping encoding, nodata and metadata.
inline MultiBandRaster crop(const MultiBandRaster& src, std::size_t x0, std::size_t y0, std::size_t w,
                            std::size_t h, GeoMeta meta) {
  if (x0 + w > src.width() || y0 + h > src.height()) throw DataError("crop window leaves the raster");
  std::vector<BandBuffer> bands;
  bands.reserve(src.band_count());
  for (const auto& band : src.bands()) {
    band.visit([&](const auto& v) {
      using T = typename std::decay_t<decltype(v)>::value_type;
      std::vector<T> out(w * h);
      for (std::size_t y = 0; y < h; ++y)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((y0 + y) * src.width() + x0), w, out.begin() + y * w);
      bands.emplace_back(std::move(out));
    });
  }
  return MultiBandRaster(w, h, std::move(bands), src.band_names(), src.nodata(), std::move(meta));
}

/// Patches in row-major order from the upper-left corner. Each patch gets the
/// parent metadata plus "patch:id", "patch:x_offset" and "patch:y_offset".
inline std::pair<PatchGrid, std::vector<Patch>> extract_patches(const MultiBandRaster& raster,
                                                                std::size_t patch_size) {
  const PatchGrid grid = make_patch_grid(raster.width(), raster.height(), patch_size);
  std::vector<std::optional<Patch>> slots(grid.count());
  parallel_for(grid.count(), [&](std::size_t k) {
    const std::size_t row = k / grid.cols, col = k % grid.cols;
    const std::size_t x0 = col * patch_size, y0 = row * patch_size;
    GeoMeta meta = raster.geo_meta();
    const std::string id = patch_id(row, col);
    meta["patch:id"] = id;
    meta["patch:x_offset"] = std::to_string(x0);
    meta["patch:y_offset"] = std::to_string(y0);
    slots[k].emplace(Patch{id, row, col, x0, y0, crop(raster, x0, y0, patch_size, patch_size, std::move(meta))});
  });
  std::vector<Patch> patches;
  patches.reserve(slots.size());
  for (auto& s : slots) patches.push_back(std::move(*s));
  return {grid, std::move(patches)};
}

// ---------------------------------------------------------------------------
// Statistics

/// Running count/mean/M2/min/max with an associative merge (Chan et al.).
struct MomentAccumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = INFINITY;
  double max = -INFINITY;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
    min = std::min(min, x);
    max = std::max(max, x);
  }

  void merge(const MomentAccumulator& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
    const double n = na + nb;
    const double delta = o.mean - mean;
    mean += delta * nb / n;
    m2 += o.m2 + delta * delta * na * nb / n;
    count += o.count;
    min = std::min(min, o.min);
    max = std::max(max, o.max);
  }

  /// Population variance.
  double variance() const { return count == 0 ? 0.0 : std::max(0.0, m2 / static_cast<double>(count)); }
  double stddev() const { return std::sqrt(variance()); }
};

struct Histogram {
  std::vector<double> edges;          ///< bins + 1 ascending edges
  std::vector<std::uint64_t> counts;  ///< one per bin

  std::size_t bins() const noexcept { return counts.size(); }
};

/// Equal-width bins over [lo, hi]. Values outside land in the end bins.
inline std::vector<double> bin_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> edges(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  edges.back() = hi;
  return edges;
}

inline std::size_t bin_index(double v, double lo, double hi, std::size_t bins) {
  const double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
  if (!(t > 0.0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(t));
}

struct StatEntry {
  std::string name;
  std::uint64_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  Histogram histogram;
};

/// Per-band and pooled distribution summary of a set of rasters. Nodata is
/// excluded; standard deviation is the population (divide-by-N) value.
struct BandStatistics {
  std::vector<StatEntry> per_band;
  StatEntry overall;
  std::uint64_t sample_count = 0;
  SampleEncoding encoding = SampleEncoding::float32_reflectance;
};

inline constexpr std::size_t kDefaultHistogramBins = 256;

inline BandStatistics compute_stats(const std::vector<const MultiBandRaster*>& rasters,
                                    std::size_t bins = kDefaultHistogramBins) {
  if (rasters.empty()) throw DataError("compute_stats needs at least one raster");
  if (bins == 0) throw DataError("histogram needs at least one bin");
  const MultiBandRaster& first = *rasters.front();
  const std::size_t nb = first.band_count();
  for (const auto* r : rasters) {
    if (r->band_count() != nb) throw DataError("rasters disagree on band count");
    if (r->encoding() != first.encoding()) throw DataError("rasters disagree on sample encoding");
  }

  // Fixed chunking keeps the merge tree independent of the worker count.
  constexpr std::size_t kChunk = 1 << 16;
  struct Task {
    std::size_t raster, band, begin, end;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < rasters.size(); ++r) {
    const std::size_t n = rasters[r]->pixel_count();
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < chunk_count(n, kChunk); ++c)
        tasks.push_back({r, b, c * kChunk, std::min(n, (c + 1) * kChunk)});
  }

  std::vector<MomentAccumulator> partial(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& task = tasks[t];
    const MultiBandRaster& r = *rasters[task.raster];
    r.band(task.band).visit([&](const auto& v) {
      MomentAccumulator acc;
      for (std::size_t i = task.begin; i < task.end; ++i) {
        const double x = v[i];
        if (!r.is_nodata(x)) acc.add(x);
      }
      partial[t] = acc;
    });
  });

  std::vector<MomentAccumulator> band_acc(nb);
  for (std::size_t t = 0; t < tasks.size(); ++t) band_acc[tasks[t].band].merge(partial[t]);
  MomentAccumulator overall_acc;
  for (const auto& a : band_acc) overall_acc.merge(a);
  if (overall_acc.count == 0) throw DataError("no valid samples to summarize");

  auto range_of = [](const MomentAccumulator& a) {
    if (a.count == 0) return std::pair{0.0, 1.0};
    if (a.max > a.min) return std::pair{a.min, a.max};
    return std::pair{a.min - 0.5, a.min + 0.5};
  };

  std::vector<std::vector<std::uint64_t>> band_counts(tasks.size());
  std::vector<std::vector<std::uint64_t>> overall_counts(tasks.size());
  const auto overall_range = range_of(overall_acc);
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& task = tasks[t];
    const MultiBandRaster& r = *rasters[task.raster];
    const auto band_range = range_of(band_acc[task.band]);
    band_counts[t].assign(bins, 0);
    overall_counts[t].assign(bins, 0);
    r.band(task.band).visit([&](const auto& v) {
      for (std::size_t i = task.begin; i < task.end; ++i) {
        const double x = v[i];
        if (r.is_nodata(x)) continue;
        ++band_counts[t][bin_index(x, band_range.first, band_range.second, bins)];
        ++overall_counts[t][bin_index(x, overall_range.first, overall_range.second, bins)];
      }
    });
  });

  auto make_entry = [&](const std::string& name, const MomentAccumulator& a) {
    StatEntry e;
    e.name = name;
    e.count = a.count;
    if (a.count > 0) {
      e.min = a.min;
      e.max = a.max;
      e.mean = std::clamp(a.mean, a.min, a.max);
      e.std = a.stddev();
    }
    const auto [lo, hi] = range_of(a);
    e.histogram.edges = bin_edges(lo, hi, bins);
    e.histogram.counts.assign(bins, 0);
    return e;
  };

  BandStatistics stats;
  stats.encoding = first.encoding();
  for (std::size_t b = 0; b < nb; ++b) stats.per_band.push_back(make_entry(first.band_name(b), band_acc[b]));
  stats.overall = make_entry("overall", overall_acc);
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (std::size_t k = 0; k < bins; ++k) {
      stats.per_band[tasks[t].band].histogram.counts[k] += band_counts[t][k];
      stats.overall.histogram.counts[k] += overall_counts[t][k];
    }
  stats.sample_count = overall_acc.count;
  return stats;
}

inline BandStatistics compute_stats(const std::vector<MultiBandRaster>& rasters,
                                    std::size_t bins = kDefaultHistogramBins) {
  std::vector<const MultiBandRaster*> ptrs;
  for (const auto& r : rasters) ptrs.push_back(&r);
  return compute_stats(ptrs, bins);
}

// ---------------------------------------------------------------------------
// Normalization

enum class NormalizationMode { global, per_band };

inline NormalizationMode parse_normalization_mode(std::string_view s) {
  if (s == "global") return NormalizationMode::global;
  if (s == "per_band" || s == "per-band" || s == "channel") return NormalizationMode::per_band;
  throw ConfigError("unknown normalization mode '" + std::string(s) + "' (expected global or per_band)");
}

inline std::string_view to_string(NormalizationMode m) {
  return m == NormalizationMode::global ? "global" : "per_band";
}

namespace detail {
inline std::vector<std::pair<double, double>> normalization_ranges(const MultiBandRaster& raster,
                                                                   const BandStatistics& stats,
                                                                   NormalizationMode mode) {
  if (stats.per_band.size() != raster.band_count())
    throw DataError("statistics cover " + std::to_string(stats.per_band.size()) + " bands but raster has " +
                    std::to_string(raster.band_count()));
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t b = 0; b < raster.band_count(); ++b) {
    const StatEntry& e = mode == NormalizationMode::per_band ? stats.per_band[b] : stats.overall;
    if (!(e.max > e.min))
      throw DomainError("cannot normalize: " + e.name + " has a degenerate range (min = max = " +
                        std::to_string(e.min) + ")");
    ranges.emplace_back(e.min, e.max);
  }
  return ranges;
}
}  // namespace detail

/// x' = clamp((x - min) / (max - min), 0, 1), with min/max taken per band or
/// from the pooled entry.
inline MultiBandRaster minmax_normalize(const MultiBandRaster& raster, const BandStatistics& stats,
                                        NormalizationMode mode) {
  const auto ranges = detail::normalization_ranges(raster, stats, mode);
  return map_samples(raster, [&](std::size_t b, double x) {
    const auto [lo, hi] = ranges[b];
    return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  });
}

inline MultiBandRaster denormalize(const MultiBandRaster& raster, const BandStatistics& stats,
                                   NormalizationMode mode) {
  const auto ranges = detail::normalization_ranges(raster, stats, mode);
  return map_samples(raster, [&](std::size_t b, double x) {
    const auto [lo, hi] = ranges[b];
    return x * (hi - lo) + lo;
  });
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const StatEntry& e) {
  j = nlohmann::json{{"name", e.name},
                     {"count", e.count},
                     {"min", e.min},
                     {"max", e.max},
                     {"mean", e.mean},
                     {"std", e.std},
                     {"histogram", {{"edges", e.histogram.edges}, {"counts", e.histogram.counts}}}};
}

inline void from_json(const nlohmann::json& j, StatEntry& e) {
  j.at("name").get_to(e.name);
  j.at("count").get_to(e.count);
  j.at("min").get_to(e.min);
  j.at("max").get_to(e.max);
  j.at("mean").get_to(e.mean);
  j.at("std").get_to(e.std);
  j.at("histogram").at("edges").get_to(e.histogram.edges);
  j.at("histogram").at("counts").get_to(e.histogram.counts);
}

inline void to_json(nlohmann::json& j, const BandStatistics& s) {
  j = nlohmann::json{{"encoding", to_string(s.encoding)},
                     {"std_convention", "population"},
                     {"sample_count", s.sample_count},
                     {"bins", s.overall.histogram.bins()},
                     {"per_band", s.per_band},
                     {"overall", s.overall}};
}

inline void from_json(const nlohmann::json& j, BandStatistics& s) {
  s.encoding = parse_encoding(j.at("encoding").get<std::string>());
  j.at("sample_count").get_to(s.sample_count);
  j.at("per_band").get_to(s.per_band);
  j.at("overall").get_to(s.overall);
}

struct PatchRecord {
  std::string id;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t x_offset = 0;
  std::size_t y_offset = 0;
  std::string file;  ///< relative to the manifest's directory
};

/// Index of a patch directory.
struct PatchManifest {
  std::string source;
  std::size_t width = 0;
  std::size_t height = 0;
  PatchGrid grid;
  std::vector<std::string> band_names;
  SampleEncoding encoding = SampleEncoding::float32_reflectance;
  std::vector<PatchRecord> patches;
};

inline void to_json(nlohmann::json& j, const PatchManifest& m) {
  nlohmann::json patches = nlohmann::json::array();
  for (const auto& p : m.patches)
    patches.push_back({{"id", p.id},
                       {"row", p.row},
                       {"col", p.col},
                       {"x_offset", p.x_offset},
                       {"y_offset", p.y_offset},
                       {"file", p.file}});
  j = nlohmann::json{{"source", m.source},
                     {"width", m.width},
                     {"height", m.height},
                     {"patch_size", m.grid.patch_size},
                     {"grid",
                      {{"rows", m.grid.rows},
                       {"cols", m.grid.cols},
                       {"discarded_right", m.grid.discarded_right},
                       {"discarded_bottom", m.grid.discarded_bottom}}},
                     {"band_names", m.band_names},
                     {"encoding", to_string(m.encoding)},
                     {"patches", patches}};
}

inline void from_json(const nlohmann::json& j, PatchManifest& m) {
  j.at("source").get_to(m.source);
  j.at("width").get_to(m.width);
  j.at("height").get_to(m.height);
  j.at("patch_size").get_to(m.grid.patch_size);
  const auto& g = j.at("grid");
  g.at("rows").get_to(m.grid.rows);
  g.at("cols").get_to(m.grid.cols);
  g.at("discarded_right").get_to(m.grid.discarded_right);
  g.at("discarded_bottom").get_to(m.grid.discarded_bottom);
  j.at("band_names").get_to(m.band_names);
  m.encoding = parse_encoding(j.at("encoding").get<std::string>());
  m.patches.clear();
  for (const auto& p : j.at("patches")) {
    PatchRecord r;
    p.at("id").get_to(r.id);
    p.at("row").get_to(r.row);
    p.at("col").get_to(r.col);
    p.at("x_offset").get_to(r.x_offset);
    p.at("y_offset").get_to(r.y_offset);
    p.at("file").get_to(r.file);
    m.patches.push_back(std::move(r));
  }
}

/// Seeded Fisher-Yates shuffle followed by a train/validation cut.
inline std::pair<std::vector<std::string>, std::vector<std::string>> shuffle_split(std::vector<std::string> ids,
                                                                                   double val_fraction,
                                                                                   std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) throw ConfigError("validation fraction must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(ids[i - 1], ids[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ids.size())));
  std::vector<std::string> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> train(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  return {std::move(train), std::move(val)};
}

}  // namespace hlsalign
