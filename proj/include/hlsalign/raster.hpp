#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "hlsalign/error.hpp"
#include "hlsalign/parallel.hpp"

namespace hlsalign {

enum class SampleEncoding {
  int16_dn,             ///< signed 16-bit digital numbers
  float32_reflectance,  ///< 32-bit float physical values
};

inline std::string_view to_string(SampleEncoding e) {
  return e == SampleEncoding::int16_dn ? "int16" : "float32";
}

inline SampleEncoding parse_encoding(std::string_view name) {
  if (name == "int16" || name == "int16-DN" || name == "int16_dn") return SampleEncoding::int16_dn;
  if (name == "float32" || name == "float32-reflectance" || name == "float32_reflectance")
    return SampleEncoding::float32_reflectance;
  throw ConfigError("unknown sample encoding '" + std::string(name) + "' (expected int16 or float32)");
}

/// Row-major samples of one band in a single encoding.
class BandBuffer {
 public:
  using Int16Samples = std::vector<std::int16_t>;
  using Float32Samples = std::vector<float>;

  BandBuffer() = default;
  explicit BandBuffer(Int16Samples samples) : samples_(std::move(samples)) {}
  explicit BandBuffer(Float32Samples samples) : samples_(std::move(samples)) {}

  SampleEncoding encoding() const noexcept {
    return std::holds_alternative<Int16Samples>(samples_) ? SampleEncoding::int16_dn
                                                          : SampleEncoding::float32_reflectance;
  }

  std::size_t size() const noexcept {
    return std::visit([](const auto& v) { return v.size(); }, samples_);
  }

  double operator[](std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, samples_);
  }

  std::span<const std::int16_t> int16() const {
    if (auto* v = std::get_if<Int16Samples>(&samples_)) return *v;
    throw DataError("band is not int16 encoded");
  }

  std::span<const float> float32() const {
    if (auto* v = std::get_if<Float32Samples>(&samples_)) return *v;
    throw DataError("band is not float32 encoded");
  }

  /// Invokes fn with the underlying `const std::vector<T>&`.
  template <class Fn>
  decltype(auto) visit(Fn&& fn) const {
    return std::visit(std::forward<Fn>(fn), samples_);
  }

  friend bool operator==(const BandBuffer&, const BandBuffer&) = default;

 private:
  std::variant<Int16Samples, Float32Samples> samples_;
};

/// Opaque key-value metadata carried from reader to writer untouched.
using GeoMeta = std::map<std::string, std::string>;

/// Immutable multi-band image grid. Constructed once and validated; every
/// operation produces a new raster.
class MultiBandRaster {
 public:
  MultiBandRaster(std::size_t width, std::size_t height, std::vector<BandBuffer> bands,
                  std::vector<std::string> band_names = {}, std::optional<double> nodata = {},
                  GeoMeta geo_meta = {})
      : width_(width),
        height_(height),
        bands_(std::move(bands)),
        band_names_(std::move(band_names)),
        nodata_(nodata),
        geo_meta_(std::move(geo_meta)) {
    validate();
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }
  std::size_t band_count() const noexcept { return bands_.size(); }
  SampleEncoding encoding() const noexcept { return bands_.front().encoding(); }

  const BandBuffer& band(std::size_t b) const { return bands_.at(b); }
  const std::vector<BandBuffer>& bands() const noexcept { return bands_; }
  const std::vector<std::string>& band_names() const noexcept { return band_names_; }
  const std::string& band_name(std::size_t b) const { return band_names_.at(b); }
  const std::optional<double>& nodata() const noexcept { return nodata_; }
  const GeoMeta& geo_meta() const noexcept { return geo_meta_; }

  double at(std::size_t b, std::size_t x, std::size_t y) const { return bands_[b][y * width_ + x]; }

  bool is_nodata(double v) const noexcept {
    if (!nodata_) return false;
    if (std::isnan(*nodata_)) return std::isnan(v);
    return v == *nodata_;
  }

  MultiBandRaster with_geo_meta(GeoMeta meta) const {
    MultiBandRaster copy = *this;
    copy.geo_meta_ = std::move(meta);
    return copy;
  }

  MultiBandRaster with_band_names(std::vector<std::string> names) const {
    return MultiBandRaster(width_, height_, bands_, std::move(names), nodata_, geo_meta_);
  }

  friend bool operator==(const MultiBandRaster& a, const MultiBandRaster& b) {
    const bool same_nodata = a.nodata_.has_value() == b.nodata_.has_value() &&
                             (!a.nodata_ || a.is_nodata(*b.nodata_));
    return a.width_ == b.width_ && a.height_ == b.height_ && a.bands_ == b.bands_ &&
           a.band_names_ == b.band_names_ && same_nodata && a.geo_meta_ == b.geo_meta_;
  }

 private:
  void validate() {
    if (width_ == 0 || height_ == 0) throw DataError("raster dimensions must be positive");
    if (bands_.empty()) throw DataError("raster needs at least one band");
    if (band_names_.empty()) {
      for (std::size_t b = 0; b < bands_.size(); ++b) band_names_.push_back("B" + std::to_string(b + 1));
    }
    if (band_names_.size() != bands_.size())
      throw DataError("band_names has " + std::to_string(band_names_.size()) + " entries for " +
                      std::to_string(bands_.size()) + " bands");
    const auto enc = bands_.front().encoding();
    for (std::size_t b = 0; b < bands_.size(); ++b) {
      if (bands_[b].size() != width_ * height_)
        throw DataError("band " + std::to_string(b) + " has " + std::to_string(bands_[b].size()) +
                        " samples, expected " + std::to_string(width_ * height_));
      if (bands_[b].encoding() != enc) throw DataError("bands use mixed sample encodings");
    }
    if (enc == SampleEncoding::float32_reflectance) {
      for (std::size_t b = 0; b < bands_.size(); ++b) {
        for (float v : bands_[b].float32()) {
          if (!std::isfinite(v) && !is_nodata(v))
            throw DataError("band " + band_names_[b] + " contains a non-finite sample that is not nodata");
        }
      }
    }
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<BandBuffer> bands_;
  std::vector<std::string> band_names_;
  std::optional<double> nodata_;
  GeoMeta geo_meta_;
};

/// Builds a float32 raster from per-band sample vectors.
inline MultiBandRaster make_float_raster(std::size_t width, std::size_t height,
                                         std::vector<std::vector<float>> bands,
                                         std::vector<std::string> names = {},
                                         std::optional<double> nodata = {}, GeoMeta meta = {}) {
  std::vector<BandBuffer> buffers;
  buffers.reserve(bands.size());
  for (auto& b : bands) buffers.emplace_back(std::move(b));
  return MultiBandRaster(width, height, std::move(buffers), std::move(names), nodata, std::move(meta));
}

inline MultiBandRaster make_int16_raster(std::size_t width, std::size_t height,
                                         std::vector<std::vector<std::int16_t>> bands,
                                         std::vector<std::string> names = {},
                                         std::optional<double> nodata = {}, GeoMeta meta = {}) {
  std::vector<BandBuffer> buffers;
  buffers.reserve(bands.size());
  for (auto& b : bands) buffers.emplace_back(std::move(b));
  return MultiBandRaster(width, height, std::move(buffers), std::move(names), nodata, std::move(meta));
}

/// Band samples widened to double.
inline std::vector<double> band_values(const MultiBandRaster& r, std::size_t b) {
  return r.band(b).visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); });
}

/// Same raster re-encoded as float32 (lossless for int16 input).
inline MultiBandRaster to_float32(const MultiBandRaster& r) {
  if (r.encoding() == SampleEncoding::float32_reflectance) return r;
  std::vector<BandBuffer> bands;
  for (const auto& band : r.bands()) {
    auto src = band.int16();
    bands.emplace_back(std::vector<float>(src.begin(), src.end()));
  }
  return MultiBandRaster(r.width(), r.height(), std::move(bands), r.band_names(), r.nodata(), r.geo_meta());
}

/// Applies fn(band, value) -> double to every valid sample and stores the
/// result as float32. Nodata samples keep the nodata value.
template <class Fn>
MultiBandRaster map_samples(const MultiBandRaster& in, Fn fn) {
  const std::size_t n = in.pixel_count();
  const std::size_t nb = in.band_count();
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = chunk_count(n, kChunk);
  const float nodata_out = in.nodata() ? static_cast<float>(*in.nodata()) : 0.0f;
  std::vector<std::vector<float>> out(nb, std::vector<float>(n));
  parallel_for(nb * chunks, [&](std::size_t task) {
    const std::size_t b = task / chunks;
    const std::size_t begin = (task % chunks) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    in.band(b).visit([&](const auto& src) {
      for (std::size_t i = begin; i < end; ++i) {
        const double v = src[i];
        out[b][i] = in.is_nodata(v) ? nodata_out : static_cast<float>(fn(b, v));
      }
    });
  });
  return make_float_raster(in.width(), in.height(), std::move(out), in.band_names(), in.nodata(), in.geo_meta());
}

}  // namespace hlsalign
