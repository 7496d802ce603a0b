#pragma once

// TIFF and PNG input/output for MultiBandRaster.
//
// Reading accepts stripped or tiled layouts, contiguous or planar sample
// organization, uncompressed or any codec libtiff was built with, and
// 8/16-bit integer or 32-bit float samples. Multi-page files contribute one
// band set per full-resolution page; reduced-resolution pages are skipped.
// Writing is always stripped and planar (one plane per band).
//
// GeoTIFF and GDAL tags are exposed in geo_meta under "tiff:<TagName>" keys
// (numeric arrays as space separated text). Any other geo_meta keys and the
// band names travel in a private ASCII tag as JSON.

#include <tiffio.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlsalign/error.hpp"
#include "hlsalign/format.hpp"
#include "hlsalign/raster.hpp"

namespace hlsalign {

enum class TiffCompression { none, deflate };

/// Header-level description of a TIFF file, without decoding samples.
struct RasterFileInfo {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  bool is_signed = false;
};

namespace detail {

constexpr std::uint32_t kTagModelPixelScale = 33550;
constexpr std::uint32_t kTagModelTiepoint = 33922;
constexpr std::uint32_t kTagModelTransformation = 34264;
constexpr std::uint32_t kTagGeoKeyDirectory = 34735;
constexpr std::uint32_t kTagGeoDoubleParams = 34736;
constexpr std::uint32_t kTagGeoAsciiParams = 34737;
constexpr std::uint32_t kTagGdalMetadata = 42112;
constexpr std::uint32_t kTagGdalNodata = 42113;
constexpr std::uint32_t kTagPrivateMeta = 65000;

enum class TagKind { doubles, shorts, ascii };

struct PassthroughTag {
  std::uint32_t tag;
  TagKind kind;
  const char* key;
};

inline constexpr std::array<PassthroughTag, 9> kPassthroughTags{{
    {kTagModelPixelScale, TagKind::doubles, "tiff:ModelPixelScale"},
    {kTagModelTiepoint, TagKind::doubles, "tiff:ModelTiepoint"},
    {kTagModelTransformation, TagKind::doubles, "tiff:ModelTransformation"},
    {kTagGeoKeyDirectory, TagKind::shorts, "tiff:GeoKeyDirectory"},
    {kTagGeoDoubleParams, TagKind::doubles, "tiff:GeoDoubleParams"},
    {kTagGeoAsciiParams, TagKind::ascii, "tiff:GeoAsciiParams"},
    {kTagGdalMetadata, TagKind::ascii, "tiff:GDALMetadata"},
    {TIFFTAG_DATETIME, TagKind::ascii, "tiff:DateTime"},
    {TIFFTAG_IMAGEDESCRIPTION, TagKind::ascii, "tiff:ImageDescription"},
}};

inline thread_local std::string tiff_error_text;

inline void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
  char buf[1024];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  tiff_error_text = module ? std::string(module) + ": " + buf : std::string(buf);
}

inline TIFFExtendProc& parent_extender() {
  static TIFFExtendProc parent = nullptr;
  return parent;
}

inline void register_extra_tags(TIFF* tif) {
  static char n1[] = "ModelPixelScaleTag", n2[] = "ModelTiepointTag", n3[] = "ModelTransformationTag",
              n4[] = "GeoKeyDirectoryTag", n5[] = "GeoDoubleParamsTag", n6[] = "GeoASCIIParamsTag",
              n7[] = "GDALMetadata", n8[] = "GDALNoDataValue", n9[] = "HlsalignMetadata";
  static const TIFFFieldInfo info[] = {
      {kTagModelPixelScale, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, n1},
      {kTagModelTiepoint, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, n2},
      {kTagModelTransformation, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, n3},
      {kTagGeoKeyDirectory, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1, n4},
      {kTagGeoDoubleParams, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, n5},
      {kTagGeoAsciiParams, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, n6},
      {kTagGdalMetadata, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, n7},
      {kTagGdalNodata, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, n8},
      {kTagPrivateMeta, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, n9},
  };
  TIFFMergeFieldInfo(tif, info, sizeof info / sizeof info[0]);
  if (parent_extender()) parent_extender()(tif);
}

inline void init_libtiff() {
  static std::once_flag once;
  std::call_once(once, [] {
    parent_extender() = TIFFSetTagExtender(register_extra_tags);
    TIFFSetErrorHandler(tiff_error_handler);
    TIFFSetWarningHandler(nullptr);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const noexcept {
    if (t) TIFFClose(t);
  }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

inline TiffHandle open_tiff(const std::filesystem::path& path, const char* mode) {
  init_libtiff();
  tiff_error_text.clear();
  TiffHandle h(TIFFOpen(path.c_str(), mode));
  if (!h) {
    throw IoError("cannot open TIFF '" + path.string() + "'" +
                  (tiff_error_text.empty() ? std::string() : ": " + tiff_error_text));
  }
  return h;
}

template <class T>
std::optional<std::vector<T>> get_array_tag(TIFF* tif, std::uint32_t tag) {
  const TIFFField* field = TIFFFindField(tif, tag, TIFF_ANY);
  if (!field || !TIFFFieldPassCount(field)) return std::nullopt;
  void* data = nullptr;
  std::uint32_t n = 0;
  if (TIFFFieldReadCount(field) == TIFF_VARIABLE2) {
    if (!TIFFGetField(tif, tag, &n, &data)) return std::nullopt;
  } else {
    std::uint16_t n16 = 0;
    if (!TIFFGetField(tif, tag, &n16, &data)) return std::nullopt;
    n = n16;
  }
  const T* p = static_cast<const T*>(data);
  return std::vector<T>(p, p + n);
}

inline std::optional<std::string> get_ascii_tag(TIFF* tif, std::uint32_t tag) {
  const TIFFField* field = TIFFFindField(tif, tag, TIFF_ANY);
  if (!field) return std::nullopt;
  if (TIFFFieldPassCount(field)) {
    auto chars = get_array_tag<char>(tif, tag);
    if (!chars) return std::nullopt;
    std::string s(chars->begin(), chars->end());
    while (!s.empty() && s.back() == '\0') s.pop_back();
    return s;
  }
  char* text = nullptr;
  if (!TIFFGetField(tif, tag, &text) || !text) return std::nullopt;
  return std::string(text);
}

template <class T>
std::string join_numbers(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ' ';
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v);
    else
      out += std::to_string(v);
  }
  return out;
}

template <class T>
std::vector<T> split_numbers(const std::string& text, const std::string& key) {
  std::vector<T> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    try {
      if constexpr (std::is_floating_point_v<T>)
        out.push_back(parse_double(token));
      else
        out.push_back(static_cast<T>(std::stol(token)));
    } catch (const std::exception&) {
      throw DataError("geo_meta '" + key + "' is not a numeric list: '" + text + "'");
    }
  }
  return out;
}

struct PageLayout {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t spp = 1;
  std::uint16_t bps = 1;
  std::uint16_t format = SAMPLEFORMAT_UINT;
  std::uint16_t planar = PLANARCONFIG_CONTIG;
};

inline PageLayout page_layout(TIFF* tif) {
  PageLayout p;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &p.width);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &p.height);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &p.spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &p.bps);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &p.format);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &p.planar);
  return p;
}

inline bool is_full_resolution_page(TIFF* tif) {
  std::uint32_t subfile = 0;
  if (!TIFFGetField(tif, TIFFTAG_SUBFILETYPE, &subfile)) return true;
  return (subfile & FILETYPE_REDUCEDIMAGE) == 0;
}

/// Decodes every sample plane of the current directory as type T.
template <class T>
std::vector<std::vector<T>> decode_planes(TIFF* tif, const PageLayout& p, const std::string& path) {
  const std::size_t w = p.width, h = p.height, spp = p.spp;
  std::vector<std::vector<T>> planes(spp, std::vector<T>(w * h));
  const bool separate = p.planar == PLANARCONFIG_SEPARATE;
  auto fail = [&](const char* what) {
    throw IoError(std::string(what) + " in '" + path + "'" +
                  (tiff_error_text.empty() ? std::string() : ": " + tiff_error_text));
  };

  if (TIFFIsTiled(tif)) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
    const std::size_t per_pixel = separate ? 1 : spp;
    std::vector<T> tile(static_cast<std::size_t>(tw) * th * per_pixel);
    const std::size_t sample_planes = separate ? spp : 1;
    for (std::size_t s = 0; s < sample_planes; ++s) {
      for (std::uint32_t ty = 0; ty < h; ty += th) {
        for (std::uint32_t tx = 0; tx < w; tx += tw) {
          if (TIFFReadTile(tif, tile.data(), tx, ty, 0, static_cast<std::uint16_t>(s)) < 0)
            fail("cannot decode tile");
          const std::size_t rows = std::min<std::size_t>(th, h - ty);
          const std::size_t cols = std::min<std::size_t>(tw, w - tx);
          for (std::size_t r = 0; r < rows; ++r) {
            const T* src = tile.data() + r * tw * per_pixel;
            const std::size_t dst_off = (ty + r) * w + tx;
            if (separate) {
              std::copy_n(src, cols, planes[s].data() + dst_off);
            } else {
              for (std::size_t c = 0; c < cols; ++c)
                for (std::size_t k = 0; k < spp; ++k) planes[k][dst_off + c] = src[c * spp + k];
            }
          }
        }
      }
    }
  } else {
    std::vector<T> line(static_cast<std::size_t>(TIFFScanlineSize64(tif)) / sizeof(T) + 1);
    if (separate) {
      for (std::size_t s = 0; s < spp; ++s)
        for (std::uint32_t y = 0; y < h; ++y) {
          if (TIFFReadScanline(tif, line.data(), y, static_cast<std::uint16_t>(s)) < 0)
            fail("cannot decode scanline");
          std::copy_n(line.data(), w, planes[s].data() + std::size_t{y} * w);
        }
    } else {
      for (std::uint32_t y = 0; y < h; ++y) {
        if (TIFFReadScanline(tif, line.data(), y, 0) < 0) fail("cannot decode scanline");
        for (std::size_t x = 0; x < w; ++x)
          for (std::size_t k = 0; k < spp; ++k) planes[k][std::size_t{y} * w + x] = line[x * spp + k];
      }
    }
  }
  return planes;
}

template <class T>
void append_int16_bands(TIFF* tif, const PageLayout& p, const std::string& path, std::vector<BandBuffer>& out) {
  for (auto& plane : decode_planes<T>(tif, p, path)) {
    std::vector<std::int16_t> band(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
      if constexpr (std::is_same_v<T, std::uint16_t>) {
        if (plane[i] > static_cast<std::uint16_t>(std::numeric_limits<std::int16_t>::max()))
          throw DataError("'" + path + "' holds unsigned 16-bit value " + std::to_string(plane[i]) +
                          " that does not fit the int16 DN domain");
      }
      band[i] = static_cast<std::int16_t>(plane[i]);
    }
    out.emplace_back(std::move(band));
  }
}

inline std::string sample_type_name(const PageLayout& p) {
  const char* kind = p.format == SAMPLEFORMAT_IEEEFP ? "float" : p.format == SAMPLEFORMAT_INT ? "int" : "uint";
  return std::string(kind) + std::to_string(p.bps);
}

inline void decode_page(TIFF* tif, const PageLayout& p, const std::string& path, std::vector<BandBuffer>& out) {
  if (p.format == SAMPLEFORMAT_IEEEFP && p.bps == 32) {
    for (auto& plane : decode_planes<float>(tif, p, path)) out.emplace_back(std::move(plane));
  } else if (p.format == SAMPLEFORMAT_INT && p.bps == 16) {
    for (auto& plane : decode_planes<std::int16_t>(tif, p, path)) out.emplace_back(std::move(plane));
  } else if (p.format == SAMPLEFORMAT_UINT && p.bps == 16) {
    append_int16_bands<std::uint16_t>(tif, p, path, out);
  } else if (p.format == SAMPLEFORMAT_UINT && p.bps == 8) {
    append_int16_bands<std::uint8_t>(tif, p, path, out);
  } else if (p.format == SAMPLEFORMAT_INT && p.bps == 8) {
    append_int16_bands<std::int8_t>(tif, p, path, out);
  } else {
    throw DataError("'" + path + "' uses unsupported sample type " + sample_type_name(p));
  }
}

}  // namespace detail

/// Reads header information of the first page without decoding samples.
inline RasterFileInfo probe_raster(const std::filesystem::path& path) {
  auto tif = detail::open_tiff(path, "r");
  const auto p = detail::page_layout(tif.get());
  RasterFileInfo info;
  info.width = p.width;
  info.height = p.height;
  info.bits_per_sample = p.bps;
  info.is_float = p.format == SAMPLEFORMAT_IEEEFP;
  info.is_signed = p.format == SAMPLEFORMAT_INT;
  do {
    if (detail::is_full_resolution_page(tif.get())) info.bands += detail::page_layout(tif.get()).spp;
  } while (TIFFReadDirectory(tif.get()));
  return info;
}

inline MultiBandRaster read_raster(const std::filesystem::path& path) {
  const std::string name = path.string();
  if (!std::filesystem::exists(path)) throw IoError("no such file: '" + name + "'");
  auto handle = detail::open_tiff(path, "r");
  TIFF* tif = handle.get();

  const auto first = detail::page_layout(tif);
  GeoMeta meta;
  std::optional<double> nodata;
  std::vector<std::string> band_names;

  for (const auto& t : detail::kPassthroughTags) {
    switch (t.kind) {
      case detail::TagKind::doubles:
        if (auto v = detail::get_array_tag<double>(tif, t.tag)) meta[t.key] = detail::join_numbers(*v);
        break;
      case detail::TagKind::shorts:
        if (auto v = detail::get_array_tag<std::uint16_t>(tif, t.tag)) meta[t.key] = detail::join_numbers(*v);
        break;
      case detail::TagKind::ascii:
        if (auto v = detail::get_ascii_tag(tif, t.tag)) meta[t.key] = *v;
        break;
    }
  }
  if (auto text = detail::get_ascii_tag(tif, detail::kTagGdalNodata)) {
    try {
      nodata = parse_double(*text);
    } catch (const std::exception&) {
      throw DataError("'" + name + "' has unparsable nodata tag '" + *text + "'");
    }
  }
  if (auto text = detail::get_ascii_tag(tif, detail::kTagPrivateMeta)) {
    auto j = nlohmann::json::parse(*text, nullptr, false);
    if (j.is_object()) {
      if (j.contains("band_names")) band_names = j["band_names"].get<std::vector<std::string>>();
      if (j.contains("meta"))
        for (auto& [k, v] : j["meta"].items()) meta[k] = v.get<std::string>();
    }
  }

  std::vector<BandBuffer> bands;
  bool first_page = true;
  do {
    if (!first_page && !detail::is_full_resolution_page(tif)) continue;
    const auto p = detail::page_layout(tif);
    if (p.width != first.width || p.height != first.height)
      throw DataError("'" + name + "' has bands of different dimensions (" + std::to_string(first.width) + "x" +
                      std::to_string(first.height) + " vs " + std::to_string(p.width) + "x" +
                      std::to_string(p.height) + ")");
    if (p.bps != first.bps || p.format != first.format)
      throw DataError("'" + name + "' mixes sample types across bands (" + detail::sample_type_name(first) +
                      " vs " + detail::sample_type_name(p) + ")");
    detail::decode_page(tif, p, name, bands);
    first_page = false;
  } while (TIFFReadDirectory(tif));

  if (band_names.size() != bands.size()) band_names.clear();
  return MultiBandRaster(first.width, first.height, std::move(bands), std::move(band_names), nodata,
                         std::move(meta));
}

inline void write_raster(const MultiBandRaster& raster, const std::filesystem::path& path,
                         SampleEncoding encoding,
                         TiffCompression compression = TiffCompression::none) {
  const std::size_t w = raster.width(), h = raster.height(), nb = raster.band_count();
  const bool to_int16 = encoding == SampleEncoding::int16_dn;

  // Validate before touching the file system.
  if (to_int16 && raster.encoding() == SampleEncoding::float32_reflectance) {
    for (std::size_t b = 0; b < nb; ++b) {
      for (float v : raster.band(b).float32()) {
        if (!(v >= -32768.0f && v <= 32767.0f))
          throw DataError("sample " + format_double(v) + " in band " + raster.band_name(b) +
                          " is outside the int16 range");
        if (v != std::trunc(v))
          throw DataError("sample " + format_double(v) + " in band " + raster.band_name(b) +
                          " is not an integer and cannot be stored as int16");
      }
    }
  }

  const std::size_t bytes = to_int16 ? 2 : 4;
  const bool big = w * h * nb * bytes > 0xF0000000ull;
  auto handle = detail::open_tiff(path, big ? "w8" : "w");
  TIFF* tif = handle.get();

  TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(w));
  TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(h));
  TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(nb));
  TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(bytes * 8));
  TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT, to_int16 ? SAMPLEFORMAT_INT : SAMPLEFORMAT_IEEEFP);
  TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_SEPARATE);
  TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif, TIFFTAG_COMPRESSION,
               compression == TiffCompression::deflate ? COMPRESSION_ADOBE_DEFLATE : COMPRESSION_NONE);
  const std::size_t rows_per_strip = std::max<std::size_t>(1, 65536 / (w * bytes));
  TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(std::min(rows_per_strip, h)));
  if (nb > 1) {
    std::vector<std::uint16_t> extra(nb - 1, EXTRASAMPLE_UNSPECIFIED);
    TIFFSetField(tif, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()), extra.data());
  }

  nlohmann::json private_meta;
  private_meta["band_names"] = raster.band_names();
  private_meta["meta"] = nlohmann::json::object();
  for (const auto& [key, value] : raster.geo_meta()) {
    auto it = std::find_if(detail::kPassthroughTags.begin(), detail::kPassthroughTags.end(),
                           [&](const auto& t) { return key == t.key; });
    if (it == detail::kPassthroughTags.end()) {
      private_meta["meta"][key] = value;
      continue;
    }
    switch (it->kind) {
      case detail::TagKind::doubles: {
        auto v = detail::split_numbers<double>(value, key);
        TIFFSetField(tif, it->tag, static_cast<std::uint32_t>(v.size()), v.data());
        break;
      }
      case detail::TagKind::shorts: {
        auto v = detail::split_numbers<std::uint16_t>(value, key);
        TIFFSetField(tif, it->tag, static_cast<std::uint32_t>(v.size()), v.data());
        break;
      }
      case detail::TagKind::ascii:
        TIFFSetField(tif, it->tag, value.c_str());
        break;
    }
  }
  if (raster.nodata()) TIFFSetField(tif, detail::kTagGdalNodata, format_double(*raster.nodata()).c_str());
  const std::string private_text = private_meta.dump();
  TIFFSetField(tif, detail::kTagPrivateMeta, private_text.c_str());

  auto fail = [&](const char* what) {
    throw IoError(std::string(what) + " '" + path.string() + "'" +
                  (detail::tiff_error_text.empty() ? std::string() : ": " + detail::tiff_error_text));
  };

  std::vector<std::int16_t> line16(to_int16 ? w : 0);
  std::vector<float> line32(to_int16 ? 0 : w);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& band = raster.band(b);
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t off = y * w;
      void* data = nullptr;
      band.visit([&](const auto& v) {
        if (to_int16) {
          for (std::size_t x = 0; x < w; ++x) line16[x] = static_cast<std::int16_t>(v[off + x]);
          data = line16.data();
        } else {
          for (std::size_t x = 0; x < w; ++x) line32[x] = static_cast<float>(v[off + x]);
          data = line32.data();
        }
      });
      if (TIFFWriteScanline(tif, data, static_cast<std::uint32_t>(y), static_cast<std::uint16_t>(b)) < 0)
        fail("cannot write scanline to");
    }
  }
  if (!TIFFFlush(tif)) fail("cannot finalize");
}

/// Byte value of v under the clamp window [low, high]; ties round away from zero.
inline std::uint8_t clamp_to_byte(double v, double low, double high) {
  const double t = std::clamp((v - low) / (high - low), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::round(255.0 * t));
}

/// Writes three bands as an 8-bit RGB PNG. Nodata pixels become 0.
inline void export_png(const MultiBandRaster& raster, std::array<std::size_t, 3> band_selection,
                       std::pair<double, double> clamp_range, const std::filesystem::path& path) {
  const auto [low, high] = clamp_range;
  if (!(low < high)) throw DomainError("PNG clamp range must satisfy low < high");
  for (auto b : band_selection)
    if (b >= raster.band_count())
      throw DataError("PNG band index " + std::to_string(b) + " out of range (raster has " +
                      std::to_string(raster.band_count()) + " bands)");

  const std::size_t n = raster.pixel_count();
  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t c = 0; c < 3; ++c) {
    raster.band(band_selection[c]).visit([&](const auto& v) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = v[i];
        rgb[i * 3 + c] = raster.is_nodata(x) ? 0 : clamp_to_byte(x, low, high);
      }
    });
  }

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width());
  image.height = static_cast<png_uint_32>(raster.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG '" + path.string() + "': " + msg);
  }
}

/// Decoded 8-bit RGB image.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  ///< interleaved RGB, row-major
};

inline RgbImage read_png_rgb(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  RgbImage out{image.width, image.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

}  // namespace hlsalign
