#pragma once

// Digital number -> spectral radiance -> top-of-atmosphere reflectance ->
// surface reflectance. All arithmetic runs in double; rasters are stored as
// float32.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlsalign/error.hpp"
#include "hlsalign/raster.hpp"

namespace hlsalign {

/// Calibration and atmosphere terms of one band.
struct BandRadiometry {
  double gain = 1.0;                ///< W m^-2 sr^-1 um^-1 per DN
  double bias = 0.0;                ///< W m^-2 sr^-1 um^-1
  double esun = std::numbers::pi;   ///< exoatmospheric irradiance, W m^-2 um^-1
  double path_reflectance = 0.0;
  double transmittance_sun = 1.0;   ///< (0, 1]
  double transmittance_view = 1.0;  ///< (0, 1]
};

/// Scene constants plus per-band terms, band order matching the raster.
struct RadiometricParams {
  std::vector<BandRadiometry> bands;
  double earth_sun_distance = 1.0;  ///< astronomical units
  double solar_zenith = 0.0;        ///< radians
};

namespace radiometry {

inline double radiance(double dn, const BandRadiometry& p) { return p.gain * dn + p.bias; }

inline double toa_reflectance(double radiance, double earth_sun_distance, double esun, double cos_zenith) {
  return std::numbers::pi * radiance * earth_sun_distance * earth_sun_distance / (esun * cos_zenith);
}

inline double surface_reflectance(double toa, const BandRadiometry& p) {
  return (toa - p.path_reflectance) / (p.transmittance_sun * p.transmittance_view);
}

/// Full chain for one sample, evaluated in the same order as the staged ops.
inline double dn_to_surface(double dn, const BandRadiometry& p, double earth_sun_distance, double cos_zenith) {
  return surface_reflectance(toa_reflectance(radiance(dn, p), earth_sun_distance, p.esun, cos_zenith), p);
}

/// Analytic inverse of radiance().
inline double dn_from_radiance(double radiance, const BandRadiometry& p) { return (radiance - p.bias) / p.gain; }

}  // namespace radiometry

namespace detail {

inline void check_band_count(const MultiBandRaster& raster, const RadiometricParams& params) {
  if (params.bands.size() != raster.band_count())
    throw DataError("radiometric parameters cover " + std::to_string(params.bands.size()) +
                    " bands but raster has " + std::to_string(raster.band_count()));
}

inline double checked_cos_zenith(const RadiometricParams& params) {
  const double theta = params.solar_zenith;
  if (!(theta >= 0.0 && theta < std::numbers::pi / 2) || !(std::cos(theta) > 0.0))
    throw DomainError("solar zenith " + std::to_string(theta) + " rad puts the sun at or below the horizon");
  if (!(params.earth_sun_distance > 0.0)) throw DomainError("Earth-Sun distance must be positive");
  for (const auto& b : params.bands)
    if (!(b.esun > 0.0)) throw DomainError("solar irradiance must be positive in every band");
  return std::cos(theta);
}

inline void check_transmittance(const RadiometricParams& params) {
  for (const auto& b : params.bands) {
    if (!(b.transmittance_sun * b.transmittance_view > 0.0))
      throw DomainError("transmittance product must be positive");
    if (b.transmittance_sun > 1.0 || b.transmittance_view > 1.0)
      throw DomainError("transmittance must lie in (0, 1]");
  }
}

}  // namespace detail

inline MultiBandRaster dn_to_radiance(const MultiBandRaster& raster, const RadiometricParams& params) {
  if (raster.encoding() != SampleEncoding::int16_dn) throw DataError("dn_to_radiance expects int16 DN input");
  detail::check_band_count(raster, params);
  return map_samples(raster, [&](std::size_t b, double dn) { return radiometry::radiance(dn, params.bands[b]); });
}

inline MultiBandRaster radiance_to_toa(const MultiBandRaster& raster, const RadiometricParams& params) {
  detail::check_band_count(raster, params);
  const double cos_zenith = detail::checked_cos_zenith(params);
  const double d = params.earth_sun_distance;
  return map_samples(raster, [&](std::size_t b, double l) {
    return radiometry::toa_reflectance(l, d, params.bands[b].esun, cos_zenith);
  });
}

inline MultiBandRaster toa_to_surface(const MultiBandRaster& raster, const RadiometricParams& params) {
  detail::check_band_count(raster, params);
  detail::check_transmittance(params);
  return map_samples(raster,
                     [&](std::size_t b, double toa) { return radiometry::surface_reflectance(toa, params.bands[b]); });
}

/// Single pass through all three stages; intermediates stay in double.
inline MultiBandRaster dn_to_surface(const MultiBandRaster& raster, const RadiometricParams& params) {
  if (raster.encoding() != SampleEncoding::int16_dn) throw DataError("dn_to_surface expects int16 DN input");
  detail::check_band_count(raster, params);
  const double cos_zenith = detail::checked_cos_zenith(params);
  detail::check_transmittance(params);
  const double d = params.earth_sun_distance;
  return map_samples(raster, [&](std::size_t b, double dn) {
    return radiometry::dn_to_surface(dn, params.bands[b], d, cos_zenith);
  });
}

/// Parses a parameter file:
///
///   { "earth_sun_distance": 1.0147,
///     "solar_zenith_deg": 32.5,            // or "solar_zenith_rad"
///     "bands": { "Red": { "gain": 2e-5, "bias": -0.1, "esun": 1536,
///                         "path_reflectance": 0.02,
///                         "transmittance_sun": 0.9, "transmittance_view": 0.95 }, ... } }
///
/// Bands are looked up by the raster's band names. Atmosphere terms default
/// to (0, 1, 1), which yields plain TOA reflectance.
inline RadiometricParams parse_radiometric_params(const nlohmann::json& j,
                                                  const std::vector<std::string>& band_names) {
  std::vector<std::string> problems;
  RadiometricParams p;
  p.earth_sun_distance = j.value("earth_sun_distance", 1.0);
  if (j.contains("solar_zenith_rad") && j.contains("solar_zenith_deg"))
    problems.push_back("give only one of solar_zenith_rad and solar_zenith_deg");
  if (j.contains("solar_zenith_rad"))
    p.solar_zenith = j["solar_zenith_rad"].get<double>();
  else if (j.contains("solar_zenith_deg"))
    p.solar_zenith = j["solar_zenith_deg"].get<double>() * std::numbers::pi / 180.0;
  else
    problems.push_back("missing solar_zenith_deg or solar_zenith_rad");

  if (!j.contains("bands") || !j["bands"].is_object()) {
    problems.push_back("missing 'bands' object keyed by band name");
    throw ConfigError(problems);
  }
  const auto& bands = j["bands"];
  for (const auto& name : band_names) {
    if (!bands.contains(name)) {
      problems.push_back("no parameters for band '" + name + "'");
      continue;
    }
    const auto& e = bands[name];
    BandRadiometry b;
    if (!e.contains("gain") || !e.contains("esun"))
      problems.push_back("band '" + name + "' needs at least gain and esun");
    b.gain = e.value("gain", 1.0);
    b.bias = e.value("bias", 0.0);
    b.esun = e.value("esun", std::numbers::pi);
    b.path_reflectance = e.value("path_reflectance", 0.0);
    b.transmittance_sun = e.value("transmittance_sun", 1.0);
    b.transmittance_view = e.value("transmittance_view", 1.0);
    p.bands.push_back(b);
  }
  if (!problems.empty()) throw ConfigError(problems);
  return p;
}

/// `zenith_deg` replaces whatever solar zenith the file gives.
inline RadiometricParams load_radiometric_params(const std::filesystem::path& path,
                                                 const std::vector<std::string>& band_names,
                                                 std::optional<double> zenith_deg = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open radiometric parameter file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("radiometric parameter file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (zenith_deg && j.is_object()) {
    j.erase("solar_zenith_rad");
    j["solar_zenith_deg"] = *zenith_deg;
  }
  try {
    return parse_radiometric_params(j, band_names);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("radiometric parameter file '" + path.string() + "': " + e.what());
  }
}

}  // namespace hlsalign
