#pragma once

// Spectral alignment of a source raster to a reference raster.
//
// Histogram matching remaps each band independently through the reference's
// quantile function. Feature distribution matching fits one affine map in
// c-dimensional pixel space, y = A (x - mu_s) + mu_t, with A Sigma_s A^T =
// Sigma_t, so the output carries the reference mean and covariance while
// every pixel keeps its place.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlsalign/error.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster.hpp"

namespace hlsalign {

// ---------------------------------------------------------------------------
// Histogram matching

namespace detail {

/// Output of one band: every valid source sample replaced by the reference
/// quantile at its average-rank source quantile.
inline std::vector<float> match_band(const MultiBandRaster& source, const MultiBandRaster& reference,
                                     std::size_t b) {
  const std::size_t n = source.pixel_count();
  std::vector<double> src = band_values(source, b);

  std::vector<double> ref;
  ref.reserve(reference.pixel_count());
  reference.band(b).visit([&](const auto& v) {
    for (auto x : v)
      if (!reference.is_nodata(x)) ref.push_back(static_cast<double>(x));
  });

  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!source.is_nodata(src[i])) order.push_back(i);

  const std::size_t ns = order.size(), nr = ref.size();
  if (ns < 2 || nr < 2)
    throw DataError("histogram matching needs at least 2 valid samples per band (band " + source.band_name(b) +
                    ": source " + std::to_string(ns) + ", reference " + std::to_string(nr) + ")");

  std::sort(ref.begin(), ref.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return src[a] < src[c]; });

  const float nodata_out = source.nodata() ? static_cast<float>(*source.nodata()) : 0.0f;
  std::vector<float> out(n, nodata_out);
  const double ref_span = static_cast<double>(nr - 1);
  const double src_span = static_cast<double>(ns - 1);

  for (std::size_t i = 0; i < ns;) {
    std::size_t j = i + 1;
    while (j < ns && src[order[j]] == src[order[i]]) ++j;
    // Average 0-based rank of the tie group [i, j).
    const double rank = 0.5 * static_cast<double>(i + j - 1);
    // Equal sizes give pos == rank exactly, so tie-free inputs copy reference
    // samples without interpolation error.
    const double pos = rank * ref_span / src_span;
    const auto lo = static_cast<std::size_t>(pos);
    double value;
    if (lo >= nr - 1) {
      value = ref.back();
    } else {
      const double frac = pos - static_cast<double>(lo);
      value = frac == 0.0 ? ref[lo] : ref[lo] + frac * (ref[lo + 1] - ref[lo]);
    }
    for (std::size_t k = i; k < j; ++k) out[order[k]] = static_cast<float>(value);
    i = j;
  }
  return out;
}

}  // namespace detail

inline MultiBandRaster histogram_match(const MultiBandRaster& source, const MultiBandRaster& reference) {
  if (source.band_count() != reference.band_count())
    throw DataError("histogram matching needs equal band counts (source " + std::to_string(source.band_count()) +
                    ", reference " + std::to_string(reference.band_count()) + ")");
  std::vector<std::vector<float>> bands(source.band_count());
  parallel_for(source.band_count(), [&](std::size_t b) { bands[b] = detail::match_band(source, reference, b); });
  return make_float_raster(source.width(), source.height(), std::move(bands), source.band_names(), source.nodata(),
                           source.geo_meta());
}

// ---------------------------------------------------------------------------
// Feature distribution matching

/// How A is factored out of the two covariances. Both satisfy
/// A Sigma_s A^T = Sigma_t.
enum class FdmFactorization {
  /// A = S^-1/2 (S^1/2 T S^1/2)^1/2 S^-1/2, the unique symmetric positive
  /// definite solution. Exactly undoes positive per-band gains even when
  /// bands are correlated.
  transport,
  /// A = T^1/2 S^-1/2 with symmetric matrix roots.
  symmetric_root,
};

inline std::string_view to_string(FdmFactorization f) {
  return f == FdmFactorization::transport ? "transport" : "symmetric_root";
}

inline FdmFactorization parse_fdm_factorization(std::string_view s) {
  if (s == "transport") return FdmFactorization::transport;
  if (s == "symmetric_root") return FdmFactorization::symmetric_root;
  throw ConfigError("unknown FDM factorization '" + std::string(s) + "'");
}

/// Per-band mean and population covariance of the valid pixels. A pixel is
/// valid when none of its bands holds nodata.
struct PixelMoments {
  std::uint64_t count = 0;
  std::vector<double> mean;
  std::vector<double> covariance;  ///< row-major c x c
};

namespace detail {

inline std::vector<std::uint8_t> valid_pixel_mask(const MultiBandRaster& r) {
  std::vector<std::uint8_t> mask(r.pixel_count(), 1);
  if (!r.nodata()) return mask;
  for (const auto& band : r.bands())
    band.visit([&](const auto& v) {
      for (std::size_t i = 0; i < v.size(); ++i)
        if (r.is_nodata(v[i])) mask[i] = 0;
    });
  return mask;
}

}  // namespace detail

inline PixelMoments pixel_moments(const MultiBandRaster& r) {
  const std::size_t c = r.band_count(), n = r.pixel_count();
  const auto mask = detail::valid_pixel_mask(r);
  std::vector<std::vector<double>> x(c);
  for (std::size_t b = 0; b < c; ++b) x[b] = band_values(r, b);

  constexpr std::size_t kChunk = 1 << 14;
  const std::size_t chunks = chunk_count(n, kChunk);

  // Pass 1: sums per chunk, merged in chunk order.
  std::vector<std::vector<double>> sums(chunks, std::vector<double>(c, 0.0));
  std::vector<std::uint64_t> counts(chunks, 0);
  parallel_for(chunks, [&](std::size_t k) {
    const std::size_t end = std::min(n, (k + 1) * kChunk);
    for (std::size_t i = k * kChunk; i < end; ++i) {
      if (!mask[i]) continue;
      ++counts[k];
      for (std::size_t b = 0; b < c; ++b) sums[k][b] += x[b][i];
    }
  });
  PixelMoments m;
  m.mean.assign(c, 0.0);
  for (std::size_t k = 0; k < chunks; ++k) {
    m.count += counts[k];
    for (std::size_t b = 0; b < c; ++b) m.mean[b] += sums[k][b];
  }
  if (m.count == 0) throw DataError("no valid pixels");
  for (auto& v : m.mean) v /= static_cast<double>(m.count);

  // Pass 2: centered cross products.
  std::vector<std::vector<double>> cross(chunks, std::vector<double>(c * c, 0.0));
  parallel_for(chunks, [&](std::size_t k) {
    const std::size_t end = std::min(n, (k + 1) * kChunk);
    std::vector<double> d(c);
    for (std::size_t i = k * kChunk; i < end; ++i) {
      if (!mask[i]) continue;
      for (std::size_t b = 0; b < c; ++b) d[b] = x[b][i] - m.mean[b];
      for (std::size_t p = 0; p < c; ++p)
        for (std::size_t q = p; q < c; ++q) cross[k][p * c + q] += d[p] * d[q];
    }
  });
  m.covariance.assign(c * c, 0.0);
  for (std::size_t k = 0; k < chunks; ++k)
    for (std::size_t e = 0; e < c * c; ++e) m.covariance[e] += cross[k][e];
  for (std::size_t p = 0; p < c; ++p)
    for (std::size_t q = p; q < c; ++q) {
      const double v = m.covariance[p * c + q] / static_cast<double>(m.count);
      m.covariance[p * c + q] = v;
      m.covariance[q * c + p] = v;
    }
  return m;
}

struct FitDiagnostics {
  std::vector<double> source_covariance;  ///< row-major
  std::vector<double> target_covariance;  ///< row-major
  std::size_t eigenvalue_floors = 0;
  std::uint64_t source_pixels = 0;
  std::uint64_t target_pixels = 0;
};

/// Fitted y = A (x - source_mean) + target_mean.
struct AlignmentTransform {
  std::vector<double> source_mean;
  std::vector<double> target_mean;
  std::vector<double> matrix;  ///< row-major c x c
  double regularization_epsilon = 0.0;
  FdmFactorization factorization = FdmFactorization::transport;
  FitDiagnostics diagnostics;

  std::size_t dimension() const noexcept { return source_mean.size(); }

  static AlignmentTransform identity(std::size_t c) {
    AlignmentTransform t;
    t.source_mean.assign(c, 0.0);
    t.target_mean.assign(c, 0.0);
    t.matrix.assign(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) t.matrix[i * c + i] = 1.0;
    return t;
  }
};

namespace detail {

using Mat = Eigen::MatrixXd;

inline Mat to_matrix(const std::vector<double>& rm, std::size_t c) {
  Mat m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rm[i * c + j];
  return m;
}

inline std::vector<double> to_row_major(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

/// Symmetric PSD power via eigendecomposition with eigenvalues floored at
/// epsilon. Returns the number of eigenvalues raised to the floor.
inline std::size_t symmetric_power(const Mat& sym, double power, double epsilon, Mat& out) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (sym + sym.transpose()));
  if (solver.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  Eigen::VectorXd lambda = solver.eigenvalues();
  std::size_t floors = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < epsilon) {
      lambda(i) = epsilon;
      ++floors;
    }
    lambda(i) = std::pow(lambda(i), power);
  }
  out = solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().transpose();
  return floors;
}

inline double eigen_floor(const Mat& m) { return 1e-8 * m.trace() / static_cast<double>(m.rows()); }

}  // namespace detail

/// Fits the FDM transform carrying `source` moments onto `reference`
/// moments. Eigenvalues are floored at 1e-8 * trace / c before roots and
/// inverses; the count of floored eigenvalues lands in the diagnostics.
inline AlignmentTransform fit_fdm(const MultiBandRaster& source, const MultiBandRaster& reference,
                                  FdmFactorization factorization = FdmFactorization::transport) {
  const std::size_t c = source.band_count();
  if (reference.band_count() != c)
    throw DataError("FDM needs equal band counts (source " + std::to_string(c) + ", reference " +
                    std::to_string(reference.band_count()) + ")");
  const PixelMoments ms = pixel_moments(source);
  const PixelMoments mt = pixel_moments(reference);
  if (ms.count < c + 1 || mt.count < c + 1)
    throw DataError("FDM needs at least " + std::to_string(c + 1) + " valid pixels in each image");
  for (double v : ms.covariance)
    if (!std::isfinite(v)) throw DataError("source covariance is not finite");
  for (double v : mt.covariance)
    if (!std::isfinite(v)) throw DataError("reference covariance is not finite");

  const detail::Mat sigma_s = detail::to_matrix(ms.covariance, c);
  const detail::Mat sigma_t = detail::to_matrix(mt.covariance, c);

  // A zero-trace source has no spread to invert; any positive floor works
  // because every centered source vector is zero.
  double eps_s = detail::eigen_floor(sigma_s);
  if (!(eps_s > 0.0)) eps_s = 1.0;

  detail::Mat s_inv_half;
  std::size_t floors = detail::symmetric_power(sigma_s, -0.5, eps_s, s_inv_half);
  detail::Mat a;
  if (factorization == FdmFactorization::transport) {
    detail::Mat s_half;
    detail::symmetric_power(sigma_s, 0.5, eps_s, s_half);
    const detail::Mat middle = s_half * sigma_t * s_half;
    detail::Mat middle_half;
    floors += detail::symmetric_power(middle, 0.5, std::max(0.0, detail::eigen_floor(middle)), middle_half);
    a = s_inv_half * middle_half * s_inv_half;
  } else {
    detail::Mat t_half;
    floors += detail::symmetric_power(sigma_t, 0.5, std::max(0.0, detail::eigen_floor(sigma_t)), t_half);
    a = t_half * s_inv_half;
  }
  if (!a.allFinite()) throw DataError("FDM transform is not finite");

  AlignmentTransform t;
  t.source_mean = ms.mean;
  t.target_mean = mt.mean;
  t.matrix = detail::to_row_major(a);
  t.regularization_epsilon = eps_s;
  t.factorization = factorization;
  t.diagnostics.source_covariance = ms.covariance;
  t.diagnostics.target_covariance = mt.covariance;
  t.diagnostics.eigenvalue_floors = floors;
  t.diagnostics.source_pixels = ms.count;
  t.diagnostics.target_pixels = mt.count;
  return t;
}

/// y = A (x - source_mean) + target_mean per pixel. A pixel with nodata in any
/// band becomes nodata in every band.
inline MultiBandRaster apply_fdm(const MultiBandRaster& raster, const AlignmentTransform& t) {
  const std::size_t c = t.dimension();
  if (raster.band_count() != c || t.matrix.size() != c * c || t.target_mean.size() != c)
    throw DataError("transform dimension " + std::to_string(c) + " does not match raster with " +
                    std::to_string(raster.band_count()) + " bands");
  const std::size_t n = raster.pixel_count();
  const auto mask = detail::valid_pixel_mask(raster);
  std::vector<std::vector<double>> x(c);
  for (std::size_t b = 0; b < c; ++b) x[b] = band_values(raster, b);

  const float nodata_out = raster.nodata() ? static_cast<float>(*raster.nodata()) : 0.0f;
  std::vector<std::vector<float>> out(c, std::vector<float>(n, nodata_out));
  constexpr std::size_t kChunk = 1 << 14;
  parallel_for(chunk_count(n, kChunk), [&](std::size_t k) {
    const std::size_t end = std::min(n, (k + 1) * kChunk);
    std::vector<double> d(c);
    for (std::size_t i = k * kChunk; i < end; ++i) {
      if (!mask[i]) continue;
      for (std::size_t b = 0; b < c; ++b) d[b] = x[b][i] - t.source_mean[b];
      for (std::size_t p = 0; p < c; ++p) {
        double y = 0.0;
        for (std::size_t q = 0; q < c; ++q) y += t.matrix[p * c + q] * d[q];
        out[p][i] = static_cast<float>(y + t.target_mean[p]);
      }
    }
  });
  return make_float_raster(raster.width(), raster.height(), std::move(out), raster.band_names(), raster.nodata(),
                           raster.geo_meta());
}

// ---------------------------------------------------------------------------

enum class AlignMethod { none, hm, fdm };

inline AlignMethod parse_align_method(std::string_view s) {
  if (s == "none") return AlignMethod::none;
  if (s == "hm") return AlignMethod::hm;
  if (s == "fdm") return AlignMethod::fdm;
  throw ConfigError("unknown alignment method '" + std::string(s) + "' (expected none, hm or fdm)");
}

inline std::string_view to_string(AlignMethod m) {
  switch (m) {
    case AlignMethod::none: return "none";
    case AlignMethod::hm: return "hm";
    case AlignMethod::fdm: return "fdm";
  }
  return "none";
}

/// Aligns `source` to `reference` with the chosen method; `none` returns the
/// source re-encoded as float32.
inline MultiBandRaster align(const MultiBandRaster& source, const MultiBandRaster& reference, AlignMethod method) {
  switch (method) {
    case AlignMethod::hm: return histogram_match(source, reference);
    case AlignMethod::fdm: return apply_fdm(source, fit_fdm(source, reference));
    case AlignMethod::none: break;
  }
  return to_float32(source);
}

inline void to_json(nlohmann::json& j, const AlignmentTransform& t) {
  j = nlohmann::json{{"dimension", t.dimension()},
                     {"source_mean", t.source_mean},
                     {"target_mean", t.target_mean},
                     {"matrix", t.matrix},
                     {"regularization_epsilon", t.regularization_epsilon},
                     {"factorization", to_string(t.factorization)},
                     {"diagnostics",
                      {{"source_covariance", t.diagnostics.source_covariance},
                       {"target_covariance", t.diagnostics.target_covariance},
                       {"eigenvalue_floors", t.diagnostics.eigenvalue_floors},
                       {"source_pixels", t.diagnostics.source_pixels},
                       {"target_pixels", t.diagnostics.target_pixels}}}};
}

inline void from_json(const nlohmann::json& j, AlignmentTransform& t) {
  j.at("source_mean").get_to(t.source_mean);
  j.at("target_mean").get_to(t.target_mean);
  j.at("matrix").get_to(t.matrix);
  t.regularization_epsilon = j.value("regularization_epsilon", 0.0);
  t.factorization = parse_fdm_factorization(j.value("factorization", std::string("transport")));
  const std::size_t c = t.source_mean.size();
  if (t.target_mean.size() != c || t.matrix.size() != c * c)
    throw DataError("transform JSON has inconsistent dimensions");
  if (j.contains("diagnostics")) {
    const auto& d = j["diagnostics"];
    t.diagnostics.source_covariance = d.value("source_covariance", std::vector<double>{});
    t.diagnostics.target_covariance = d.value("target_covariance", std::vector<double>{});
    t.diagnostics.eigenvalue_floors = d.value("eigenvalue_floors", std::size_t{0});
    t.diagnostics.source_pixels = d.value("source_pixels", std::uint64_t{0});
    t.diagnostics.target_pixels = d.value("target_pixels", std::uint64_t{0});
  }
}

}  // namespace hlsalign
