// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hlsalign/hlsalign.hpp"
#include "../test_support.hpp"

using namespace hlsalign;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testsupport::read_file(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome tiling_parity() {
  TempDir tmp;
  std::vector<std::vector<float>> six(6, std::vector<float>(3660u * 3660u));
  for (std::size_t b = 0; b < 6; ++b)
    for (std::size_t i = 0; i < six[b].size(); ++i) six[b][i] = static_cast<float>((i * 7 + b * 13) % 1000) * 1e-3f;
  write_raster(make_float_raster(3660, 3660, std::move(six)), tmp / "l30.tif", SampleEncoding::float32_reflectance);

  auto t0 = Clock::now();
  TileArgs a;
  a.input = tmp / "l30.tif";
  a.patch_size = 128;
  a.out_dir = tmp / "lr";
  const auto lr = cmd_tile(a);
  const double t_lr = seconds_since(t0);

  {
    std::vector<std::int16_t> dn(10980u * 10980u);
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = static_cast<std::int16_t>(i % 9973);
    write_raster(make_int16_raster(10980, 10980, {std::move(dn)}), tmp / "s10.tif", SampleEncoding::int16_dn);
  }
  t0 = Clock::now();
  a.input = tmp / "s10.tif";
  a.patch_size = 384;
  a.out_dir = tmp / "hr";
  const auto hr = cmd_tile(a);
  const double t_hr = seconds_since(t0);

  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(tmp / "lr")) files += e.path().extension() == ".tif";
  const bool ok = lr.patches.size() == 784 && lr.grid.rows == 28 && lr.grid.cols == 28 && files == 784 &&
                  hr.grid == PatchGrid{384, 28, 28, 228, 228} && hr.patches.size() == 784 &&
                  lr.grid.rows == hr.grid.rows && lr.grid.cols == hr.grid.cols && t_lr < 30 && t_hr < 30;
  return {ok, fmt("lr %zux%zu=%zu patches (%zu files) in %.1fs; hr %zux%zu=%zu in %.1fs", lr.grid.rows,
                  lr.grid.cols, lr.patches.size(), files, t_lr, hr.grid.rows, hr.grid.cols, hr.patches.size(), t_hr)};
}

Outcome radiometry_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dn(-2000, 16000);
  std::uniform_real_distribution<double> gain(1e-5, 0.02), bias(-2.0, 2.0), esun(900, 2100), dist(0.983, 1.017),
      zen(0.0, 1.4), path(0.0, 0.1), trans(0.6, 1.0);
  double worst = 0;
  bool raster_exact = true;
  for (int k = 0; k < 1000; ++k) {
    const BandRadiometry b{gain(rng), bias(rng), esun(rng), path(rng), trans(rng), trans(rng)};
    const double d = dist(rng), theta = zen(rng);
    const int v = dn(rng);
    // Sequential hand evaluation: radiance, TOA, surface.
    const double l = b.gain * v + b.bias;
    const double toa = std::numbers::pi * l * d * d / (b.esun * std::cos(theta));
    const double expect = (toa - b.path_reflectance) / (b.transmittance_sun * b.transmittance_view);
    const double got = radiometry::dn_to_surface(v, b, d, std::cos(theta));
    worst = std::max(worst, std::abs(got - expect) / std::max(std::abs(expect), 1e-300));

    const auto r = dn_to_surface(make_int16_raster(1, 1, {{static_cast<std::int16_t>(v)}}), RadiometricParams{{b}, d, theta});
    raster_exact = raster_exact && r.band(0).float32()[0] == static_cast<float>(got);
  }
  const double one = radiometry::dn_to_surface(1.0, BandRadiometry{}, 1.0, std::cos(0.0));
  const float one_raster = dn_to_surface(make_int16_raster(1, 1, {{1}}), RadiometricParams{{BandRadiometry{}}, 1.0, 0.0})
                               .band(0)
                               .float32()[0];
  const bool ok = worst <= 1e-9 && one == 1.0 && one_raster == 1.0f && raster_exact;
  return {ok, fmt("max relative error %.3g over 1000 tuples; identity chain %.17g; float32 raster == rounded chain: %s",
                  worst, one, raster_exact ? "yes" : "no")};
}

Outcome hm_exactness() {
  bool sorted_equal = true;
  for (std::uint32_t seed = 1; seed <= 10; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> step(1e-4, 2e-3);
    std::vector<std::vector<float>> s(3, std::vector<float>(64 * 48)), r = s;
    // Strictly increasing random walk, then shuffled: tie-free by construction.
    for (auto* set : {&s, &r})
      for (auto& band : *set) {
        double x = -1.0;
        for (auto& v : band) v = static_cast<float>(x += step(rng));
        if (std::adjacent_find(band.begin(), band.end()) != band.end()) return {false, "fixture has ties"};
        std::shuffle(band.begin(), band.end(), rng);
      }
    const auto out = histogram_match(make_float_raster(64, 48, s), make_float_raster(64, 48, r));
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<float> o(out.band(b).float32().begin(), out.band(b).float32().end()), ref = r[b];
      std::sort(o.begin(), o.end());
      std::sort(ref.begin(), ref.end());
      sorted_equal = sorted_equal && o == ref;
    }
  }
  std::size_t monotone = 0;
  for (std::uint32_t seed = 100; seed < 200; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(3, 40);
    std::uniform_int_distribution<int> level(0, 50);
    const std::size_t sw = dim(rng), sh = dim(rng), rw = dim(rng), rh = dim(rng);
    std::vector<float> s(sw * sh), r(rw * rh);
    for (auto& v : s) v = static_cast<float>(level(rng)) * 0.1f;  // ties included
    std::normal_distribution<float> g(5.0f, 2.0f);
    for (auto& v : r) v = g(rng);
    const auto out = histogram_match(make_float_raster(sw, sh, {s}), make_float_raster(rw, rh, {r}));
    const auto o = out.band(0).float32();
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if ((s[i] < s[j] && o[i] > o[j]) || (s[i] == s[j] && o[i] != o[j])) {
          ok = false;
          break;
        }
    monotone += ok;
  }
  return {sorted_equal && monotone == 100,
          fmt("sorted output == sorted reference on 10x3 bands: %s; monotone in %zu/100 cases",
              sorted_equal ? "yes" : "no", monotone)};
}

Outcome fdm_moments() {
  double worst_mean = 0, worst_cov = 0;
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto gaussian = [&](std::size_t w, std::size_t h, const Eigen::Matrix3d& l, const Eigen::Vector3d& mu) {
      std::vector<std::vector<float>> b(3, std::vector<float>(w * h));
      for (std::size_t i = 0; i < w * h; ++i) {
        const Eigen::Vector3d x = mu + l * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
        for (int k = 0; k < 3; ++k) b[k][i] = static_cast<float>(x(k));
      }
      return make_float_raster(w, h, std::move(b));
    };
    Eigen::Matrix3d ls, lt;
    ls << 0.05, 0, 0, 0.03, 0.04, 0, -0.01, 0.02, 0.06;
    lt << 0.08, 0, 0, -0.02, 0.05, 0, 0.04, 0.01, 0.03;
    const auto src = gaussian(128, 96, ls * (1 + 0.1 * seed), {0.2, 0.3, 0.25});
    const auto tgt = gaussian(120, 100, lt, {0.35, 0.1 + 0.02 * seed, 0.4});
    const auto out = apply_fdm(src, fit_fdm(src, tgt));
    const auto mo = pixel_moments(out), mt = pixel_moments(tgt);
    double dm = 0, nm = 0, dc = 0, nc = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      dm += std::pow(mo.mean[b] - mt.mean[b], 2);
      nm += mt.mean[b] * mt.mean[b];
    }
    for (std::size_t e = 0; e < 9; ++e) {
      dc += std::pow(mo.covariance[e] - mt.covariance[e], 2);
      nc += mt.covariance[e] * mt.covariance[e];
    }
    worst_mean = std::max(worst_mean, std::sqrt(dm / nm));
    worst_cov = std::max(worst_cov, std::sqrt(dc / nc));
  }
  // Scalar case against directly computed standard deviations.
  const auto s = testsupport::random_float_raster(150, 80, 1, 3, 0.1, 0.4);
  const auto t = testsupport::random_float_raster(90, 90, 1, 4, -1.0, 2.0);
  auto stddev = [](const MultiBandRaster& r) {
    double m = 0, q = 0;
    const auto v = r.band(0).float32();
    for (float x : v) m += x;
    m /= static_cast<double>(v.size());
    for (float x : v) q += (x - m) * (x - m);
    return std::sqrt(q / static_cast<double>(v.size()));
  };
  const double a = fit_fdm(s, t).matrix[0], expect = stddev(t) / stddev(s);
  const double scalar_err = std::abs(a - expect);
  const bool ok = worst_mean <= 1e-6 && worst_cov <= 1e-5 && scalar_err <= 1e-10;
  return {ok, fmt("mean rel %.3g, covariance rel Frobenius %.3g (12288 px x 5 fixtures); scalar |A - st/ss| %.3g",
                  worst_mean, worst_cov, scalar_err)};
}

Outcome synthetic_direction() {
  const auto t0 = Clock::now();
  std::size_t wins = 0;
  std::string losses;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto hr = make_smooth_scene(192, 192, 4, 1000 + seed);
    const auto spec = random_affine_distortion(4, seed, 0.01);
    const auto hm = verify_recovery(hr, spec, AlignMethod::hm);
    const auto fdm = verify_recovery(hr, spec, AlignMethod::fdm);
    const bool win = hm.post.aggregate.psnr > hm.pre.aggregate.psnr && hm.post.aggregate.ssim > hm.pre.aggregate.ssim &&
                     fdm.post.aggregate.psnr > fdm.pre.aggregate.psnr &&
                     fdm.post.aggregate.ssim > fdm.pre.aggregate.ssim;
    wins += win;
    if (!win) losses += " " + std::to_string(seed);
  }
  const double secs = seconds_since(t0);
  return {wins >= 19 && secs < 300,
          fmt("HM and FDM beat the upscaled baseline on PSNR and SSIM in %zu/20 specs in %.1fs%s%s", wins, secs,
              losses.empty() ? "" : "; lost seeds:", losses.c_str())};
}

Outcome fdm_recovery() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto hr = make_smooth_scene(128, 128, 6, seed);
    const auto spec = random_affine_distortion(6, seed, 0.0, 1.0);
    const auto r = verify_recovery(hr, spec, AlignMethod::fdm);
    worst = std::max(worst, r.post.aggregate.mse / (r.data_range * r.data_range));
  }
  return {worst < 1e-8, fmt("max mse / range^2 = %.3g over 5 six-band scenes", worst)};
}

Outcome metric_identities() {
  TempDir tmp;
  const double range = 1.5;
  for (const char* set : {"ref", "pred"}) fs::create_directories(tmp / set);
  for (std::uint32_t k = 0; k < 4; ++k) {
    const auto ref = testsupport::random_float_raster(40, 40, 3, 10 + k);
    write_raster(ref, tmp / "ref" / fmt("p%u.tif", k), SampleEncoding::float32_reflectance);
    // Patch 0 is an exact copy so the infinite-PSNR row is covered too.
    write_raster(k == 0 ? ref : testsupport::random_float_raster(40, 40, 3, 20 + k), tmp / "pred" / fmt("p%u.tif", k),
                 SampleEncoding::float32_reflectance);
  }
  EvaluationConfig cfg;
  cfg.data_range = range;
  evaluate_prediction_set(tmp / "pred", tmp / "ref", {}, cfg, tmp / "out");
  const auto rows = read_csv(tmp / "out" / "metrics.csv");
  double worst = 0;
  std::size_t checked = 0;
  bool infinite_ok = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double mse = parse_double(rows[i][3]), rmse = parse_double(rows[i][4]);
    worst = std::max(worst, std::abs(rmse * rmse - mse) / std::max(mse, 1e-300));
    if (rows[i][7] == "true") {
      infinite_ok = infinite_ok && mse == 0.0 && rows[i][6].empty();
    } else {
      const double psnr = parse_double(rows[i][6]);
      const double expect = 20 * std::log10(range) - 10 * std::log10(mse);
      worst = std::max(worst, std::abs(psnr - expect) / std::abs(expect));
    }
    ++checked;
  }

  const auto a = testsupport::random_float_raster(50, 37, 4, 77);
  const auto self = ssim(a, a, 1.0);
  bool self_one = self.aggregate == 1.0;
  for (double v : self.per_band) self_one = self_one && v == 1.0;

  // Frozen scikit-image structural_similarity values for the LCG fixture.
  struct Fixture {
    std::size_t w, h;
    std::uint32_t seed;
    double mix, range, expected;
  };
  const Fixture fixtures[] = {{32, 32, 1, 0.6, 1.0, 0.7839032316895965},
                              {48, 40, 2, 0.9, 1.0, 0.9890430958448978},
                              {64, 64, 3, 0.3, 2.0, 0.38051469713459063},
                              {27, 33, 4, 0.75, 0.5, 0.9171988822948028},
                              {100, 80, 5, 0.5, 1.0, 0.6719707276526251}};
  double worst_ssim = 0;
  for (const auto& f : fixtures) {
    testsupport::Lcg rng(f.seed);
    std::vector<double> u(2 * f.w * f.h);
    for (auto& v : u) v = rng.next();
    std::vector<float> ref(f.w * f.h), pred(f.w * f.h);
    for (std::size_t i = 0; i < f.w * f.h; ++i) {
      ref[i] = static_cast<float>(u[i]);
      pred[i] = static_cast<float>(f.mix * u[i] + (1.0 - f.mix) * u[f.w * f.h + i]);
    }
    const double s = ssim(make_float_raster(f.w, f.h, {pred}), make_float_raster(f.w, f.h, {ref}), f.range).aggregate;
    worst_ssim = std::max(worst_ssim, std::abs(s - f.expected));
  }
  const bool ok = worst <= 1e-12 && infinite_ok && checked > 0 && self_one && worst_ssim <= 1e-6;
  return {ok, fmt("%zu report rows, max rel identity error %.3g; ssim(a,a)==1: %s; max |ssim - scikit-image| %.3g",
                  checked, worst, self_one ? "yes" : "no", worst_ssim)};
}

Outcome resampler_contracts() {
  bool constant_exact = true;
  for (float c : {0.0f, 0.2718f, -3.5f, 1234.567f})
    for (auto k : {ResampleKernel::lanczos3, ResampleKernel::bicubic})
      for (auto [w, h] : {std::pair<std::size_t, std::size_t>{384, 384}, {37, 91}, {128, 128}, {20, 20}}) {
        const auto src = make_float_raster(128, 128, {std::vector<float>(128 * 128, c)});
        const auto out = resample(src, {w, h, k});
        for (float v : out.band(0).float32()) constant_exact = constant_exact && v == c;
      }

  const auto r = testsupport::random_float_raster(77, 51, 3, 5);
  double identity_err = 0;
  for (auto k : {ResampleKernel::lanczos3, ResampleKernel::bicubic}) {
    const auto out = resample(r, {77, 51, k});
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < r.pixel_count(); ++i)
        identity_err = std::max(identity_err, std::abs(double(out.band(b).float32()[i]) - r.band(b).float32()[i]));
  }

  double worst_roundtrip = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto scene = make_smooth_scene(128, 128, 3, seed);
    for (auto k : {ResampleKernel::lanczos3, ResampleKernel::bicubic}) {
      const auto back = resample(resample(scene, {384, 384, k}), {128, 128, k});
      for (std::size_t b = 0; b < 3; ++b) {
        const auto x = scene.band(b).float32(), y = back.band(b).float32();
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        double mae = 0;
        for (std::size_t i = 0; i < x.size(); ++i) mae += std::abs(double(x[i]) - y[i]);
        worst_roundtrip = std::max(worst_roundtrip, mae / static_cast<double>(x.size()) / (*hi - *lo));
      }
    }
  }
  const bool ok = constant_exact && identity_err <= 1e-6 && worst_roundtrip < 0.01;
  return {ok, fmt("constant exact: %s; identity max err %.3g; 3x roundtrip MAE %.3g%% of range",
                  constant_exact ? "yes" : "no", identity_err, 100 * worst_roundtrip)};
}

Outcome determinism() {
  TempDir tmp;
  const auto hr = make_smooth_scene(768, 768, 4, 31);
  auto spec = random_affine_distortion(4, 9, 0.005);
  const auto pair = make_pair(hr, spec);
  write_raster(hr, tmp / "hr.tif", SampleEncoding::float32_reflectance);
  write_raster(pair.lr, tmp / "lr.tif", SampleEncoding::float32_reflectance);

  auto run = [&](const std::string& out, unsigned threads, const char* method) {
    ConfigValues v{{"input_lr", (tmp / "lr.tif").string()}, {"input_hr", (tmp / "hr.tif").string()},
                   {"method", method},                      {"seed", "17"},
                   {"val_fraction", "0.25"},                {"output_dir", (tmp / out).string()},
                   {"threads", std::to_string(threads)}};
    std::vector<std::string> problems;
    cmd_pipeline(resolve_pipeline_config({v}, problems));
  };
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  for (const char* method : {"fdm", "hm"}) {
    const std::string m = method;
    run(m + "_a", 1, method);
    run(m + "_b", 1, method);
    run(m + "_c", 8, method);
    for (const auto& e : fs::recursive_directory_iterator(tmp / (m + "_a"))) {
      if (!e.is_regular_file() || e.path().filename() == "run_log.json") continue;
      const auto rel = fs::relative(e.path(), tmp / (m + "_a"));
      const auto bytes = testsupport::read_file(e.path());
      for (const char* other : {"_b", "_c"}) {
        ++compared;
        if (bytes != testsupport::read_file(tmp / (m + other) / rel)) {
          ++differing;
          if (first_diff.empty()) first_diff = (m + other) + "/" + rel.string();
        }
      }
    }
  }
  set_max_threads(0);
  return {compared > 0 && differing == 0,
          fmt("%zu file comparisons (runs repeated, --threads 1 vs 8), %zu differ%s%s", compared, differing,
              first_diff.empty() ? "" : ", first: ", first_diff.c_str())};
}

Outcome figure_artifacts() {
  TempDir tmp;
  const std::vector<std::string> names{"Blue", "Green", "Red", "NIR"};
  for (const char* set : {"ref", "pred", "base"}) fs::create_directories(tmp / set);
  for (std::uint64_t k = 0; k < 3; ++k) {
    const auto hr = make_smooth_scene(96, 96, 4, 50 + k);
    const auto ref = make_float_raster(96, 96,
                                       [&] {
                                         std::vector<std::vector<float>> b;
                                         for (std::size_t i = 0; i < 4; ++i)
                                           b.emplace_back(hr.band(i).float32().begin(), hr.band(i).float32().end());
                                         return b;
                                       }(),
                                       names);
    const auto lr = make_pair(ref, random_affine_distortion(4, k + 1, 0.01)).lr;
    const auto pred = align(resample(lr, {96, 96, ResampleKernel::lanczos3}), ref, AlignMethod::hm);
    const std::string id = "p" + std::to_string(k);
    write_raster(ref, tmp / "ref" / (id + ".tif"), SampleEncoding::float32_reflectance);
    write_raster(pred, tmp / "pred" / (id + ".tif"), SampleEncoding::float32_reflectance);
    write_raster(lr, tmp / "base" / (id + ".tif"), SampleEncoding::float32_reflectance);
  }
  EvaluationConfig cfg;
  cfg.data_range = 1.0;
  cfg.figure_patches = {"p1"};
  const auto result = evaluate_prediction_set(tmp / "pred", tmp / "ref", tmp / "base", cfg, tmp / "out");

  const auto rows = read_csv(tmp / "out" / "metrics.csv");
  std::size_t complete = 0;
  double worst = 0;
  std::string missing;
  for (const auto& f : result.figures) {
    bool ok = true;
    for (const auto& rel : {f.reference_png, f.prediction_png, f.histogram_csv, f.difference_tif, f.difference_png})
      if (!fs::exists(tmp / "out" / rel)) {
        ok = false;
        missing += " " + rel;
      }
    const auto hist = read_csv(tmp / "out" / f.histogram_csv);
    ok = ok && !hist.empty() && hist[0] == std::vector<std::string>{"bin_low", "bin_high", "reference", "prediction",
                                                                    "baseline"};
    // Shared bins: one edge column pair, and each source counts every valid sample.
    std::array<std::uint64_t, 3> totals{};
    for (std::size_t i = 1; i < hist.size(); ++i)
      for (std::size_t s = 0; s < 3; ++s) totals[s] += std::stoull(hist[i][2 + s]);
    ok = ok && totals[0] == 96u * 96u && totals[1] == 96u * 96u && totals[2] == 32u * 32u &&
         hist.size() == 1 + kDefaultHistogramBins;

    double mae_row = NAN;
    for (const auto& row : rows)
      if (row[0] == f.patch_id && row[1] == "prediction" && row[2] == f.band) mae_row = parse_double(row[5]);
    const double diff = std::abs(f.difference.mean_abs - mae_row);
    worst = std::max(worst, std::isnan(diff) ? INFINITY : diff);
    complete += ok;
  }
  const auto diff = read_raster(tmp / "out" / "figures" / "p1" / "difference.tif");
  const bool ok = result.figures.size() == 4 && complete == 4 && worst <= 1e-9 && diff.band_count() == 4;
  return {ok, fmt("%zu/4 bands with reference/prediction PNGs, 3-source shared-bin histogram and signed difference "
                  "map; max |mean_abs - MAE row| %.3g%s",
                  complete, worst, missing.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"tiling parity", tiling_parity},
      {"radiometry oracle", radiometry_oracle},
      {"histogram matching exactness", hm_exactness},
      {"FDM moment matching", fdm_moments},
      {"alignment beats baseline on synthetic pairs", synthetic_direction},
      {"FDM exact recovery", fdm_recovery},
      {"metric identities", metric_identities},
      {"resampler contracts", resampler_contracts},
      {"pipeline determinism", determinism},
      {"figure artifact set", figure_artifacts},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
