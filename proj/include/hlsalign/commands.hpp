#pragma once

// Subcommand implementations. Each takes a plain argument struct so the CLI
// front end and the tests drive the same code.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <png.h>
#include <tiffio.h>
#include <Eigen/Core>
#include <json.hpp>

#include "hlsalign/align.hpp"
#include "hlsalign/config.hpp"
#include "hlsalign/dataset.hpp"
#include "hlsalign/error.hpp"
#include "hlsalign/evaluate.hpp"
#include "hlsalign/format.hpp"
#include "hlsalign/metrics.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/radiometry.hpp"
#include "hlsalign/raster_io.hpp"
#include "hlsalign/resample.hpp"
#include "hlsalign/synth.hpp"

#ifndef HLSALIGN_VERSION
#define HLSALIGN_VERSION "0.0.0"
#endif

namespace hlsalign {

namespace fs = std::filesystem;

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/// Writes each patch as <dir>/<id>.tif plus manifest.json.
inline PatchManifest write_patch_set(const fs::path& dir, const std::vector<Patch>& patches, const PatchGrid& grid,
                                     const std::string& source, std::size_t width, std::size_t height,
                                     SampleEncoding encoding) {
  fs::create_directories(dir);
  PatchManifest m;
  m.source = source;
  m.width = width;
  m.height = height;
  m.grid = grid;
  m.encoding = encoding;
  if (!patches.empty()) m.band_names = patches.front().raster.band_names();
  for (const auto& p : patches) m.patches.push_back({p.id, p.row, p.col, p.x_offset, p.y_offset, p.id + ".tif"});
  parallel_for(patches.size(), [&](std::size_t k) { write_raster(patches[k].raster, dir / m.patches[k].file, encoding); });
  write_json(dir / kManifestFile, m);
  return m;
}

inline nlohmann::json split_json(const std::vector<std::string>& ids, double val_fraction, std::uint64_t seed) {
  auto [train, val] = shuffle_split(ids, val_fraction, seed);
  return {{"seed", seed}, {"val_fraction", val_fraction}, {"train", train}, {"val", val}};
}

// ---------------------------------------------------------------------------

struct TileArgs {
  fs::path input;
  std::size_t patch_size = 128;
  fs::path out_dir;
  std::optional<std::uint64_t> split_seed;
  double val_fraction = 0.01;
};

inline PatchManifest cmd_tile(const TileArgs& a) {
  if (a.patch_size == 0) throw ConfigError("patch size must be positive");
  const MultiBandRaster r = read_raster(a.input);
  auto [grid, patches] = extract_patches(r, a.patch_size);
  PatchManifest m = write_patch_set(a.out_dir, patches, grid, a.input.string(), r.width(), r.height(), r.encoding());
  if (a.split_seed) {
    std::vector<std::string> ids;
    for (const auto& p : m.patches) ids.push_back(p.id);
    write_json(a.out_dir / "split.json", split_json(ids, a.val_fraction, *a.split_seed));
  }
  return m;
}

struct StatsArgs {
  std::vector<fs::path> inputs;  ///< rasters or patch directories
  std::size_t bins = kDefaultHistogramBins;
  fs::path out;
};

inline BandStatistics cmd_stats(const StatsArgs& a) {
  std::vector<fs::path> files;
  for (const auto& in : a.inputs) {
    if (fs::is_directory(in)) {
      for (const auto& f : list_patch_files(in)) files.push_back(f.path);
    } else {
      files.push_back(in);
    }
  }
  if (files.empty()) throw ConfigError("stats needs at least one input raster");
  std::vector<MultiBandRaster> rasters;
  for (const auto& f : files) rasters.push_back(read_raster(f));
  BandStatistics s = compute_stats(rasters, a.bins);
  if (!a.out.empty()) write_json(a.out, s);
  return s;
}

struct ReflectanceArgs {
  fs::path input;
  fs::path params;
  fs::path out;
  std::optional<double> solar_zenith_deg;
};

inline MultiBandRaster cmd_reflectance(const ReflectanceArgs& a) {
  if (!fs::is_regular_file(a.params)) throw ConfigError("radiometric parameter file not found: " + a.params.string());
  const MultiBandRaster dn = read_raster(a.input);
  MultiBandRaster sr = dn_to_surface(dn, load_radiometric_params(a.params, dn.band_names(), a.solar_zenith_deg));
  write_raster(sr, a.out, SampleEncoding::float32_reflectance);
  return sr;
}

struct AlignArgs {
  fs::path source;
  fs::path reference;
  AlignMethod method = AlignMethod::hm;
  FdmFactorization factorization = FdmFactorization::transport;
  fs::path out;
  fs::path transform_out;  ///< fdm only; empty skips
};

inline MultiBandRaster cmd_align(const AlignArgs& a) {
  const MultiBandRaster src = read_raster(a.source);
  const MultiBandRaster ref = read_raster(a.reference);
  MultiBandRaster out = to_float32(src);
  if (a.method == AlignMethod::fdm) {
    const AlignmentTransform t = fit_fdm(src, ref, a.factorization);
    out = apply_fdm(src, t);
    if (!a.transform_out.empty()) write_json(a.transform_out, t);
  } else if (a.method == AlignMethod::hm) {
    out = histogram_match(src, ref);
  }
  write_raster(out, a.out, SampleEncoding::float32_reflectance);
  return out;
}

struct ResampleArgs {
  fs::path input;
  fs::path out;
  std::size_t width = 0;
  std::size_t height = 0;
  double scale = 0.0;  ///< used when width/height are 0
  ResampleKernel kernel = ResampleKernel::lanczos3;
};

inline MultiBandRaster cmd_resample(const ResampleArgs& a) {
  const MultiBandRaster in = read_raster(a.input);
  ResampleSpec spec;
  if (a.width > 0 && a.height > 0) {
    spec = {a.width, a.height, a.kernel};
  } else if (a.scale > 0.0) {
    spec = scaled_spec(in, a.scale, a.kernel);
  } else {
    throw ConfigError("resample needs --width and --height or --scale");
  }
  MultiBandRaster out = resample(in, spec);
  write_raster(out, a.out, SampleEncoding::float32_reflectance);
  return out;
}

struct EvaluateArgs {
  fs::path predictions;
  fs::path reference;
  std::optional<fs::path> baseline;
  EvaluationConfig config;
  fs::path out_dir;
};

inline EvaluationResult cmd_evaluate(const EvaluateArgs& a) {
  return evaluate_prediction_set(a.predictions, a.reference, a.baseline, a.config, a.out_dir);
}

struct SynthArgs {
  std::optional<fs::path> hr;  ///< otherwise a smooth scene is generated
  std::size_t scene_width = 384;
  std::size_t scene_height = 384;
  std::size_t scene_bands = 3;
  std::uint64_t scene_seed = 1;
  DistortionSpec spec;
  fs::path out_dir;
};

inline nlohmann::json cmd_synth(const SynthArgs& a) {
  const MultiBandRaster hr = a.hr ? read_raster(*a.hr)
                                  : make_smooth_scene(a.scene_width, a.scene_height, a.scene_bands, a.scene_seed);
  SynthPair pair = make_pair(hr, a.spec);
  fs::create_directories(a.out_dir);
  if (a.hr) {
    pair.manifest["hr_file"] = a.hr->string();
  } else {
    write_raster(hr, a.out_dir / "hr.tif", SampleEncoding::float32_reflectance);
    pair.manifest["hr_file"] = "hr.tif";
    pair.manifest["scene"] = {{"generator", "smooth_sinusoids"},
                              {"width", a.scene_width},
                              {"height", a.scene_height},
                              {"bands", a.scene_bands},
                              {"seed", a.scene_seed}};
  }
  write_raster(pair.lr, a.out_dir / "lr.tif", SampleEncoding::float32_reflectance);
  pair.manifest["lr_file"] = "lr.tif";
  write_json(a.out_dir / kManifestFile, pair.manifest);
  return pair.manifest;
}

// ---------------------------------------------------------------------------
// Pipeline

inline nlohmann::json library_versions() {
  std::string tiff = TIFFGetVersion();
  tiff = tiff.substr(0, tiff.find('\n'));
  return {{"hlsalign", HLSALIGN_VERSION},
          {"libtiff", tiff},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}};
}

inline nlohmann::json describe_input(const std::string& role, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {{"role", role}, {"path", path.string()}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}};
}

struct PipelineResult {
  nlohmann::json report;   ///< deterministic content of report.json
  nlohmann::json run_log;  ///< timings and environment, run_log.json
  EvaluationResult evaluation;
};

/// reflectance -> tiling -> stats/normalization -> upscale (or external
/// predictions) -> alignment -> denormalization -> evaluation.
inline PipelineResult cmd_pipeline(const PipelineConfig& c) {
  using clock = std::chrono::steady_clock;
  set_max_threads(c.threads);
  nlohmann::json timings = nlohmann::json::array();
  auto stage_start = clock::now();
  auto stage_done = [&](const char* name) {
    const auto now = clock::now();
    timings.push_back({{"stage", name}, {"seconds", std::chrono::duration<double>(now - stage_start).count()}});
    stage_start = now;
  };

  const fs::path out = c.output_dir;
  fs::create_directories(out);
  nlohmann::json outputs = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::array();
  inputs.push_back(describe_input("input_lr", c.input_lr));
  inputs.push_back(describe_input("input_hr", c.input_hr));

  // Reflectance conversion.
  MultiBandRaster lr = read_raster(c.input_lr);
  MultiBandRaster hr = read_raster(c.input_hr);
  if (lr.band_count() != hr.band_count())
    throw DataError("tiles have different band counts: " + std::to_string(lr.band_count()) + " vs " +
                    std::to_string(hr.band_count()));
  nlohmann::json reflectance;
  auto convert = [&](MultiBandRaster& r, const fs::path& params, const char* role) {
    if (params.empty()) {
      if (r.encoding() == SampleEncoding::int16_dn)
        throw ConfigError(std::string(role) + " tile holds int16 DN; set radiometry or radiometry_" + role);
      reflectance[role] = "input already float32 reflectance";
      return;
    }
    if (!fs::is_regular_file(params)) throw ConfigError("radiometric parameter file not found: " + params.string());
    inputs.push_back(describe_input(std::string("radiometry_") + role, params));
    r = dn_to_surface(r, load_radiometric_params(params, r.band_names(), c.solar_zenith_deg));
    reflectance[role] = "dn_to_surface";
  };
  convert(lr, c.radiometry_lr, "lr");
  convert(hr, c.radiometry_hr, "hr");
  stage_done("reflectance");

  // Tiling.
  auto [grid_lr, patches_lr] = extract_patches(lr, c.patch_lr);
  auto [grid_hr, patches_hr] = extract_patches(hr, c.patch_hr);
  if (grid_lr.rows != grid_hr.rows || grid_lr.cols != grid_hr.cols)
    throw DataError("patch grids differ: lr " + std::to_string(grid_lr.rows) + "x" + std::to_string(grid_lr.cols) +
                    " vs hr " + std::to_string(grid_hr.rows) + "x" + std::to_string(grid_hr.cols));
  if (patches_lr.empty()) throw DataError("tiles are smaller than one patch");
  const std::size_t lr_w = lr.width(), lr_h = lr.height(), hr_w = hr.width(), hr_h = hr.height();
  lr = MultiBandRaster(1, 1, {BandBuffer(std::vector<float>{0.0f})});
  hr = lr;
  write_patch_set(out / "patches" / "lr", patches_lr, grid_lr, c.input_lr.string(), lr_w, lr_h,
                  SampleEncoding::float32_reflectance);
  write_patch_set(out / "patches" / "hr", patches_hr, grid_hr, c.input_hr.string(), hr_w, hr_h,
                  SampleEncoding::float32_reflectance);
  outputs["patches_lr"] = "patches/lr/manifest.json";
  outputs["patches_hr"] = "patches/hr/manifest.json";
  std::vector<std::string> ids;
  for (const auto& p : patches_hr) ids.push_back(p.id);
  write_json(out / "split.json", split_json(ids, c.val_fraction, c.seed));
  outputs["split"] = "split.json";
  stage_done("tile");

  // Statistics and normalization.
  auto rasters_of = [](const std::vector<Patch>& ps) {
    std::vector<const MultiBandRaster*> v;
    for (const auto& p : ps) v.push_back(&p.raster);
    return v;
  };
  const BandStatistics stats_lr = compute_stats(rasters_of(patches_lr), c.histogram_bins);
  const BandStatistics stats_hr = compute_stats(rasters_of(patches_hr), c.histogram_bins);
  fs::create_directories(out / "stats");
  write_json(out / "stats" / "lr.json", stats_lr);
  write_json(out / "stats" / "hr.json", stats_hr);
  outputs["stats_lr"] = "stats/lr.json";
  outputs["stats_hr"] = "stats/hr.json";
  stage_done("stats");

  // Upscale or ingest, align, denormalize.
  std::map<std::string, fs::path> external;
  if (c.predictions) {
    for (const auto& f : list_patch_files(*c.predictions)) external[f.id] = f.path;
    std::vector<std::string> missing;
    for (const auto& id : ids)
      if (!external.count(id)) missing.push_back("prediction missing patch " + id);
    if (!missing.empty()) throw DataError(missing.size() == 1 ? missing.front() : missing.front() + " (and " +
                                          std::to_string(missing.size() - 1) + " more)");
  }
  std::vector<std::optional<Patch>> slots(patches_hr.size());
  std::vector<std::optional<AlignmentTransform>> transforms(patches_hr.size());
  parallel_for(patches_hr.size(), [&](std::size_t k) {
    const Patch& ref = patches_hr[k];
    const MultiBandRaster nlr = minmax_normalize(patches_lr[k].raster, stats_lr, c.normalization);
    const MultiBandRaster nhr = minmax_normalize(ref.raster, stats_hr, c.normalization);
    MultiBandRaster up = c.predictions ? to_float32(read_raster(external.at(ref.id)))
                                       : resample(nlr, {c.patch_hr, c.patch_hr, c.kernel});
    if (up.width() != c.patch_hr || up.height() != c.patch_hr || up.band_count() != nhr.band_count())
      throw DataError("prediction for " + ref.id + " does not match the reference patch shape");
    MultiBandRaster aligned = up;
    if (c.method == AlignMethod::fdm) {
      transforms[k] = fit_fdm(up, nhr);
      aligned = apply_fdm(up, *transforms[k]);
    } else if (c.method == AlignMethod::hm) {
      aligned = histogram_match(up, nhr);
    }
    MultiBandRaster result = denormalize(aligned, stats_hr, c.normalization);
    GeoMeta meta = ref.raster.geo_meta();
    slots[k].emplace(Patch{ref.id, ref.row, ref.col, ref.x_offset, ref.y_offset, result.with_geo_meta(std::move(meta))});
  });
  std::vector<Patch> predicted;
  for (auto& s : slots) predicted.push_back(std::move(*s));
  write_patch_set(out / "predictions", predicted, grid_hr,
                  c.predictions ? c.predictions->string() : std::string("upscale:") + std::string(to_string(c.kernel)),
                  hr_w, hr_h, SampleEncoding::float32_reflectance);
  outputs["predictions"] = "predictions/manifest.json";
  if (c.method == AlignMethod::fdm) {
    nlohmann::json t = nlohmann::json::object();
    for (std::size_t k = 0; k < predicted.size(); ++k) t[predicted[k].id] = *transforms[k];
    fs::create_directories(out / "align");
    write_json(out / "align" / "transforms.json", t);
    outputs["transforms"] = "align/transforms.json";
  }
  stage_done("upscale_align");

  // Evaluation against the hr patches, with the native lr patches as baseline.
  EvaluationConfig ec;
  ec.data_range = c.data_range ? *c.data_range : stats_hr.overall.max - stats_hr.overall.min;
  if (!(ec.data_range > 0.0)) throw DataError("reference patches have zero dynamic range; set data_range");
  ec.histogram_bins = c.histogram_bins;
  ec.figure_patches = c.figure_patches;
  ec.baseline_kernel = c.kernel;
  PipelineResult result;
  result.evaluation =
      evaluate_prediction_set(out / "predictions", out / "patches" / "hr", out / "patches" / "lr", ec, out / "evaluation");
  outputs["metrics_csv"] = "evaluation/metrics.csv";
  outputs["summary"] = "evaluation/summary.json";
  stage_done("evaluate");

  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : c.resolved)
    if (k != "output_dir" && k != "threads") config[k] = v;
  result.report = {{"tool", "hlsalign"},
                   {"versions", library_versions()},
                   {"config", config},
                   {"config_hash", config_hash(c)},
                   {"warnings", c.warnings},
                   {"inputs", inputs},
                   {"reflectance", reflectance},
                   {"stages", {"reflectance", "tile", "stats", c.predictions ? "ingest" : "upscale", "align", "evaluate"}},
                   {"grid", {{"rows", grid_hr.rows}, {"cols", grid_hr.cols}, {"patch_lr", c.patch_lr}, {"patch_hr", c.patch_hr}}},
                   {"patch_count", ids.size()},
                   {"method", to_string(c.method)},
                   {"normalization", to_string(c.normalization)},
                   {"data_range", ec.data_range},
                   {"corpus", {{"prediction", result.evaluation.corpus_prediction}}},
                   {"outputs", outputs}};
  if (result.evaluation.corpus_baseline) result.report["corpus"]["baseline"] = *result.evaluation.corpus_baseline;
  write_json(out / "report.json", result.report);

  result.run_log = {{"config_hash", config_hash(c)},
                    {"output_dir", out.string()},
                    {"threads", max_threads()},
                    {"timings", timings}};
  write_json(out / "run_log.json", result.run_log);
  return result;
}

}  // namespace hlsalign
