#pragma once

// Corpus evaluation of predicted patches against reference patches, with an
// optional low-resolution baseline. This is where externally produced
// super-resolved patches enter the toolkit.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlsalign/dataset.hpp"
#include "hlsalign/error.hpp"
#include "hlsalign/metrics.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/raster_io.hpp"
#include "hlsalign/resample.hpp"

namespace hlsalign {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.json";

struct PatchFile {
  std::string id;
  fs::path path;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline PatchManifest load_patch_manifest(const fs::path& dir) {
  try {
    return read_json(dir / kManifestFile).get<PatchManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed patch manifest in '" + dir.string() + "': " + e.what());
  }
}

/// Patch files of a directory: from its manifest when present, otherwise
/// every *.tif/*.tiff file with the file stem as id.
inline std::vector<PatchFile> list_patch_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir.string() + "'");
  std::vector<PatchFile> files;
  if (fs::exists(dir / kManifestFile)) {
    for (const auto& rec : load_patch_manifest(dir).patches) files.push_back({rec.id, dir / rec.file});
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".tif" || ext == ".tiff"))
        files.push_back({entry.path().stem().string(), entry.path()});
    }
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return files;
}

struct EvaluationConfig {
  double data_range = 0.0;
  std::size_t histogram_bins = kDefaultHistogramBins;
  /// Patch ids that get the per-band figure artifact set. Empty means the
  /// first patch in id order.
  std::vector<std::string> figure_patches;
  ResampleKernel baseline_kernel = ResampleKernel::lanczos3;
};

struct PatchEvaluation {
  std::string id;
  MetricReport prediction;
  std::optional<MetricReport> baseline;
  bool baseline_resampled = false;
};

/// Files of one band's four-panel comparison.
struct FigureBand {
  std::string patch_id;
  std::string band;
  std::string reference_png;
  std::string prediction_png;
  std::string histogram_csv;
  std::string difference_tif;
  std::string difference_png;
  DiffSummary difference;
  double mae = 0.0;
};

struct EvaluationResult {
  std::vector<PatchEvaluation> patches;
  MetricReport corpus_prediction;
  std::optional<MetricReport> corpus_baseline;
  bool baseline_resampled = false;
  std::vector<FigureBand> figures;
};

namespace detail {

inline std::pair<double, double> shared_range(const MultiBandRaster& a, const MultiBandRaster& b, std::size_t band) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* r : {&a, &b})
    r->band(band).visit([&](const auto& v) {
      for (auto s : v) {
        const double x = s;
        if (r->is_nodata(x)) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    });
  if (!(lo < hi)) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

inline std::vector<FigureBand> write_figures(const std::string& id, const MultiBandRaster& ref,
                                             const MultiBandRaster& pred, const MultiBandRaster* baseline_native,
                                             const MetricReport& report, std::size_t bins, const fs::path& out_dir) {
  const fs::path dir = out_dir / "figures" / id;
  fs::create_directories(dir);
  const DiffMap diff = diff_map(pred, ref);
  write_raster(diff.map, dir / "difference.tif", SampleEncoding::float32_reflectance);

  std::vector<FigureBand> bands;
  for (std::size_t b = 0; b < ref.band_count(); ++b) {
    const std::string name = ref.band_name(b);
    FigureBand f;
    f.patch_id = id;
    f.band = name;
    f.reference_png = "figures/" + id + "/" + name + "_reference.png";
    f.prediction_png = "figures/" + id + "/" + name + "_prediction.png";
    f.histogram_csv = "figures/" + id + "/" + name + "_histogram.csv";
    f.difference_tif = "figures/" + id + "/difference.tif";
    f.difference_png = "figures/" + id + "/" + name + "_difference.png";
    f.difference = diff.per_band[b];
    f.mae = report.per_band[b].mae;

    const auto range = shared_range(ref, pred, b);
    export_png(ref, {b, b, b}, range, out_dir / f.reference_png);
    export_png(pred, {b, b, b}, range, out_dir / f.prediction_png);
    export_diff_png(diff, b, out_dir / f.difference_png);

    std::vector<LabeledRaster> sources{{"reference", &ref}, {"prediction", &pred}};
    if (baseline_native) sources.push_back({"baseline", baseline_native});
    write_text(out_dir / f.histogram_csv, histogram_compare(sources, b, bins).to_csv());
    bands.push_back(std::move(f));
  }
  return bands;
}

}  // namespace detail

inline nlohmann::json figures_json(const std::vector<FigureBand>& figures) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : figures)
    out.push_back({{"patch_id", f.patch_id},
                   {"band", f.band},
                   {"reference_png", f.reference_png},
                   {"prediction_png", f.prediction_png},
                   {"histogram_csv", f.histogram_csv},
                   {"difference_tif", f.difference_tif},
                   {"difference_png", f.difference_png},
                   {"difference",
                    {{"min", f.difference.min},
                     {"max", f.difference.max},
                     {"mean", f.difference.mean},
                     {"mean_abs", f.difference.mean_abs}}},
                   {"mae", f.mae}});
  return out;
}

/// Compares every reference patch with the prediction of the same id (and
/// the baseline, resampled to reference size when it is smaller). Writes
/// metrics.csv, summary.json and figures/ under out_dir.
inline EvaluationResult evaluate_prediction_set(const fs::path& pred_dir, const fs::path& ref_dir,
                                                const std::optional<fs::path>& baseline_dir,
                                                const EvaluationConfig& config, const fs::path& out_dir) {
  if (!(config.data_range > 0.0)) throw ConfigError("evaluation needs a positive data_range");
  const auto refs = list_patch_files(ref_dir);
  if (refs.empty()) throw DataError("no reference patches in '" + ref_dir.string() + "'");

  auto index = [](const std::vector<PatchFile>& files) {
    std::map<std::string, fs::path> m;
    for (const auto& f : files) m[f.id] = f.path;
    return m;
  };
  const auto preds = index(list_patch_files(pred_dir));
  std::map<std::string, fs::path> bases;
  if (baseline_dir) bases = index(list_patch_files(*baseline_dir));

  std::vector<std::string> problems;
  std::set<std::string> ref_ids;
  for (const auto& r : refs) {
    ref_ids.insert(r.id);
    if (!preds.count(r.id)) problems.push_back("prediction missing patch " + r.id);
    else if (!fs::exists(preds.at(r.id))) problems.push_back("prediction file missing: " + preds.at(r.id).string());
    if (!fs::exists(r.path)) problems.push_back("reference file missing: " + r.path.string());
    if (baseline_dir) {
      if (!bases.count(r.id)) problems.push_back("baseline missing patch " + r.id);
      else if (!fs::exists(bases.at(r.id))) problems.push_back("baseline file missing: " + bases.at(r.id).string());
    }
  }
  for (const auto& [id, _] : preds)
    if (!ref_ids.count(id)) problems.push_back("prediction patch " + id + " has no reference");
  if (!problems.empty()) {
    std::string msg = "prediction set does not match reference manifest:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }

  std::set<std::string> figure_ids(config.figure_patches.begin(), config.figure_patches.end());
  if (figure_ids.empty()) figure_ids.insert(refs.front().id);
  for (const auto& id : figure_ids)
    if (!ref_ids.count(id)) throw ConfigError("figure patch '" + id + "' is not in the reference set");

  fs::create_directories(out_dir);
  std::vector<PatchEvaluation> evals(refs.size());
  std::vector<MetricAccumulator> pred_acc(refs.size()), base_acc(refs.size());
  std::vector<std::vector<FigureBand>> figures(refs.size());

  parallel_for(refs.size(), [&](std::size_t k) {
    const std::string& id = refs[k].id;
    const MultiBandRaster ref = read_raster(refs[k].path);
    const MultiBandRaster pred = read_raster(preds.at(id));
    if (pred.width() != ref.width() || pred.height() != ref.height() || pred.band_count() != ref.band_count())
      throw DataError("patch " + id + ": prediction shape differs from reference");
    PatchEvaluation& e = evals[k];
    e.id = id;
    pred_acc[k] = accumulate_metrics(pred, ref, config.data_range);
    e.prediction = pred_acc[k].report(config.data_range);

    std::optional<MultiBandRaster> base_native;
    if (baseline_dir) {
      base_native.emplace(read_raster(bases.at(id)));
      MultiBandRaster base = *base_native;
      if (base.width() != ref.width() || base.height() != ref.height()) {
        base = resample(base, {ref.width(), ref.height(), config.baseline_kernel});
        e.baseline_resampled = true;
      }
      base_acc[k] = accumulate_metrics(base, ref, config.data_range);
      e.baseline = base_acc[k].report(config.data_range);
    }
    if (figure_ids.count(id))
      figures[k] = detail::write_figures(id, ref, pred, base_native ? &*base_native : nullptr, e.prediction,
                                         config.histogram_bins, out_dir);
  });

  EvaluationResult result;
  MetricAccumulator pooled_pred, pooled_base;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    pooled_pred.merge(pred_acc[k]);
    if (baseline_dir) pooled_base.merge(base_acc[k]);
    result.baseline_resampled = result.baseline_resampled || evals[k].baseline_resampled;
    for (auto& f : figures[k]) result.figures.push_back(std::move(f));
  }
  result.patches = std::move(evals);
  result.corpus_prediction = pooled_pred.report(config.data_range);
  if (baseline_dir) result.corpus_baseline = pooled_base.report(config.data_range);

  std::string csv = std::string(kMetricCsvHeader) + "\n";
  for (const auto& e : result.patches) {
    for (const auto& m : e.prediction.per_band) csv += metric_csv_row(e.id, "prediction", m) + "\n";
    if (e.baseline)
      for (const auto& m : e.baseline->per_band) csv += metric_csv_row(e.id, "baseline", m) + "\n";
  }
  auto corpus_rows = [&](const MetricReport& r, const char* source) {
    for (const auto& m : r.per_band) csv += metric_csv_row("corpus", source, m) + "\n";
    csv += metric_csv_row("corpus", source, r.aggregate) + "\n";
  };
  corpus_rows(result.corpus_prediction, "prediction");
  if (result.corpus_baseline) corpus_rows(*result.corpus_baseline, "baseline");
  write_text(out_dir / "metrics.csv", csv);

  nlohmann::json summary;
  summary["data_range"] = config.data_range;
  summary["patch_count"] = result.patches.size();
  summary["baseline_resampled"] = result.baseline_resampled;
  summary["corpus"]["prediction"] = result.corpus_prediction;
  if (result.corpus_baseline) summary["corpus"]["baseline"] = *result.corpus_baseline;
  summary["patches"] = nlohmann::json::array();
  for (const auto& e : result.patches) {
    nlohmann::json p{{"id", e.id}, {"prediction", e.prediction}, {"baseline_resampled", e.baseline_resampled}};
    if (e.baseline) p["baseline"] = *e.baseline;
    summary["patches"].push_back(std::move(p));
  }
  summary["figures"] = figures_json(result.figures);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace hlsalign
