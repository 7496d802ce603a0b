// hlsalign command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
// error. Failures are reported on stderr as one JSON object.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hlsalign/hlsalign.hpp"

namespace fs = std::filesystem;
using namespace hlsalign;

namespace {

int report_error(const char* kind, int code, const std::vector<std::string>& problems) {
  nlohmann::json j{{"error", {{"kind", kind}, {"exit_code", code}, {"problems", problems}}}};
  std::cerr << j.dump() << "\n";
  return code;
}

std::string flag_name(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

template <class T, class Parse>
CLI::Option* add_enum(CLI::App* app, const std::string& name, T& target, Parse parse, const std::string& help) {
  return app->add_option_function<std::string>(name, [&target, parse](const std::string& s) { target = parse(s); },
                                                help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-sensor raster alignment, resampling and evaluation toolkit"};
  app.set_version_flag("--version", HLSALIGN_VERSION);
  app.require_subcommand(1);
  unsigned threads = 0;
  std::optional<double> zenith_deg;
  app.add_option("--threads", threads, "worker thread cap (0 = all cores)")->capture_default_str();
  app.add_option("--solar-zenith-deg", zenith_deg, "override the solar zenith of radiometry files");

  // tile
  TileArgs tile;
  std::optional<std::uint64_t> tile_seed;
  auto* tile_cmd = app.add_subcommand("tile", "cut a raster into non-overlapping patches");
  tile_cmd->add_option("--input", tile.input, "input GeoTIFF")->required()->check(CLI::ExistingFile);
  tile_cmd->add_option("--patch-size", tile.patch_size, "patch edge in pixels")->capture_default_str();
  tile_cmd->add_option("--out", tile.out_dir, "output directory")->required();
  tile_cmd->add_option("--split-seed", tile_seed, "also write a seeded train/val split.json");
  tile_cmd->add_option("--val-fraction", tile.val_fraction, "validation share of the split")->capture_default_str();

  // stats
  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "per-band and pooled statistics with histograms");
  stats_cmd->add_option("--input", stats.inputs, "rasters or patch directories")->required();
  stats_cmd->add_option("--bins", stats.bins, "histogram bins")->capture_default_str();
  stats_cmd->add_option("--out", stats.out, "statistics JSON")->required();

  // reflectance
  ReflectanceArgs refl;
  auto* refl_cmd = app.add_subcommand("reflectance", "convert int16 DN to float32 surface reflectance");
  refl_cmd->add_option("--input", refl.input, "int16 DN GeoTIFF")->required()->check(CLI::ExistingFile);
  refl_cmd->add_option("--params", refl.params, "radiometric parameter JSON")->required();
  refl_cmd->add_option("--out", refl.out, "output GeoTIFF")->required();

  // align
  AlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align", "histogram matching or feature distribution matching");
  align_cmd->add_option("--source", align_args.source, "raster to align")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--reference", align_args.reference, "reference raster")->required()->check(CLI::ExistingFile);
  add_enum(align_cmd, "--method", align_args.method, parse_align_method, "none, hm or fdm (default hm)");
  add_enum(align_cmd, "--factorization", align_args.factorization, parse_fdm_factorization,
           "fdm matrix: transport or symmetric_root (default transport)");
  align_cmd->add_option("--out", align_args.out, "aligned GeoTIFF")->required();
  align_cmd->add_option("--transform-out", align_args.transform_out, "fdm transform JSON");

  // resample
  ResampleArgs rs;
  auto* rs_cmd = app.add_subcommand("resample", "Lanczos-3 or bicubic resampling");
  rs_cmd->add_option("--input", rs.input, "input GeoTIFF")->required()->check(CLI::ExistingFile);
  rs_cmd->add_option("--out", rs.out, "output GeoTIFF")->required();
  rs_cmd->add_option("--width", rs.width, "target width");
  rs_cmd->add_option("--height", rs.height, "target height");
  rs_cmd->add_option("--scale", rs.scale, "scale factor when width/height are not given");
  add_enum(rs_cmd, "--kernel", rs.kernel, parse_resample_kernel, "lanczos3 or bicubic (default lanczos3)");

  // evaluate
  EvaluateArgs ev;
  std::optional<fs::path> ev_baseline;
  auto* ev_cmd = app.add_subcommand("evaluate", "metrics, difference maps and histograms for a prediction set");
  ev_cmd->add_option("--predictions", ev.predictions, "prediction patch directory")->required();
  ev_cmd->add_option("--reference", ev.reference, "reference patch directory")->required();
  ev_cmd->add_option("--baseline", ev_baseline, "baseline patch directory (resampled if smaller)");
  ev_cmd->add_option("--data-range", ev.config.data_range, "PSNR/SSIM data range")->required();
  ev_cmd->add_option("--bins", ev.config.histogram_bins, "histogram bins")->capture_default_str();
  ev_cmd->add_option("--figure-patch", ev.config.figure_patches, "patch ids for figures (default: first)");
  ev_cmd->add_option("--out", ev.out_dir, "output directory")->required();

  // synth
  SynthArgs syn;
  syn.spec = DistortionSpec::identity(0);
  syn.spec.scale_factor = 3.0;
  std::optional<fs::path> syn_hr, syn_spec;
  std::vector<double> gain, bias, gamma, mixing;
  auto* syn_cmd = app.add_subcommand("synth", "synthetic distorted low-resolution pair with ground truth");
  syn_cmd->add_option("--hr", syn_hr, "ground-truth raster (default: generated scene)");
  syn_cmd->add_option("--width", syn.scene_width, "generated scene width")->capture_default_str();
  syn_cmd->add_option("--height", syn.scene_height, "generated scene height")->capture_default_str();
  syn_cmd->add_option("--bands", syn.scene_bands, "generated scene bands")->capture_default_str();
  syn_cmd->add_option("--scene-seed", syn.scene_seed, "generated scene seed")->capture_default_str();
  syn_cmd->add_option("--spec", syn_spec, "distortion spec JSON (flags below are ignored when given)");
  syn_cmd->add_option("--gain", gain, "per-band gain (default 1)");
  syn_cmd->add_option("--bias", bias, "per-band bias (default 0)");
  syn_cmd->add_option("--gamma", gamma, "per-band gamma");
  syn_cmd->add_option("--mixing", mixing, "row-major band mixing matrix");
  syn_cmd->add_option("--noise-sigma", syn.spec.noise_sigma, "additive Gaussian noise sigma")->capture_default_str();
  syn_cmd->add_option("--scale", syn.spec.scale_factor, "downscale factor")->capture_default_str();
  syn_cmd->add_option("--seed", syn.spec.seed, "noise seed")->capture_default_str();
  syn_cmd->add_option("--out", syn.out_dir, "output directory")->required();

  // pipeline
  std::optional<fs::path> config_file;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  auto* pipe_cmd = app.add_subcommand("pipeline", "reflectance, tiling, normalization, upscaling, alignment, evaluation");
  pipe_cmd->add_option("--config", config_file, "key = value config file");
  for (const auto& key : kConfigKeys) {
    std::string help = key.help;
    if (key.default_value && *key.default_value) help += std::string(" [default ") + key.default_value + "]";
    flag_options[key.name] = pipe_cmd->add_option(flag_name(key.name), flag_values[key.name], help);
  }
  pipe_cmd->footer("Every key may also be set in the config file or via HLSALIGN_<KEY>; flags win.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config", 2, {e.what()});
  } catch (const ConfigError& e) {
    return report_error("config", 2, e.problems());
  }

  try {
    set_max_threads(threads);
    if (*tile_cmd) {
      tile.split_seed = tile_seed;
      const auto m = cmd_tile(tile);
      std::cout << m.patches.size() << " patches (" << m.grid.rows << "x" << m.grid.cols << ") -> " << tile.out_dir.string() << "\n";
    } else if (*stats_cmd) {
      cmd_stats(stats);
    } else if (*refl_cmd) {
      refl.solar_zenith_deg = zenith_deg;
      cmd_reflectance(refl);
    } else if (*align_cmd) {
      cmd_align(align_args);
    } else if (*rs_cmd) {
      cmd_resample(rs);
    } else if (*ev_cmd) {
      ev.baseline = ev_baseline;
      const auto r = cmd_evaluate(ev);
      const auto& agg = r.corpus_prediction.aggregate;
      std::cout << "corpus psnr " << format_double(agg.psnr) << " ssim " << format_double(agg.ssim) << "\n";
    } else if (*syn_cmd) {
      syn.hr = syn_hr;
      if (syn_spec) {
        syn.spec = read_json(*syn_spec).get<DistortionSpec>();
      } else {
        const std::size_t nb = syn_hr ? probe_raster(*syn_hr).bands : syn.scene_bands;
        syn.spec.gain = gain.empty() ? std::vector<double>(nb, 1.0) : gain;
        syn.spec.bias = bias.empty() ? std::vector<double>(nb, 0.0) : bias;
        if (!gamma.empty()) syn.spec.gamma = gamma;
        if (!mixing.empty()) syn.spec.mixing = mixing;
      }
      cmd_synth(syn);
    } else if (*pipe_cmd) {
      std::vector<std::string> problems;
      std::vector<ConfigValues> layers;
      if (config_file) layers.push_back(load_config_file(*config_file, problems));
      layers.push_back(environment_overrides());
      ConfigValues flags;
      for (const auto& [key, opt] : flag_options)
        if (opt->count() > 0) flags[key] = flag_values[key];
      if (threads > 0 && !flags.count("threads")) flags["threads"] = std::to_string(threads);
      if (zenith_deg && !flags.count("solar_zenith_deg")) flags["solar_zenith_deg"] = format_double(*zenith_deg);
      layers.push_back(flags);
      const PipelineConfig config = resolve_pipeline_config(layers, problems);
      for (const auto& w : config.warnings) std::cerr << "warning: " << w << "\n";
      const auto result = cmd_pipeline(config);
      const auto& agg = result.evaluation.corpus_prediction.aggregate;
      std::cout << "corpus psnr " << format_double(agg.psnr) << " ssim " << format_double(agg.ssim) << " -> "
                << config.output_dir.string() << "\n";
    }
  } catch (const ConfigError& e) {
    return report_error("config", 2, e.problems());
  } catch (const DataError& e) {
    return report_error("data", 3, {e.what()});
  } catch (const nlohmann::json::exception& e) {
    return report_error("config", 2, {e.what()});
  } catch (const std::exception& e) {
    return report_error("internal", 4, {e.what()});
  }
  return 0;
}
