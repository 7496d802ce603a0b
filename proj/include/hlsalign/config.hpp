#pragma once

// Pipeline configuration.
//
// File format: one `key = value` per line, `#` starts a comment, blank lines
// ignored. Every key can be overridden by the environment variable
// HLSALIGN_<KEY> (upper case), and command-line flags override both.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hlsalign/align.hpp"
#include "hlsalign/dataset.hpp"
#include "hlsalign/error.hpp"
#include "hlsalign/format.hpp"
#include "hlsalign/resample.hpp"

namespace hlsalign {

namespace fs = std::filesystem;

using ConfigValues = std::map<std::string, std::string>;

struct ConfigKey {
  const char* name;
  const char* default_value;  ///< nullptr: no default
  const char* help;
};

inline constexpr ConfigKey kConfigKeys[] = {
    {"input_lr", nullptr, "low-resolution tile (GeoTIFF)"},
    {"input_hr", nullptr, "high-resolution tile (GeoTIFF)"},
    {"patch_lr", "128", "patch size on the low-resolution tile"},
    {"patch_hr", "384", "patch size on the high-resolution tile"},
    {"allow_patch_ratio", "false", "accept patch_hr != 3 * patch_lr (warns)"},
    {"radiometry", "", "radiometric parameter JSON for both tiles"},
    {"radiometry_lr", "", "radiometric parameter JSON for the low-resolution tile"},
    {"radiometry_hr", "", "radiometric parameter JSON for the high-resolution tile"},
    {"solar_zenith_deg", "", "overrides the solar zenith of the radiometry files"},
    {"normalization", "per_band", "global or per_band"},
    {"method", "hm", "alignment: none, hm or fdm"},
    {"kernel", "lanczos3", "upscaling kernel: lanczos3 or bicubic"},
    {"data_range", "", "PSNR/SSIM data range; empty uses the reference range"},
    {"histogram_bins", "256", "bins for stats and histogram CSVs"},
    {"figure_patches", "", "comma-separated patch ids for figures; empty uses the first"},
    {"predictions", "", "directory of external predictions (normalized space) replacing upscaling"},
    {"seed", "0", "seed for the train/val split"},
    {"val_fraction", "0.01", "validation share of the split"},
    {"output_dir", nullptr, "output directory"},
    {"threads", "0", "worker cap, 0 = all cores"},
};

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : kConfigKeys)
    if (name == k.name) return &k;
  return nullptr;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Parses key=value text. Syntax problems and unknown keys are appended to
/// `problems` with their line numbers.
inline ConfigValues parse_config_text(const std::string& text, const std::string& origin,
                                      std::vector<std::string>& problems) {
  ConfigValues values;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (!find_config_key(key)) {
      problems.push_back(where + ": unknown key '" + key + "'");
      continue;
    }
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

inline ConfigValues load_config_file(const fs::path& path, std::vector<std::string>& problems) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    problems.push_back("cannot read config file '" + path.string() + "'");
    return {};
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path.string(), problems);
}

inline std::string env_name(std::string_view key) {
  std::string name = "HLSALIGN_";
  for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

inline ConfigValues environment_overrides() {
  ConfigValues values;
  for (const auto& k : kConfigKeys)
    if (const char* v = std::getenv(env_name(k.name).c_str())) values[k.name] = v;
  return values;
}

struct PipelineConfig {
  fs::path input_lr;
  fs::path input_hr;
  std::size_t patch_lr = 128;
  std::size_t patch_hr = 384;
  bool allow_patch_ratio = false;
  fs::path radiometry_lr;
  fs::path radiometry_hr;
  std::optional<double> solar_zenith_deg;
  NormalizationMode normalization = NormalizationMode::per_band;
  AlignMethod method = AlignMethod::hm;
  ResampleKernel kernel = ResampleKernel::lanczos3;
  std::optional<double> data_range;
  std::size_t histogram_bins = kDefaultHistogramBins;
  std::vector<std::string> figure_patches;
  std::optional<fs::path> predictions;
  std::uint64_t seed = 0;
  double val_fraction = 0.01;
  fs::path output_dir;
  unsigned threads = 0;

  std::vector<std::string> warnings;
  ConfigValues resolved;  ///< final key/value view, defaults included
};

namespace detail {

inline bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
  return false;
}

template <class T>
bool parse_unsigned(const std::string& v, T& out) {
  if (v.empty() || v.front() == '-') return false;
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) return false;
    out = static_cast<T>(x);
    return static_cast<unsigned long long>(out) == x;
  } catch (const std::exception&) {
    return false;
  }
}

inline bool parse_real(const std::string& v, double& out) {
  try {
    out = parse_double(v);
    return std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

/// Builds a config from layered values (later layers win) and validates it,
/// reporting every problem at once. Referenced files must exist.
inline PipelineConfig resolve_pipeline_config(const std::vector<ConfigValues>& layers,
                                              std::vector<std::string> problems = {}) {
  ConfigValues v;
  for (const auto& k : kConfigKeys)
    if (k.default_value) v[k.name] = k.default_value;
  for (const auto& layer : layers)
    for (const auto& [key, value] : layer) {
      if (!find_config_key(key)) problems.push_back("unknown key '" + key + "'");
      else v[key] = value;
    }

  PipelineConfig c;
  c.resolved = v;
  auto get = [&](const char* key) -> std::string {
    const auto it = v.find(key);
    return it == v.end() ? std::string() : it->second;
  };
  auto bad = [&](const char* key, const std::string& why) {
    problems.push_back(std::string(key) + ": " + why + " (got '" + get(key) + "')");
  };

  auto require_file = [&](const char* key, fs::path& out) {
    const std::string s = get(key);
    if (s.empty()) {
      problems.push_back(std::string(key) + ": required");
      return;
    }
    out = s;
    if (!fs::is_regular_file(out)) problems.push_back(std::string(key) + ": file not found: " + s);
  };
  require_file("input_lr", c.input_lr);
  require_file("input_hr", c.input_hr);

  if (!detail::parse_unsigned(get("patch_lr"), c.patch_lr) || c.patch_lr == 0) bad("patch_lr", "must be a positive integer");
  if (!detail::parse_unsigned(get("patch_hr"), c.patch_hr) || c.patch_hr == 0) bad("patch_hr", "must be a positive integer");
  if (!detail::parse_bool(get("allow_patch_ratio"), c.allow_patch_ratio)) bad("allow_patch_ratio", "must be true or false");
  if (c.patch_lr > 0 && c.patch_hr > 0 && c.patch_hr != 3 * c.patch_lr) {
    const std::string msg = "patch_hr " + std::to_string(c.patch_hr) + " is not 3 x patch_lr " + std::to_string(c.patch_lr);
    if (c.allow_patch_ratio) c.warnings.push_back(msg);
    else problems.push_back(msg + " (set allow_patch_ratio = true to accept)");
  }

  const std::string both = get("radiometry");
  c.radiometry_lr = get("radiometry_lr").empty() ? both : get("radiometry_lr");
  c.radiometry_hr = get("radiometry_hr").empty() ? both : get("radiometry_hr");
  for (const auto& [key, p] : {std::pair{"radiometry_lr", &c.radiometry_lr}, std::pair{"radiometry_hr", &c.radiometry_hr}})
    if (!p->empty() && !fs::is_regular_file(*p))
      problems.push_back(std::string(key) + ": radiometric parameter file not found: " + p->string());
  if (const std::string z = get("solar_zenith_deg"); !z.empty()) {
    double deg = 0;
    if (!detail::parse_real(z, deg) || deg < 0.0 || deg >= 90.0) bad("solar_zenith_deg", "must be in [0, 90)");
    else c.solar_zenith_deg = deg;
  }

  try {
    c.normalization = parse_normalization_mode(get("normalization"));
  } catch (const ConfigError& e) {
    problems.push_back(std::string("normalization: ") + e.what());
  }
  try {
    c.method = parse_align_method(get("method"));
  } catch (const ConfigError& e) {
    problems.push_back(std::string("method: ") + e.what());
  }
  try {
    c.kernel = parse_resample_kernel(get("kernel"));
  } catch (const ConfigError& e) {
    problems.push_back(std::string("kernel: ") + e.what());
  }
  if (const std::string r = get("data_range"); !r.empty()) {
    double x = 0;
    if (!detail::parse_real(r, x) || !(x > 0.0)) bad("data_range", "must be a positive number");
    else c.data_range = x;
  }
  if (!detail::parse_unsigned(get("histogram_bins"), c.histogram_bins) || c.histogram_bins == 0)
    bad("histogram_bins", "must be a positive integer");
  {
    const std::string list = get("figure_patches");
    std::size_t start = 0;
    while (start < list.size()) {
      const auto comma = list.find(',', start);
      const std::string id = trim(list.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!id.empty()) c.figure_patches.push_back(id);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (const std::string p = get("predictions"); !p.empty()) {
    c.predictions = fs::path(p);
    if (!fs::is_directory(*c.predictions)) problems.push_back("predictions: directory not found: " + p);
  }
  if (!detail::parse_unsigned(get("seed"), c.seed)) bad("seed", "must be a non-negative integer");
  if (!detail::parse_real(get("val_fraction"), c.val_fraction) || c.val_fraction < 0.0 || c.val_fraction > 1.0)
    bad("val_fraction", "must be in [0, 1]");
  if (get("output_dir").empty()) problems.push_back("output_dir: required");
  else c.output_dir = get("output_dir");
  if (!detail::parse_unsigned(get("threads"), c.threads)) bad("threads", "must be a non-negative integer");

  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

/// Hash of the resolved config without output_dir and threads, which do not
/// affect results.
inline std::string config_hash(const PipelineConfig& c) {
  std::string canon;
  for (const auto& [key, value] : c.resolved) {
    if (key == "output_dir" || key == "threads") continue;
    canon += key + "=" + value + "\n";
  }
  return hex64(fnv1a64(canon));
}

}  // namespace hlsalign
