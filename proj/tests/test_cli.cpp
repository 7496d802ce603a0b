#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "hlsalign/raster_io.hpp"
#include "test_support.hpp"

using testsupport::read_file;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

// Runs the CLI inside `dir`; `env` is prepended verbatim (e.g. "HLSALIGN_METHOD=fdm").
Run cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + dir.path().string() + "' && " + env + " '" HLSALIGN_CLI_PATH "' " + args +
                          " > cli.out 2> cli.err";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(dir / "cli.out");
  r.err = read_file(dir / "cli.err");
  return r;
}

nlohmann::json error_json(const Run& r) { return nlohmann::json::parse(r.err); }

double corpus_psnr(const fs::path& run_dir) {
  const auto j = nlohmann::json::parse(read_file(run_dir / "report.json"));
  return j["corpus"]["prediction"]["aggregate"]["psnr"].get<double>();
}

// Synthetic 768x768 hr / 256x256 lr pair with a per-band affine distortion.
void make_pair(const TempDir& dir) {
  const auto r = cli(dir, "synth --width 768 --height 768 --bands 3 --gain 1.3 0.8 1.1 --bias 0.02 -0.03 0.05 "
                          "--noise-sigma 0.003 --seed 4 --out pair");
  ASSERT_EQ(r.code, 0) << r.err;
}

std::string pipeline_args(const std::string& method, const std::string& out) {
  return "pipeline --input-lr pair/lr.tif --input-hr pair/hr.tif --method " + method + " --output-dir " + out;
}

}  // namespace

TEST(Cli, VersionAndHelp) {
  TempDir tmp;
  const auto r = cli(tmp, "--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(r.out.empty());
  EXPECT_EQ(cli(tmp, "pipeline --help").code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir tmp;
  auto r = cli(tmp, "");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_json(r)["error"]["kind"], "config");
  r = cli(tmp, "resample --input missing.tif --out x.tif --scale 2");
  EXPECT_EQ(r.code, 2);
  r = cli(tmp, "synth --out s --method nope");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, DataErrorsExitThree) {
  TempDir tmp;
  make_pair(tmp);
  ASSERT_EQ(cli(tmp, "tile --input pair/hr.tif --patch-size 128 --out ref").code, 0);
  ASSERT_EQ(cli(tmp, "tile --input pair/hr.tif --patch-size 128 --out pred").code, 0);
  fs::remove(tmp / "pred" / "manifest.json");
  fs::remove(tmp / "pred" / "r002_c003.tif");
  fs::remove(tmp / "pred" / "r005_c005.tif");
  const auto r = cli(tmp, "evaluate --predictions pred --reference ref --data-range 1 --out ev");
  EXPECT_EQ(r.code, 3);
  const auto problems = error_json(r)["error"]["problems"].dump();
  EXPECT_NE(problems.find("r002_c003"), std::string::npos);
  EXPECT_NE(problems.find("r005_c005"), std::string::npos);

  // int16 tile without radiometry cannot be normalized as reflectance.
  hlsalign::write_raster(hlsalign::make_int16_raster(4, 4, {std::vector<std::int16_t>(16, 7)}), tmp / "dn.tif",
                         hlsalign::SampleEncoding::int16_dn);
  EXPECT_EQ(cli(tmp, "align --source dn.tif --reference pair/hr.tif --out a.tif").code, 3);
}

TEST(Cli, MissingRadiometryFileIsNamed) {
  TempDir tmp;
  make_pair(tmp);
  const auto r = cli(tmp, pipeline_args("hm", "run") + " --radiometry-lr params/absent_lr.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("params/absent_lr.json"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(tmp / "run" / "report.json"));
}

TEST(Cli, ReportsEveryConfigProblemAtOnce) {
  TempDir tmp;
  std::ofstream(tmp / "bad.cfg") << "# broken\nmethod = fancy\nbogus = 1\npatch_hr = 300\nno equals sign\n";
  const auto r = cli(tmp, "pipeline --config bad.cfg --input-lr nope.tif");
  ASSERT_EQ(r.code, 2);
  const auto problems = error_json(r)["error"]["problems"];
  const std::string all = problems.dump();
  EXPECT_GE(problems.size(), 6u);
  for (const char* needle : {"bad.cfg:3", "bogus", "bad.cfg:5", "fancy", "patch_hr 300", "nope.tif", "input_hr",
                             "output_dir"})
    EXPECT_NE(all.find(needle), std::string::npos) << needle << " in " << all;
}

TEST(Cli, PatchRatioOverrideWarns) {
  TempDir tmp;
  make_pair(tmp);
  const auto r = cli(tmp, pipeline_args("none", "run") + " --patch-hr 300 --allow-patch-ratio true");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, LayersFileEnvFlags) {
  TempDir tmp;
  make_pair(tmp);
  std::ofstream(tmp / "run.cfg") << "input_lr = pair/lr.tif\ninput_hr = pair/hr.tif\nmethod = none\n";
  auto method_of = [&](const std::string& dir) {
    return nlohmann::json::parse(read_file(tmp / dir / "report.json"))["config"]["method"].get<std::string>();
  };
  ASSERT_EQ(cli(tmp, "pipeline --config run.cfg --output-dir a").code, 0);
  EXPECT_EQ(method_of("a"), "none");
  ASSERT_EQ(cli(tmp, "pipeline --config run.cfg --output-dir b", "HLSALIGN_METHOD=fdm").code, 0);
  EXPECT_EQ(method_of("b"), "fdm");
  ASSERT_EQ(cli(tmp, "pipeline --config run.cfg --output-dir c --method hm", "HLSALIGN_METHOD=fdm").code, 0);
  EXPECT_EQ(method_of("c"), "hm");
  EXPECT_EQ(cli(tmp, "pipeline --config run.cfg --output-dir d", "HLSALIGN_METHOD=bad").code, 2);
}

TEST(Cli, AlignmentBeatsNoAlignment) {
  TempDir tmp;
  make_pair(tmp);
  for (const char* m : {"none", "hm", "fdm"}) ASSERT_EQ(cli(tmp, pipeline_args(m, m)).code, 0) << m;
  EXPECT_GT(corpus_psnr(tmp / "hm"), corpus_psnr(tmp / "none"));
  EXPECT_GT(corpus_psnr(tmp / "fdm"), corpus_psnr(tmp / "none"));
  EXPECT_TRUE(fs::exists(tmp / "fdm" / "align" / "transforms.json"));
  EXPECT_TRUE(fs::exists(tmp / "hm" / "evaluation" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(tmp / "hm" / "split.json"));
}

TEST(Cli, PipelineIsDeterministicAcrossRunsAndThreads) {
  TempDir tmp;
  make_pair(tmp);
  ASSERT_EQ(cli(tmp, "--threads 1 " + pipeline_args("fdm", "t1")).code, 0);
  ASSERT_EQ(cli(tmp, "--threads 8 " + pipeline_args("fdm", "t8")).code, 0);
  ASSERT_EQ(cli(tmp, "--threads 8 " + pipeline_args("fdm", "t8b")).code, 0);
  for (const char* rel : {"report.json", "evaluation/metrics.csv", "evaluation/summary.json",
                          "align/transforms.json", "predictions/r001_c000.tif", "split.json", "stats/lr.json"}) {
    const auto a = read_file(tmp / "t1" / rel);
    ASSERT_FALSE(a.empty()) << rel;
    EXPECT_EQ(a, read_file(tmp / "t8" / rel)) << rel;
    EXPECT_EQ(a, read_file(tmp / "t8b" / rel)) << rel;
  }
}

TEST(Cli, TileCutsFullGrid) {
  TempDir tmp;
  hlsalign::write_raster(
      hlsalign::make_int16_raster(3660, 3660, {std::vector<std::int16_t>(3660u * 3660u, 1200)}), tmp / "tile.tif",
      hlsalign::SampleEncoding::int16_dn);
  const auto r = cli(tmp, "tile --input tile.tif --patch-size 128 --out patches --split-seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = nlohmann::json::parse(read_file(tmp / "patches" / "manifest.json"));
  EXPECT_EQ(manifest["patches"].size(), 784u);
  std::size_t tifs = 0;
  for (const auto& e : fs::directory_iterator(tmp / "patches")) tifs += e.path().extension() == ".tif";
  EXPECT_EQ(tifs, 784u);
  const auto split = nlohmann::json::parse(read_file(tmp / "patches" / "split.json"));
  EXPECT_EQ(split["train"].size() + split["val"].size(), 784u);
}

TEST(Cli, SynthWritesGroundTruthAndManifest) {
  TempDir tmp;
  ASSERT_EQ(cli(tmp, "synth --width 60 --height 60 --bands 2 --scale 3 --out s").code, 0);
  const auto lr = hlsalign::read_raster(tmp / "s" / "lr.tif");
  EXPECT_EQ(lr.width(), 20u);
  EXPECT_EQ(hlsalign::read_raster(tmp / "s" / "hr.tif").band_count(), 2u);
  const auto m = nlohmann::json::parse(read_file(tmp / "s" / "manifest.json"));
  EXPECT_EQ(m["distortion"]["gain"].size(), 2u);
}
