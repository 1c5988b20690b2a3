#include "synood/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <fstream>

using synood::read_text_file;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const synood::testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(SYNOOD_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

const char* kFastTrain = "--set train.epochs=2 --set 'train.hidden=[16,8]' --set train.learning_rate=0.01";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    synood::testing::TempDir dir;
    CHECK(run(dir, "").code == 1);
    CHECK(run(dir, "frobnicate").code == 1);
    CHECK(run(dir, "ingest").code == 1);  // --config is required
    CHECK(run(dir, "--version").code == 0);
  }

  TEST_CASE("config errors name the field") {
    synood::testing::TempDir dir;
    REQUIRE(run(dir, "init-config --out " + (dir / "c.json").string()).code == 0);
    auto r = run(dir, "ingest --config " + (dir / "c.json").string() + " --set train.learning_rate=-1");
    CHECK(r.code == 1);
    CHECK(r.err.find("\"field\":\"train.learning_rate\"") != std::string::npos);
    r = run(dir, "ingest --config " + (dir / "c.json").string() + " --set bogus=1");
    CHECK(r.code == 1);
    CHECK(r.err.find("bogus") != std::string::npos);
    CHECK(run(dir, "ingest --config " + (dir / "missing.json").string()).code == 1);
  }

  TEST_CASE("missing upstream exits 2 naming the stage") {
    synood::testing::TempDir dir;
    REQUIRE(run(dir, "gen-image-world --n 4 --out " + (dir / "w").string()).code == 0);
    const auto r = run(dir, "train --config " + (dir / "w/config.json").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("\"stage\":\"pair_filter\"") != std::string::npos);
  }

  TEST_CASE("pipeline end to end, then up to date") {
    synood::testing::TempDir dir;
    REQUIRE(run(dir, "gen-image-world --n 12 --seed 2 --out " + (dir / "w").string()).code == 0);
    const auto cfg = (dir / "w/config.json").string();
    auto r = run(dir, "pipeline --config " + cfg + " " + kFastTrain);
    REQUIRE(r.code == 0);
    CHECK(count(r.out, ": done") == 8);
    CHECK(r.out.find("FPR95") != std::string::npos);
    CHECK(r.err.find("\"ts_ms\"") != std::string::npos);
    r = run(dir, "pipeline --config " + cfg + " " + kFastTrain + " --concurrency 3");
    REQUIRE(r.code == 0);
    CHECK(count(r.out, ": up to date") == 8);
    r = run(dir, "pair-filter --config " + cfg + " " + kFastTrain + " --force");
    CHECK(r.code == 0);
    CHECK(count(r.out, ": done") == 1);
    CHECK(fs::exists(dir / "w/runs/evaluate"));
  }

  TEST_CASE("feature world generation and ablation") {
    synood::testing::TempDir dir;
    auto r = run(dir, "gen-feature-world --n-id 30 --n-ood 20 --contamination 0.5 --out " + (dir / "f").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("(10 contaminated)") != std::string::npos);
    CHECK(fs::file_size(dir / "f/id.synf") == 20 + 30 * (40 + 16 * 4));

    REQUIRE(run(dir, "init-config --out " + (dir / "c.json").string()).code == 0);
    r = run(dir, "ablate --config " + (dir / "c.json").string() + " --feature-world --axis sample_count --grid 20,40 " +
                     kFastTrain + " --set benchmark.n_id=40 --out " + (dir / "abl.csv").string());
    REQUIRE(r.code == 0);
    const auto csv = read_text_file(dir / "abl.csv");
    CHECK(csv.rfind("axis_value,fpr95,auroc,n_id,n_ood,threshold,seed,error\n", 0) == 0);
    CHECK(count(csv, "\n") == 3);
  }
}
