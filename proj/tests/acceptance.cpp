// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Tolerances are pinned below.

#include "synood/benchmark.hpp"
#include "synood/config.hpp"
#include "synood/evaluation.hpp"
#include "synood/io.hpp"
#include "synood/mlp.hpp"
#include "synood/mock_backends.hpp"
#include "synood/pipeline.hpp"
#include "synood/random.hpp"
#include "synood/refinement.hpp"
#include "synood/synthesis.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace synood;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 5;

constexpr double kAurocTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kBoundaryMinAuroc = 0.99;
constexpr double kBoundaryMaxFpr = 0.05;
constexpr double kSampleCountMaxGap = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- metric oracles ----

Outcome metric_oracles() {
  Rng rng(8675309);
  double worst_auroc = 0.0;
  int fpr_mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto draw = [&] {
      std::vector<double> v(1 + rng.below(200));
      for (auto& x : v) x = rng.bernoulli(0.3) ? double(rng.below(6)) / 5.0 : rng.uniform();
      return v;
    };
    const auto id = draw(), ood = draw();
    worst_auroc = std::max(worst_auroc, std::abs(auroc(id, ood) - testing::brute_auroc(id, ood)));
    const auto fast = fpr_at_tpr(id, ood);
    const auto slow = testing::brute_fpr(id, ood, 0.95);
    if (fast.fpr != slow.fpr || fast.threshold != slow.threshold) ++fpr_mismatches;
  }
  return {worst_auroc <= kAurocTol && fpr_mismatches == 0,
          "max |auroc - oracle| = " + fmt("%.3g", worst_auroc) + ", fpr mismatches = " +
              std::to_string(fpr_mismatches)};
}

// ---- gradients ----

Outcome gradient_check() {
  Rng rng(4242);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    const std::size_t d = 1 + rng.below(8);
    auto m = init_model(d, {1 + rng.below(8), 1 + rng.below(8)}, 1000 + net);
    for (auto& b : m.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.1, 0.1);
    }
    auto cols = [&](std::size_t n) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
      return x;
    };
    const Eigen::MatrixXd id = cols(1 + rng.below(6)), ood = cols(1 + rng.below(6));
    Gradients g;
    batch_loss(m, id, ood, &g);
    const auto analytic = flatten_gradients(g);
    auto theta = flatten_parameters(m);
    constexpr double h = 1e-6;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double keep = theta[k];
      theta[k] = keep + h;
      assign_parameters(m, theta);
      const double up = batch_loss(m, id, ood);
      theta[k] = keep - h;
      assign_parameters(m, theta);
      const double down = batch_loss(m, id, ood);
      theta[k] = keep;
      assign_parameters(m, theta);
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(numeric - analytic[k]) / std::max(1e-7, std::abs(numeric) + std::abs(analytic[k]));
      worst = std::max(worst, rel);
    }
  }
  return {worst < kGradRelTol, "max relative error " + fmt("%.3g", worst)};
}

// ---- feature benchmark ----

Outcome boundary_learning() {
  std::ostringstream detail;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    FeatureExperiment e;
    e.world.separation = 6.0;
    e.world.n_id = 500;
    e.world.n_ood = 500;
    e.world.seed = seed;
    e.train = TrainConfig{};
    const auto r = run_feature_experiment(e);
    ok = ok && r.auroc >= kBoundaryMinAuroc && r.fpr95 <= kBoundaryMaxFpr;
    detail << (seed ? "; " : "") << "seed " << seed << ": auroc " << fmt("%.4f", r.auroc) << " fpr95 "
           << fmt("%.4f", r.fpr95);
  }
  return {ok, detail.str()};
}

Outcome filter_effectiveness() {
  double on = 0.0, off = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    FeatureExperiment e;
    e.world.separation = 3.0;
    e.world.contamination = 0.3;
    e.world.seed = seed;
    e.filter = FilterConfig{};
    on += run_feature_experiment(e).fpr95 / kSeeds;
    e.filter.reset();
    off += run_feature_experiment(e).fpr95 / kSeeds;
  }
  return {on < off, "mean fpr95 filter on " + fmt("%.4f", on) + " vs off " + fmt("%.4f", off)};
}

Outcome sample_count_stability() {
  PipelineConfig c;
  c.benchmark.world.separation = 4.0;
  c.benchmark.world.n_id = 1000;
  c.ablation.axis = "sample_count";
  c.ablation.grid = {"2000", "14000"};
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    c.seed = seed;
    const auto rows = run_benchmark_ablation(c);
    for (const auto& row : rows) {
      if (!row.report) return {false, "grid point " + row.axis_value + " failed: " + row.error};
    }
    small += rows[0].report->fpr95 / kSeeds;
    large += rows[1].report->fpr95 / kSeeds;
  }
  return {std::abs(small - large) < kSampleCountMaxGap,
          "mean fpr95 2k " + fmt("%.4f", small) + " vs 14k " + fmt("%.4f", large)};
}

// ---- image world ----

struct ImageWorldRuns {
  testing::TempDir dir;
  PipelineConfig config;
  std::unique_ptr<Pipeline> serial, parallel;
};

ImageWorldRuns& image_world() {
  static const auto runs = [] {
    auto r = std::make_unique<ImageWorldRuns>();
    generate_image_world(100, 11, r->dir / "world");
    r->config = image_world_config(100);
    r->config.base_dir = r->dir / "world";
    r->config.seed = 11;
    r->config.train.seed = 11;
    r->config.benchmark.world.seed = 11;
    return r;
  }();
  return *runs;
}

std::map<std::string, std::string> all_digests(const Pipeline& p) {
  std::map<std::string, std::string> out;
  for (auto s : kStages) {
    for (const auto& f : stage_outputs(s)) {
      const auto path = p.stage_dir(s) / f;
      out[std::string(stage_name(s)) + "/" + f] = fs::is_directory(path) ? "dir" : file_digest(path);
    }
  }
  // Images are compared one by one.
  const auto images = p.stage_dir(Stage::synthesize) / "images";
  for (const auto& entry : fs::directory_iterator(images)) {
    out["images/" + entry.path().filename().string()] = file_digest(entry.path());
  }
  return out;
}

Outcome end_to_end_determinism() {
  auto& w = image_world();
  EvalReport reports[2];
  std::unique_ptr<Pipeline>* slots[2] = {&w.serial, &w.parallel};
  const std::size_t workers[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    auto cfg = w.config;
    set_concurrency(cfg, workers[i]);
    cfg.output_root = (w.dir / ("runs_c" + std::to_string(workers[i]))).string();
    *slots[i] = std::make_unique<Pipeline>(cfg);
    reports[i] = (*slots[i])->run_all();
  }
  const auto a = all_digests(*w.serial), b = all_digests(*w.parallel);
  std::size_t differing = 0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second != v) ++differing;
  }
  const bool same_report = reports[0].fpr95 == reports[1].fpr95 && reports[0].auroc == reports[1].auroc &&
                           reports[0].threshold == reports[1].threshold && reports[0].n_id == reports[1].n_id &&
                           reports[0].n_ood == reports[1].n_ood;
  const bool ok = differing == 0 && a.size() == b.size() && same_report && reports[0].n_ood > 0;
  return {ok, std::to_string(a.size()) + " artifacts compared, " + std::to_string(differing) +
                  " differ; report fpr95 " + fmt("%.4f", reports[0].fpr95) + " auroc " +
                  fmt("%.4f", reports[0].auroc)};
}

Outcome context_clamp() {
  auto& w = image_world();
  if (!w.serial) return {false, "pipeline run missing"};
  const auto synth = w.serial->stage_dir(Stage::synthesize);
  std::size_t images = 0, pixels = 0, mismatched = 0;
  for (const auto& e : read_edit_manifest(synth / "edits.jsonl")) {
    if (e.status == EditStatus::failed) continue;
    const auto src = read_png(e.job.source.image_path);
    const auto out = read_png(synth / "images" / e.edited_image_path);
    if (src.width != out.width || src.height != out.height) return {false, "size mismatch"};
    const auto cols = pixel_columns(e.edit_mask_box, src.width);
    const auto rows = pixel_rows(e.edit_mask_box, src.height);
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        if (x >= cols.begin && x < cols.end && y >= rows.begin && y < rows.end) continue;
        ++pixels;
        if (!std::equal(src.pixel(x, y), src.pixel(x, y) + 3, out.pixel(x, y))) ++mismatched;
      }
    }
    ++images;
  }
  return {images > 0 && mismatched == 0, std::to_string(images) + " images, " + std::to_string(pixels) +
                                             " outside pixels, " + std::to_string(mismatched) + " differ"};
}

Outcome geometry_gate() {
  auto& w = image_world();
  if (!w.serial) return {false, "pipeline run missing"};
  const auto synth = w.serial->stage_dir(Stage::synthesize);
  const auto edits = read_edit_manifest(synth / "edits.jsonl");
  const RefineConfig cfg;
  std::ostringstream detail;
  double prev = 2.0;
  bool monotone = true;
  std::size_t gate_violations = 0;
  for (double jitter : {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    auto world = MockWorld::with_defaults(w.config.backend.mock.world_seed);
    world.segment_jitter = jitter;
    MockSegmentBackend seg(world);
    const auto out = refine_boxes(edits, seg, cfg, synth / "images");
    std::size_t total = 0, accepted = 0;
    for (const auto& r : out) {
      if (r.status == EditStatus::failed) continue;
      ++total;
      if (r.status != EditStatus::refined) continue;
      ++accepted;
      if (!r.refined_box || !(iou(*r.refined_box, r.edit_mask_box) > cfg.iou_threshold_gamma)) ++gate_violations;
    }
    const double rate = total ? double(accepted) / double(total) : 0.0;
    monotone = monotone && rate <= prev;
    prev = rate;
    detail << (jitter > 0 ? ", " : "") << fmt("%.2f", jitter) << "->" << fmt("%.3f", rate);
  }
  return {monotone && gate_violations == 0,
          "acceptance by jitter " + detail.str() + "; gate violations " + std::to_string(gate_violations)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;  // 0 = none
  };
  const std::vector<Criterion> criteria{
      {"metric-oracles", metric_oracles, 5},
      {"gradient-check", gradient_check, 10},
      {"boundary-learning", boundary_learning, 60},
      {"filter-effectiveness", filter_effectiveness, 180},
      {"sample-count-stability", sample_count_stability, 0},
      {"end-to-end-determinism", end_to_end_determinism, 0},
      {"context-clamp", context_clamp, 0},
      {"geometry-gate", geometry_gate, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.time_limit_s) + " s limit";
    }
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
