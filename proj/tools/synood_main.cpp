// synood command-line front end. Structured events go to stderr as JSON lines,
// human-readable summaries to stdout.

#include "synood/backend_server.hpp"
#include "synood/benchmark.hpp"
#include "synood/config.hpp"
#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/mock_backends.hpp"
#include "synood/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace synood;

namespace {

std::mutex log_mutex;

void log_event(json event) {
  event["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  if (!event.contains("level")) event["level"] = "info";
  std::lock_guard lock(log_mutex);
  std::cerr << event.dump() << '\n';
}

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::vector<std::string> overrides;
  std::string backend;
  std::size_t concurrency = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Pipeline config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "Override the pipeline seed");
  cmd->add_flag("--force", o.force, "Re-run even when outputs are up to date");
  cmd->add_option("--set", o.overrides, "Override a config field, KEY=VALUE (repeatable)")->take_all();
  cmd->add_option("--backend", o.backend, "Backend kind")->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--concurrency", o.concurrency, "Worker count for every stage")->check(CLI::PositiveNumber);
}

PipelineConfig load_with_overrides(const CommonOptions& o) {
  const fs::path path = fs::absolute(o.config_path);
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
  for (const auto& s : o.overrides) apply_override(doc, s);
  auto config = config_from_json(doc);
  config.base_dir = path.parent_path();
  if (o.seed) config.seed = *o.seed;
  if (!o.backend.empty()) config.backend.kind = o.backend;
  if (o.concurrency > 0) set_concurrency(config, o.concurrency);
  config.train.seed = config.seed;
  config.benchmark.world.seed = config.seed;
  config.validate();
  return config;
}

void print_outcome(const StageOutcome& out) {
  std::cout << stage_name(out.stage) << (out.up_to_date ? ": up to date" : ": done") << "  fingerprint "
            << out.fingerprint << "\n  dir " << out.dir.string() << "\n  " << out.counts.dump() << "\n";
}

void print_report(const EvalReport& r) {
  std::printf("FPR95 %.4f  AUROC %.4f  (n_id %zu, n_ood %zu, threshold %.6g, seed %llu)\n", r.fpr95, r.auroc, r.n_id,
              r.n_ood, r.threshold, static_cast<unsigned long long>(r.seed));
}

std::atomic<bool> stop_requested{false};

void on_signal(int) { stop_requested = true; }

int fail(const std::exception& e) {
  const int code = exit_code_for(e);
  json event{{"level", "error"}, {"event", "error"}, {"exit_code", code}, {"message", e.what()}};
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) event["field"] = c->field();
  if (const auto* d = dynamic_cast<const DependencyError*>(&e)) event["stage"] = d->stage();
  log_event(event);
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic outlier pipeline for OOD object detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "synood 0.1.0");

  CommonOptions common;
  std::vector<std::pair<Stage, CLI::App*>> stage_cmds;
  for (auto stage : kStages) {
    std::string name(stage_name(stage));
    auto* cmd = app.add_subcommand(name, "Run the " + name + " stage");
    if (name.find('_') != std::string::npos) {
      std::string dashed = name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      cmd->alias(dashed);
    }
    add_common(cmd, common);
    stage_cmds.emplace_back(stage, cmd);
  }

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage in order");
  add_common(pipeline_cmd, common);

  std::string axis;
  std::string grid;
  bool feature_world = false;
  std::string ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep one knob and write an ablation CSV");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--axis", axis, "sample_count | concept_count | filter_on_off | refiner_on_off");
  ablate_cmd->add_option("--grid", grid, "Comma-separated grid values");
  ablate_cmd->add_flag("--feature-world", feature_world, "Sweep the synthetic feature benchmark instead");
  ablate_cmd->add_option("--out", ablate_out, "CSV path (default <output_root>/ablation/<axis>.csv)");

  std::string world_dir;
  std::size_t n_images = 100, n_eval = 0;
  std::uint64_t world_seed = 0;
  auto* gen_images = app.add_subcommand("gen-image-world", "Write a procedural detection dataset and config");
  gen_images->add_option("--out", world_dir, "Output directory")->required();
  gen_images->add_option("--n", n_images, "Training images")->check(CLI::PositiveNumber);
  gen_images->add_option("--eval", n_eval, "Images per eval split (default max(10, n/2))");
  gen_images->add_option("--seed", world_seed, "World seed");

  SyntheticSpec spec;
  auto* gen_features = app.add_subcommand("gen-feature-world", "Write Gaussian feature archives and pairs");
  gen_features->add_option("--out", world_dir, "Output directory")->required();
  gen_features->add_option("--dim", spec.feature_dim, "Feature dimension");
  gen_features->add_option("--n-id", spec.n_id, "ID samples");
  gen_features->add_option("--n-ood", spec.n_ood, "OOD samples");
  gen_features->add_option("--separation", spec.separation, "Mean distance in units of scale");
  gen_features->add_option("--contamination", spec.contamination, "Fraction of near-duplicate OOD samples");
  gen_features->add_option("--seed", spec.seed, "World seed");

  std::string host = "127.0.0.1";
  int port = 8080;
  MockBackendConfig mock;
  auto* serve = app.add_subcommand("serve-mock", "Serve the mock backends over HTTP");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--world-seed", mock.world_seed, "Mock world seed");
  serve->add_option("--segment-jitter", mock.segment_jitter, "Mask box growth per side");
  serve->add_option("--inpaint-failure-rate", mock.inpaint_failure_rate, "Fraction of inpaint calls failing");

  std::string init_out;
  auto* init = app.add_subcommand("init-config", "Write a config file with every default");
  init->add_option("--out", init_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    for (auto& [stage, cmd] : stage_cmds) {
      if (!cmd->parsed()) continue;
      Pipeline p(load_with_overrides(common), log_event);
      print_outcome(p.run_stage(stage, common.force));
      return 0;
    }

    if (pipeline_cmd->parsed()) {
      Pipeline p(load_with_overrides(common), log_event);
      for (auto stage : kStages) print_outcome(p.run_stage(stage, common.force));
      print_report(read_report_json(p.stage_dir(Stage::evaluate) / "report.jsonl"));
      return 0;
    }

    if (ablate_cmd->parsed()) {
      auto config = load_with_overrides(common);
      if (!axis.empty()) config.ablation.axis = axis;
      if (!grid.empty()) {
        config.ablation.grid.clear();
        std::stringstream ss(grid);
        for (std::string v; std::getline(ss, v, ',');) {
          if (!v.empty()) config.ablation.grid.push_back(v);
        }
      }
      config.validate();
      const auto rows = feature_world ? run_benchmark_ablation(config) : run_pipeline_ablation(config, log_event);
      const auto csv = ablation_csv(rows);
      const fs::path out = ablate_out.empty() ? config.resolve(config.output_root) / "ablation" /
                                                    (config.ablation.axis + (feature_world ? "_features" : "") + ".csv")
                                              : fs::path(ablate_out);
      write_file_atomic(out, csv);
      std::cout << csv << "written to " << out.string() << "\n";
      for (const auto& r : rows) {
        if (!r.error.empty()) log_event({{"level", "warn"}, {"event", "grid_point_failed"}, {"value", r.axis_value},
                                         {"message", r.error}});
      }
      return 0;
    }

    if (gen_images->parsed()) {
      generate_image_world(n_images, world_seed, world_dir, n_eval);
      auto config = image_world_config(n_images);
      config.seed = world_seed;
      save_config(fs::path(world_dir) / "config.json", config);
      std::cout << "image world with " << n_images << " training images in " << world_dir << "\n  config "
                << (fs::path(world_dir) / "config.json").string() << "\n";
      return 0;
    }

    if (gen_features->parsed()) {
      const auto world = generate_feature_world(spec);
      write_feature_world(world_dir, world);
      std::size_t bad = 0;
      for (bool b : world.contaminated) bad += b ? 1 : 0;
      std::cout << "feature world: " << world.id_records.size() << " ID, " << world.ood_records.size() << " OOD ("
                << bad << " contaminated), dim " << world.dim << " in " << world_dir << "\n";
      return 0;
    }

    if (serve->parsed()) {
      PipelineConfig c;
      c.backend.mock = mock;
      c.validate();
      const auto b = make_backends(c);
      BackendServer server(b.concepts, b.inpaint, b.segment);
      const int bound = server.start(host, port);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      log_event({{"event", "serving"}, {"host", host}, {"port", bound}});
      std::cout << server.base_url() << std::endl;
      while (!stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }

    if (init->parsed()) {
      save_config(init_out, PipelineConfig{});
      std::cout << "wrote " << init_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 4;
}
