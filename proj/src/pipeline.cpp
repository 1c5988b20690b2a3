#include "synood/pipeline.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/io.hpp"
#include "synood/json_io.hpp"
#include "synood/mock_backends.hpp"
#include "synood/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <map>

namespace synood {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::imagine: return "imagine";
    case Stage::synthesize: return "synthesize";
    case Stage::refine: return "refine";
    case Stage::extract: return "extract";
    case Stage::pair_filter: return "pair_filter";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

Stage stage_from_name(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto s : kStages) {
    if (stage_name(s) == key) return s;
  }
  throw ArgumentError("unknown stage '" + std::string(name) + "'");
}

std::vector<std::string> stage_outputs(Stage stage) {
  switch (stage) {
    case Stage::ingest:
      return {"records.jsonl", "candidates.jsonl", "vocabulary.json", "eval_id.jsonl", "eval_ood.jsonl"};
    case Stage::imagine: return {"concepts.json"};
    case Stage::synthesize: return {"edits.jsonl", "images"};
    case Stage::refine: return {"edits.jsonl"};
    case Stage::extract: return {"id.synf", "edit.synf", "eval_id.synf", "eval_ood.synf"};
    case Stage::pair_filter: return {"pairs.jsonl", "edits.jsonl", "ood_train.synf"};
    case Stage::train: return {"model.synm", "loss_curve.csv"};
    case Stage::evaluate: return {"report.csv", "report.jsonl"};
  }
  return {};
}

namespace {

std::vector<Stage> upstream_of(Stage stage) {
  switch (stage) {
    case Stage::ingest: return {};
    case Stage::imagine: return {Stage::ingest};
    case Stage::synthesize: return {Stage::ingest, Stage::imagine};
    case Stage::refine: return {Stage::synthesize};
    case Stage::extract: return {Stage::ingest, Stage::synthesize, Stage::refine};
    case Stage::pair_filter: return {Stage::extract, Stage::refine};
    case Stage::train: return {Stage::extract, Stage::pair_filter};
    case Stage::evaluate: return {Stage::extract, Stage::train};
  }
  return {};
}

std::size_t index_of(Stage s) { return static_cast<std::size_t>(s); }

std::string input_digest(const fs::path& path) {
  if (path.empty()) return "";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return "missing";
  return file_digest(path);
}

/// Digest of a file, or of every file below a directory (sorted by relative path).
std::string output_digest(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), path).generic_string(), file_digest(e.path()));
    }
    std::sort(entries.begin(), entries.end());
    Fnv1a h;
    for (const auto& [name, digest] : entries) h.update(name).update(digest);
    return to_hex(h.digest());
  }
  if (!fs::is_regular_file(path, ec)) return "";
  return file_digest(path);
}

json backend_slice(const BackendConfig& b, std::string_view role) {
  if (b.kind == "http") {
    const auto& e = role == "concepts" ? b.concepts : role == "inpaint" ? b.inpaint : b.segment;
    return {{"kind", "http"}, {"base_url", e.base_url}};
  }
  json j{{"kind", "mock"}, {"world_seed", b.mock.world_seed}};
  if (role == "concepts") j["failure_rate"] = b.mock.concept_failure_rate;
  if (role == "inpaint") j["failure_rate"] = b.mock.inpaint_failure_rate;
  if (role == "segment") {
    j["jitter"] = b.mock.segment_jitter;
    j["failure_rate"] = b.mock.segment_failure_rate;
  }
  return j;
}

std::vector<FeatureRecord> features_of(const fs::path& path) { return read_feature_archive(path); }

std::string write_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

BackendSet make_backends(const PipelineConfig& config) {
  if (config.backend.kind == "http") {
    return {std::make_shared<HttpBackend>(config.backend.concepts),
            std::make_shared<HttpBackend>(config.backend.inpaint),
            std::make_shared<HttpBackend>(config.backend.segment)};
  }
  auto world = MockWorld::with_defaults(config.backend.mock.world_seed);
  world.concept_failure_rate = config.backend.mock.concept_failure_rate;
  world.inpaint_failure_rate = config.backend.mock.inpaint_failure_rate;
  world.segment_jitter = config.backend.mock.segment_jitter;
  world.segment_failure_rate = config.backend.mock.segment_failure_rate;
  return {std::make_shared<MockConceptBackend>(world), std::make_shared<MockInpaintBackend>(world),
          std::make_shared<MockSegmentBackend>(world)};
}

Pipeline::Pipeline(PipelineConfig config, EventSink sink) : config_(std::move(config)), sink_(std::move(sink)) {
  config_.train.seed = config_.seed;
  config_.benchmark.world.seed = config_.seed;
  config_.validate();
}

void Pipeline::set_backends(BackendSet backends) { backends_ = std::move(backends); }

BackendSet& Pipeline::backends() {
  if (!backends_) backends_ = make_backends(config_);
  return *backends_;
}

void Pipeline::emit(json event) const {
  if (sink_) sink_(event);
}

fs::path Pipeline::output_root() const { return config_.resolve(config_.output_root); }

std::string Pipeline::fingerprint(Stage stage) const {
  auto& slot = fingerprints_[index_of(stage)];
  if (!slot) slot = compute_fingerprint(stage);
  return *slot;
}

fs::path Pipeline::stage_dir(Stage stage) const {
  return output_root() / std::string(stage_name(stage)) / fingerprint(stage);
}

json Pipeline::stage_slice(Stage stage) const {
  const auto& c = config_;
  switch (stage) {
    case Stage::ingest: {
      const auto train = c.resolve(c.dataset.train_annotations);
      const auto eval_id = c.resolve(c.dataset.eval_id_annotations);
      const auto eval_ood = c.resolve(c.dataset.eval_ood_annotations);
      return {{"train_annotations", train.string()},
              {"train_digest", input_digest(train)},
              {"eval_id_annotations", eval_id.string()},
              {"eval_id_digest", input_digest(eval_id)},
              {"eval_ood_annotations", eval_ood.string()},
              {"eval_ood_digest", input_digest(eval_ood)},
              {"image_root", c.resolve(c.dataset.image_root).string()},
              {"min_box_area", c.candidates.min_box_area},
              {"max_edits_per_image", c.candidates.max_edits_per_image},
              {"max_relative_area", c.candidates.max_relative_area}};
    }
    case Stage::imagine: {
      const auto& cc = c.concepts.concepts;
      return {{"concepts_per_label", cc.concepts_per_label},
              {"retry_budget", cc.retry_budget},
              {"forbidden_terms", std::vector<std::string>(cc.forbidden_terms.begin(), cc.forbidden_terms.end())},
              {"forbidden_terms_digest", input_digest(c.resolve(c.concepts.forbidden_terms_file))},
              {"backend", backend_slice(c.backend, "concepts")}};
    }
    case Stage::synthesize:
      return {{"budget", c.synthesis.budget},
              {"max_attempts", c.synthesis.options.max_attempts},
              {"prompt_template", c.synthesis.options.prompt_template},
              {"backend", backend_slice(c.backend, "inpaint")}};
    case Stage::refine:
      return {{"enabled", c.refine.enabled},
              {"padding_e", c.refine.padding_e},
              {"iou_threshold_gamma", c.refine.iou_threshold_gamma},
              {"backend", backend_slice(c.backend, "segment")}};
    case Stage::extract: {
      json j{{"source", c.features.source}};
      if (c.features.source == "archives") {
        j["id_archive"] = input_digest(c.resolve(c.features.id_archive));
        j["edit_archive"] = input_digest(c.resolve(c.features.edit_archive));
        j["eval_id_archive"] = input_digest(c.resolve(c.features.eval_id_archive));
        j["eval_ood_archive"] = input_digest(c.resolve(c.features.eval_ood_archive));
      }
      return j;
    }
    case Stage::pair_filter:
      return {{"enabled", c.filter.enabled},
              {"eps_low", c.filter.thresholds.eps_low},
              {"eps_up", c.filter.thresholds.eps_up}};
    case Stage::train:
      return {{"learning_rate", c.train.learning_rate}, {"momentum", c.train.momentum},
              {"dropout", c.train.dropout},             {"batch_size", c.train.batch_size},
              {"epochs", c.train.epochs},               {"hidden", c.train.hidden}};
    case Stage::evaluate: return json::object();
  }
  return json::object();
}

std::string Pipeline::compute_fingerprint(Stage stage) const {
  json upstream = json::object();
  for (auto u : upstream_of(stage)) upstream[std::string(stage_name(u))] = fingerprint(u);
  const json doc{{"stage", stage_name(stage)}, {"seed", config_.seed}, {"config", stage_slice(stage)},
                 {"upstream", upstream}};
  return to_hex(fnv1a(doc.dump()));
}

bool Pipeline::completed(Stage stage) const {
  const auto dir = stage_dir(stage);
  std::error_code ec;
  if (!fs::is_regular_file(dir / "stage.json", ec)) return false;
  try {
    const auto meta = json::parse(read_text_file(dir / "stage.json"));
    if (meta.at("fingerprint").get<std::string>() != fingerprint(stage)) return false;
    for (const auto& [name, digest] : meta.at("outputs").items()) {
      if (output_digest(dir / name) != digest.get<std::string>()) return false;
    }
    return true;
  } catch (const json::exception&) {
    return false;
  }
}

void Pipeline::require(Stage upstream) const {
  if (completed(upstream)) return;
  const std::string name(stage_name(upstream));
  const auto dir = stage_dir(upstream);
  std::error_code ec;
  const bool present = fs::exists(dir / "stage.json", ec);
  throw DependencyError(name, present ? "artifacts of stage '" + name + "' in " + dir.string() +
                                            " were modified; re-run '" + name + "' with --force"
                                      : "stage '" + name + "' has not completed for this configuration (expected " +
                                            dir.string() + "); run '" + name + "' first");
}

StageOutcome Pipeline::run_stage(Stage stage, bool force) {
  StageOutcome out;
  out.stage = stage;
  out.fingerprint = fingerprint(stage);
  out.dir = stage_dir(stage);
  const std::string name(stage_name(stage));

  if (!force && completed(stage)) {
    out.up_to_date = true;
    out.counts = json::parse(read_text_file(out.dir / "stage.json")).value("counts", json::object());
    emit({{"event", "stage_up_to_date"}, {"stage", name}, {"fingerprint", out.fingerprint}});
    return out;
  }
  // Nearest upstream first, so the error names the stage the user should run next.
  const auto ups = upstream_of(stage);
  for (auto it = ups.rbegin(); it != ups.rend(); ++it) require(*it);

  emit({{"event", "stage_start"}, {"stage", name}, {"fingerprint", out.fingerprint}});
  const auto started = now_ms();
  fs::path tmp = out.dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  json counts;
  switch (stage) {
    case Stage::ingest: counts = run_ingest(tmp); break;
    case Stage::imagine: counts = run_imagine(tmp); break;
    case Stage::synthesize: counts = run_synthesize(tmp); break;
    case Stage::refine: counts = run_refine(tmp); break;
    case Stage::extract: counts = run_extract(tmp); break;
    case Stage::pair_filter: counts = run_pair_filter(tmp); break;
    case Stage::train: counts = run_train(tmp); break;
    case Stage::evaluate: counts = run_evaluate(tmp); break;
  }

  json upstream = json::object();
  for (auto u : upstream_of(stage)) upstream[std::string(stage_name(u))] = fingerprint(u);
  json outputs = json::object();
  for (const auto& f : stage_outputs(stage)) outputs[f] = output_digest(tmp / f);
  const json meta{{"stage", name},       {"fingerprint", out.fingerprint}, {"seed", config_.seed},
                  {"upstream", upstream}, {"counts", counts},               {"outputs", outputs}};
  write_file_atomic(tmp / "stage.json", meta.dump(2) + "\n");
  fs::remove_all(out.dir);
  fs::rename(tmp, out.dir);

  out.counts = counts;
  emit({{"event", "stage_done"},
        {"stage", name},
        {"fingerprint", out.fingerprint},
        {"counts", counts},
        {"elapsed_ms", now_ms() - started}});
  return out;
}

EvalReport Pipeline::run_all(bool force) {
  for (auto s : kStages) run_stage(s, force);
  return read_report_json(stage_dir(Stage::evaluate) / "report.jsonl");
}

// ---------------------------------------------------------------------------
// Stages

json Pipeline::run_ingest(const fs::path& dir) {
  const auto& c = config_;
  if (c.dataset.train_annotations.empty()) throw ConfigError("dataset.train_annotations", "required");
  const auto image_root = c.resolve(c.dataset.image_root);
  const auto train = load_annotations(c.resolve(c.dataset.train_annotations), AnnotationFormat::coco_json, image_root);
  const auto candidates = select_edit_candidates(train.records, c.candidates);
  write_record_manifest(dir / "records.jsonl", train.records);
  write_record_manifest(dir / "candidates.jsonl", candidates);
  write_file_atomic(dir / "vocabulary.json", json{{"labels", train.vocabulary.labels()}}.dump(1) + "\n");

  std::size_t n_eval_id = 0, n_eval_ood = 0;
  auto load_eval = [&](const std::string& path, const std::string& out, std::size_t& n) {
    std::vector<IdObjectRecord> records;
    if (!path.empty()) records = load_annotations(c.resolve(path), AnnotationFormat::coco_json, image_root).records;
    write_record_manifest(dir / out, records);
    n = records.size();
  };
  load_eval(c.dataset.eval_id_annotations, "eval_id.jsonl", n_eval_id);
  load_eval(c.dataset.eval_ood_annotations, "eval_ood.jsonl", n_eval_ood);
  return {{"records", train.records.size()},
          {"candidates", candidates.size()},
          {"labels", train.vocabulary.size()},
          {"eval_id", n_eval_id},
          {"eval_ood", n_eval_ood}};
}

namespace {

Vocabulary read_vocabulary(const fs::path& path) {
  const auto j = json::parse(read_text_file(path));
  return Vocabulary(j.at("labels").get<std::vector<std::string>>());
}

}  // namespace

json Pipeline::run_imagine(const fs::path& dir) {
  const auto vocab = read_vocabulary(stage_dir(Stage::ingest) / "vocabulary.json");
  auto cfg = config_.concepts.concepts;
  if (!config_.concepts.forbidden_terms_file.empty()) {
    for (auto& t : load_forbidden_terms(config_.resolve(config_.concepts.forbidden_terms_file))) {
      cfg.forbidden_terms.insert(t);
    }
  }
  const auto map = imagine_concepts(*backends().concepts, vocab, cfg);
  write_file_atomic(dir / "concepts.json", concept_map_to_json(map, vocab).dump(1) + "\n");
  std::size_t total = 0;
  for (const auto& v : map.per_label) total += v.size();
  return {{"labels", vocab.size()}, {"concepts", total}};
}

json Pipeline::run_synthesize(const fs::path& dir) {
  const auto ingest = stage_dir(Stage::ingest);
  const auto vocab = read_vocabulary(ingest / "vocabulary.json");
  const auto candidates = read_record_manifest(ingest / "candidates.jsonl");
  const auto concepts =
      concept_map_from_json(json::parse(read_text_file(stage_dir(Stage::imagine) / "concepts.json")), vocab);
  const auto jobs = plan_jobs(candidates, concepts, config_.synthesis.budget, config_.seed);
  const auto edits = run_synthesis(jobs, *backends().inpaint, dir / "images", config_.synthesis.options);
  write_edit_manifest(dir / "edits.jsonl", edits);
  write_edit_timings(dir / "timings.jsonl", edits);
  const auto failed = std::count_if(edits.begin(), edits.end(), [](const EditRecord& e) {
    return e.status == EditStatus::failed;
  });
  return {{"jobs", jobs.size()}, {"synthesized", edits.size() - std::size_t(failed)}, {"failed", failed}};
}

json Pipeline::run_refine(const fs::path& dir) {
  const auto synth = stage_dir(Stage::synthesize);
  const auto edits = read_edit_manifest(synth / "edits.jsonl");
  const auto refined = refine_boxes(edits, *backends().segment, config_.refine, synth / "images");
  write_edit_manifest(dir / "edits.jsonl", refined);
  std::map<std::string, std::size_t> tally;
  for (const auto& e : refined) ++tally[to_string(e.status)];
  return json(tally);
}

json Pipeline::run_extract(const fs::path& dir) {
  const auto& c = config_;
  if (c.features.source == "archives") {
    auto copy = [&](const std::string& src, const char* name, FeatureKind kind) {
      std::uint32_t dim = 0;
      const auto records = read_feature_archive(c.resolve(src), &dim);
      for (const auto& r : records) {
        if (r.kind != kind) {
          throw ValidationError(src + ": record " + std::to_string(r.record_id) + " has the wrong kind",
                                {r.record_id});
        }
      }
      write_feature_archive(dir / name, dim, records);
      return records.size();
    };
    return {{"id", copy(c.features.id_archive, "id.synf", FeatureKind::id)},
            {"edit", copy(c.features.edit_archive, "edit.synf", FeatureKind::edit)},
            {"eval_id", copy(c.features.eval_id_archive, "eval_id.synf", FeatureKind::id)},
            {"eval_ood", copy(c.features.eval_ood_archive, "eval_ood.synf", FeatureKind::id)}};
  }

  if (c.dataset.eval_id_annotations.empty()) {
    throw ConfigError("dataset.eval_id_annotations", "required for mock feature extraction");
  }
  if (c.dataset.eval_ood_annotations.empty()) {
    throw ConfigError("dataset.eval_ood_annotations", "required for mock feature extraction");
  }
  const auto ingest = stage_dir(Stage::ingest);
  const auto image_dir = stage_dir(Stage::synthesize) / "images";
  const auto concurrency = c.features.concurrency;

  auto describe_records = [&](const std::vector<IdObjectRecord>& records) {
    std::vector<FeatureRecord> out(records.size());
    parallel_for(records.size(), concurrency, [&](std::size_t i) {
      const auto& r = records[i];
      out[i] = {r.record_id, r.image_id, r.box, r.label_id, FeatureKind::id,
                crop_descriptor(read_png(r.image_path), r.box)};
    });
    return out;
  };
  const auto ids = describe_records(read_record_manifest(ingest / "records.jsonl"));
  const auto eval_id = describe_records(read_record_manifest(ingest / "eval_id.jsonl"));
  const auto eval_ood = describe_records(read_record_manifest(ingest / "eval_ood.jsonl"));

  std::vector<EditRecord> refined;
  for (auto& e : read_edit_manifest(stage_dir(Stage::refine) / "edits.jsonl")) {
    if (e.status == EditStatus::refined) refined.push_back(std::move(e));
  }
  std::vector<FeatureRecord> edits(refined.size());
  parallel_for(refined.size(), concurrency, [&](std::size_t i) {
    const auto& e = refined[i];
    const auto& src = e.job.source;
    edits[i] = {e.job.job_id, src.image_id, *e.refined_box, src.label_id, FeatureKind::edit,
                crop_descriptor(read_png(image_dir / e.edited_image_path), *e.refined_box)};
  });

  write_feature_archive(dir / "id.synf", kDescriptorDim, ids);
  write_feature_archive(dir / "edit.synf", kDescriptorDim, edits);
  write_feature_archive(dir / "eval_id.synf", kDescriptorDim, eval_id);
  write_feature_archive(dir / "eval_ood.synf", kDescriptorDim, eval_ood);
  return {{"id", ids.size()}, {"edit", edits.size()}, {"eval_id", eval_id.size()}, {"eval_ood", eval_ood.size()}};
}

json Pipeline::run_pair_filter(const fs::path& dir) {
  const auto extract = stage_dir(Stage::extract);
  const auto ids = features_of(extract / "id.synf");
  std::uint32_t dim = 0;
  const auto edit_features = read_feature_archive(extract / "edit.synf", &dim);
  auto edits = read_edit_manifest(stage_dir(Stage::refine) / "edits.jsonl");
  const auto pairs = pair_features(ids, edit_features, edits);
  const auto kept = config_.filter.enabled ? filter_by_similarity(pairs, config_.filter.thresholds) : pairs;
  mark_similarity_status(edits, kept);

  std::vector<std::uint64_t> kept_ids;
  for (const auto& p : kept) kept_ids.push_back(p.edit_feature.record_id);
  std::sort(kept_ids.begin(), kept_ids.end());
  std::vector<json> rows;
  for (const auto& p : pairs) {
    rows.push_back({{"edit_id", p.edit_feature.record_id},
                    {"source_record_id", p.id_feature.record_id},
                    {"similarity", p.similarity},
                    {"kept", std::binary_search(kept_ids.begin(), kept_ids.end(), p.edit_feature.record_id)}});
  }
  std::vector<FeatureRecord> ood;
  for (const auto& p : kept) ood.push_back(p.edit_feature);
  write_file_atomic(dir / "pairs.jsonl", write_jsonl(rows));
  write_edit_manifest(dir / "edits.jsonl", edits);
  write_feature_archive(dir / "ood_train.synf", dim, ood);
  return {{"pairs", pairs.size()}, {"accepted", kept.size()}, {"sim_rejected", pairs.size() - kept.size()}};
}

json Pipeline::run_train(const fs::path& dir) {
  std::uint32_t dim = 0;
  const auto ids = read_feature_archive(stage_dir(Stage::extract) / "id.synf", &dim);
  const auto ood = features_of(stage_dir(Stage::pair_filter) / "ood_train.synf");
  if (ids.empty()) throw ArgumentError("no ID features to train on");
  if (ood.empty()) throw ArgumentError("no accepted synthetic OOD samples to train on; check filter.eps_low/eps_up");
  auto model = init_model(dim, config_.train.hidden, config_.seed, config_.train.dropout);
  const auto result = train(std::move(model), to_matrix(ids), to_matrix(ood), config_.train);
  write_model(dir / "model.synm", result.model);
  write_loss_curve(dir / "loss_curve.csv", result.loss_curve);
  return {{"id", ids.size()},
          {"ood", ood.size()},
          {"epochs", result.loss_curve.size()},
          {"final_loss", result.loss_curve.empty() ? 0.0 : result.loss_curve.back()}};
}

json Pipeline::run_evaluate(const fs::path& dir) {
  const auto model = read_model(stage_dir(Stage::train) / "model.synm");
  const auto extract = stage_dir(Stage::extract);
  const auto id = features_of(extract / "eval_id.synf");
  const auto ood = features_of(extract / "eval_ood.synf");
  if (id.empty() || ood.empty()) throw ArgumentError("evaluation needs non-empty eval_id and eval_ood features");
  auto report = evaluate(model, to_matrix(id), to_matrix(ood));
  report.fingerprint = fingerprint(Stage::evaluate);
  report.seed = config_.seed;
  write_report(dir, report);
  return {{"fpr95", report.fpr95}, {"auroc", report.auroc}, {"n_id", report.n_id}, {"n_ood", report.n_ood}};
}

// ---------------------------------------------------------------------------

namespace {

bool parse_switch(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ArgumentError("expected on/off, got '" + v + "'");
}

std::size_t parse_count(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw ArgumentError("expected a count, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

}  // namespace

std::vector<AblationRow> run_pipeline_ablation(const PipelineConfig& config, EventSink sink) {
  const auto axis = ablation_axis_from_string(config.ablation.axis);
  // Grid points share upstream stage directories, so they run one at a time.
  return run_ablation(
      config.ablation.grid,
      [&](const std::string& value) {
        auto c = config;
        switch (axis) {
          case AblationAxis::sample_count: c.synthesis.budget = parse_count(value); break;
          case AblationAxis::concept_count: c.concepts.concepts.concepts_per_label = parse_count(value); break;
          case AblationAxis::filter_on_off: c.filter.enabled = parse_switch(value); break;
          case AblationAxis::refiner_on_off: c.refine.enabled = parse_switch(value); break;
        }
        Pipeline p(c, sink);
        return p.run_all();
      },
      1);
}

std::vector<AblationRow> run_benchmark_ablation(const PipelineConfig& config) {
  const auto axis = ablation_axis_from_string(config.ablation.axis);
  if (axis != AblationAxis::sample_count && axis != AblationAxis::filter_on_off) {
    throw ConfigError("ablation.axis", "the feature benchmark supports sample_count and filter_on_off");
  }
  return run_ablation(
      config.ablation.grid,
      [&](const std::string& value) {
        FeatureExperiment e;
        e.world = config.benchmark.world;
        e.world.seed = config.seed;
        e.train = config.train;
        e.eval_n_id = config.benchmark.eval_n_id;
        e.eval_n_ood = config.benchmark.eval_n_ood;
        e.filter = config.filter.enabled ? std::optional(config.filter.thresholds) : std::nullopt;
        if (axis == AblationAxis::sample_count) {
          e.world.n_ood = parse_count(value);
        } else if (parse_switch(value)) {
          e.filter = config.filter.thresholds;
        } else {
          e.filter.reset();
        }
        auto report = run_feature_experiment(e);
        json knobs = config_to_json(config);
        knobs["ablation"] = {{"axis", config.ablation.axis}, {"value", value}};
        report.fingerprint = to_hex(fnv1a(knobs.dump()));
        return report;
      },
      config.ablation.concurrency);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DependencyError*>(&e)) return 2;
  if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const EmptyResponseError*>(&e) ||
      dynamic_cast<const PartialResultError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const CorruptionError*>(&e) ||
      dynamic_cast<const PlanningError*>(&e) || dynamic_cast<const PairingError*>(&e) ||
      dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const DegenerateVectorError*>(&e) || dynamic_cast<const EmptyMaskError*>(&e)) {
    return 1;
  }
  return 4;
}

PipelineConfig image_world_config(std::size_t n_images) {
  PipelineConfig c;
  c.dataset.train_annotations = "train/annotations.json";
  c.dataset.eval_id_annotations = "eval/id.json";
  c.dataset.eval_ood_annotations = "eval/ood.json";
  c.output_root = "runs";
  c.synthesis.budget = n_images;
  for (const auto& l : image_world_ood_labels()) c.concepts.concepts.forbidden_terms.insert(normalize_concept(l));
  c.ablation.grid = {};
  return c;
}

}  // namespace synood
