#include "synood/config.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"

#include <cmath>
#include <set>

namespace synood {

using nlohmann::json;

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  if (path.empty()) return {};
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

namespace {

/// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(join(key), "unknown key");
    }
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return Reader(empty_, join(key));
    return Reader(j_.at(key), join(key));
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    read(j_.at(key), join(key), out);
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static void read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    out = v.get<std::string>();
  }
  template <typename U>
    requires std::is_unsigned_v<U> && (!std::is_same_v<U, bool>)
  static void read(const json& v, const std::string& path, U& out) {
    if (!v.is_number_unsigned()) throw ConfigError(path, "expected a non-negative integer");
    out = v.get<U>();
  }
  static void read(const json& v, const std::string& path, std::vector<std::string>& out) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of strings");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string s;
      // Grid values may be numbers or booleans; keep their JSON spelling.
      if (v[i].is_string()) {
        s = v[i].get<std::string>();
      } else if (v[i].is_primitive() && !v[i].is_null()) {
        s = v[i].dump();
      } else {
        throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a string");
      }
      out.push_back(std::move(s));
    }
  }
  static void read(const json& v, const std::string& path, std::set<std::string>& out) {
    std::vector<std::string> items;
    read(v, path, items);
    out.clear();
    for (auto& s : items) out.insert(normalize_concept(s));
  }
  static void read(const json& v, const std::string& path, std::array<std::size_t, 2>& out) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(path, "expected two layer sizes");
    for (std::size_t i = 0; i < 2; ++i) read(v[i], path + "[" + std::to_string(i) + "]", out[i]);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
  static inline const json empty_ = json::object();
};

json endpoint_json(const BackendEndpointConfig& e) {
  return {{"base_url", e.base_url},
          {"timeout_s", e.timeout_s},
          {"retry_budget", e.retry_budget},
          {"auth_token_env", e.auth_token_env},
          {"backoff_base_s", e.backoff_base_s},
          {"backoff_factor", e.backoff_factor},
          {"jitter_seed", e.jitter_seed}};
}

void read_endpoint(Reader r, BackendEndpointConfig& e) {
  r.get("base_url", e.base_url);
  r.get("timeout_s", e.timeout_s);
  r.get("retry_budget", e.retry_budget);
  r.get("auth_token_env", e.auth_token_env);
  r.get("backoff_base_s", e.backoff_base_s);
  r.get("backoff_factor", e.backoff_factor);
  r.get("jitter_seed", e.jitter_seed);
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

void check_endpoint(const BackendEndpointConfig& e, const std::string& path) {
  check(!e.base_url.empty(), path + ".base_url", "required when backend.kind is http");
  check(e.timeout_s > 0.0 && std::isfinite(e.timeout_s), path + ".timeout_s", "must be > 0");
  check(e.backoff_base_s >= 0.0, path + ".backoff_base_s", "must be >= 0");
  check(e.backoff_factor >= 1.0, path + ".backoff_factor", "must be >= 1");
  try {
    e.validate();
  } catch (const ArgumentError& err) {
    throw ConfigError(path, err.what());
  }
}

bool is_rate(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

json config_to_json(const PipelineConfig& c) {
  const auto& cc = c.concepts.concepts;
  const auto& w = c.benchmark.world;
  return {
      {"seed", c.seed},
      {"output_root", c.output_root},
      {"dataset",
       {{"train_annotations", c.dataset.train_annotations},
        {"eval_id_annotations", c.dataset.eval_id_annotations},
        {"eval_ood_annotations", c.dataset.eval_ood_annotations},
        {"image_root", c.dataset.image_root}}},
      {"backend",
       {{"kind", c.backend.kind},
        {"mock",
         {{"world_seed", c.backend.mock.world_seed},
          {"concept_failure_rate", c.backend.mock.concept_failure_rate},
          {"inpaint_failure_rate", c.backend.mock.inpaint_failure_rate},
          {"segment_jitter", c.backend.mock.segment_jitter},
          {"segment_failure_rate", c.backend.mock.segment_failure_rate}}},
        {"concepts", endpoint_json(c.backend.concepts)},
        {"inpaint", endpoint_json(c.backend.inpaint)},
        {"segment", endpoint_json(c.backend.segment)}}},
      {"concepts",
       {{"concepts_per_label", cc.concepts_per_label},
        {"forbidden_terms", std::vector<std::string>(cc.forbidden_terms.begin(), cc.forbidden_terms.end())},
        {"forbidden_terms_file", c.concepts.forbidden_terms_file},
        {"retry_budget", cc.retry_budget},
        {"concurrency", cc.concurrency}}},
      {"candidates",
       {{"min_box_area", c.candidates.min_box_area},
        {"max_edits_per_image", c.candidates.max_edits_per_image},
        {"max_relative_area", c.candidates.max_relative_area}}},
      {"synthesis",
       {{"budget", c.synthesis.budget},
        {"concurrency", c.synthesis.options.concurrency},
        {"max_attempts", c.synthesis.options.max_attempts},
        {"prompt_template", c.synthesis.options.prompt_template}}},
      {"refine",
       {{"enabled", c.refine.enabled},
        {"padding_e", c.refine.padding_e},
        {"iou_threshold_gamma", c.refine.iou_threshold_gamma},
        {"concurrency", c.refine.concurrency}}},
      {"features",
       {{"source", c.features.source},
        {"id_archive", c.features.id_archive},
        {"edit_archive", c.features.edit_archive},
        {"eval_id_archive", c.features.eval_id_archive},
        {"eval_ood_archive", c.features.eval_ood_archive},
        {"concurrency", c.features.concurrency}}},
      {"filter",
       {{"enabled", c.filter.enabled}, {"eps_low", c.filter.thresholds.eps_low}, {"eps_up", c.filter.thresholds.eps_up}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"momentum", c.train.momentum},
        {"dropout", c.train.dropout},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"hidden", c.train.hidden}}},
      {"ablation",
       {{"axis", c.ablation.axis}, {"grid", c.ablation.grid}, {"concurrency", c.ablation.concurrency}}},
      {"benchmark",
       {{"feature_dim", w.feature_dim},
        {"n_id", w.n_id},
        {"n_ood", w.n_ood},
        {"separation", w.separation},
        {"scale", w.scale},
        {"base_norm", w.base_norm},
        {"contamination", w.contamination},
        {"eval_n_id", c.benchmark.eval_n_id},
        {"eval_n_ood", c.benchmark.eval_n_ood}}},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  Reader root(j, "");
  root.get("seed", c.seed);
  root.get("output_root", c.output_root);
  {
    auto r = root.child("dataset");
    r.get("train_annotations", c.dataset.train_annotations);
    r.get("eval_id_annotations", c.dataset.eval_id_annotations);
    r.get("eval_ood_annotations", c.dataset.eval_ood_annotations);
    r.get("image_root", c.dataset.image_root);
  }
  {
    auto r = root.child("backend");
    r.get("kind", c.backend.kind);
    {
      auto m = r.child("mock");
      m.get("world_seed", c.backend.mock.world_seed);
      m.get("concept_failure_rate", c.backend.mock.concept_failure_rate);
      m.get("inpaint_failure_rate", c.backend.mock.inpaint_failure_rate);
      m.get("segment_jitter", c.backend.mock.segment_jitter);
      m.get("segment_failure_rate", c.backend.mock.segment_failure_rate);
    }
    read_endpoint(r.child("concepts"), c.backend.concepts);
    read_endpoint(r.child("inpaint"), c.backend.inpaint);
    read_endpoint(r.child("segment"), c.backend.segment);
  }
  {
    auto r = root.child("concepts");
    r.get("concepts_per_label", c.concepts.concepts.concepts_per_label);
    r.get("forbidden_terms", c.concepts.concepts.forbidden_terms);
    r.get("forbidden_terms_file", c.concepts.forbidden_terms_file);
    r.get("retry_budget", c.concepts.concepts.retry_budget);
    r.get("concurrency", c.concepts.concepts.concurrency);
  }
  {
    auto r = root.child("candidates");
    r.get("min_box_area", c.candidates.min_box_area);
    r.get("max_edits_per_image", c.candidates.max_edits_per_image);
    r.get("max_relative_area", c.candidates.max_relative_area);
  }
  {
    auto r = root.child("synthesis");
    r.get("budget", c.synthesis.budget);
    r.get("concurrency", c.synthesis.options.concurrency);
    r.get("max_attempts", c.synthesis.options.max_attempts);
    r.get("prompt_template", c.synthesis.options.prompt_template);
  }
  {
    auto r = root.child("refine");
    r.get("enabled", c.refine.enabled);
    r.get("padding_e", c.refine.padding_e);
    r.get("iou_threshold_gamma", c.refine.iou_threshold_gamma);
    r.get("concurrency", c.refine.concurrency);
  }
  {
    auto r = root.child("features");
    r.get("source", c.features.source);
    r.get("id_archive", c.features.id_archive);
    r.get("edit_archive", c.features.edit_archive);
    r.get("eval_id_archive", c.features.eval_id_archive);
    r.get("eval_ood_archive", c.features.eval_ood_archive);
    r.get("concurrency", c.features.concurrency);
  }
  {
    auto r = root.child("filter");
    r.get("enabled", c.filter.enabled);
    r.get("eps_low", c.filter.thresholds.eps_low);
    r.get("eps_up", c.filter.thresholds.eps_up);
  }
  {
    auto r = root.child("train");
    r.get("learning_rate", c.train.learning_rate);
    r.get("momentum", c.train.momentum);
    r.get("dropout", c.train.dropout);
    r.get("batch_size", c.train.batch_size);
    r.get("epochs", c.train.epochs);
    r.get("hidden", c.train.hidden);
  }
  {
    auto r = root.child("ablation");
    r.get("axis", c.ablation.axis);
    r.get("grid", c.ablation.grid);
    r.get("concurrency", c.ablation.concurrency);
  }
  {
    auto r = root.child("benchmark");
    auto& w = c.benchmark.world;
    r.get("feature_dim", w.feature_dim);
    r.get("n_id", w.n_id);
    r.get("n_ood", w.n_ood);
    r.get("separation", w.separation);
    r.get("scale", w.scale);
    r.get("base_norm", w.base_norm);
    r.get("contamination", w.contamination);
    r.get("eval_n_id", c.benchmark.eval_n_id);
    r.get("eval_n_ood", c.benchmark.eval_n_ood);
  }
  c.train.seed = c.seed;
  c.benchmark.world.seed = c.seed;
  return c;
}

void PipelineConfig::validate() const {
  check(!output_root.empty(), "output_root", "must be non-empty");
  check(backend.kind == "mock" || backend.kind == "http", "backend.kind", "must be 'mock' or 'http'");
  const auto& m = backend.mock;
  check(is_rate(m.concept_failure_rate), "backend.mock.concept_failure_rate", "must be in [0, 1]");
  check(is_rate(m.inpaint_failure_rate), "backend.mock.inpaint_failure_rate", "must be in [0, 1]");
  check(m.segment_jitter >= 0.0 && m.segment_jitter < 1.0, "backend.mock.segment_jitter", "must be in [0, 1)");
  check(is_rate(m.segment_failure_rate), "backend.mock.segment_failure_rate", "must be in [0, 1]");
  if (backend.kind == "http") {
    check_endpoint(backend.concepts, "backend.concepts");
    check_endpoint(backend.inpaint, "backend.inpaint");
    check_endpoint(backend.segment, "backend.segment");
  }

  const auto& cc = concepts.concepts;
  check(cc.concepts_per_label >= 1, "concepts.concepts_per_label", "must be >= 1");
  check(cc.retry_budget >= 1, "concepts.retry_budget", "must be >= 1");
  check(cc.concurrency >= 1, "concepts.concurrency", "must be >= 1");

  check(candidates.min_box_area >= 0.0, "candidates.min_box_area", "must be >= 0");
  check(candidates.max_edits_per_image >= 1, "candidates.max_edits_per_image", "must be >= 1");
  check(candidates.max_relative_area > 0.0 && candidates.max_relative_area <= 1.0, "candidates.max_relative_area",
        "must be in (0, 1]");

  check(synthesis.options.concurrency >= 1, "synthesis.concurrency", "must be >= 1");
  check(synthesis.options.max_attempts >= 1, "synthesis.max_attempts", "must be >= 1");
  check(synthesis.options.prompt_template.find("{concept}") != std::string::npos, "synthesis.prompt_template",
        "must contain {concept}");

  check(refine.padding_e >= 0.0, "refine.padding_e", "must be >= 0");
  check(refine.iou_threshold_gamma >= 0.0 && refine.iou_threshold_gamma < 1.0, "refine.iou_threshold_gamma",
        "must be in [0, 1)");
  check(refine.concurrency >= 1, "refine.concurrency", "must be >= 1");

  check(features.source == "mock" || features.source == "archives", "features.source",
        "must be 'mock' or 'archives'");
  if (features.source == "archives") {
    check(!features.id_archive.empty(), "features.id_archive", "required when features.source is archives");
    check(!features.edit_archive.empty(), "features.edit_archive", "required when features.source is archives");
    check(!features.eval_id_archive.empty(), "features.eval_id_archive",
          "required when features.source is archives");
    check(!features.eval_ood_archive.empty(), "features.eval_ood_archive",
          "required when features.source is archives");
  }
  check(features.concurrency >= 1, "features.concurrency", "must be >= 1");

  check(filter.thresholds.eps_low >= -1.0, "filter.eps_low", "must be >= -1");
  check(filter.thresholds.eps_up <= 1.0, "filter.eps_up", "must be <= 1");
  check(filter.thresholds.eps_low < filter.thresholds.eps_up, "filter.eps_low", "must be below filter.eps_up");

  check(train.learning_rate >= 0.0 && std::isfinite(train.learning_rate), "train.learning_rate", "must be >= 0");
  check(train.momentum >= 0.0 && train.momentum < 1.0, "train.momentum", "must be in [0, 1)");
  check(train.dropout >= 0.0 && train.dropout < 1.0, "train.dropout", "must be in [0, 1)");
  check(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  check(train.hidden[0] >= 1, "train.hidden[0]", "must be >= 1");
  check(train.hidden[1] >= 1, "train.hidden[1]", "must be >= 1");

  try {
    ablation_axis_from_string(ablation.axis);
  } catch (const ArgumentError& e) {
    throw ConfigError("ablation.axis", e.what());
  }
  check(ablation.concurrency >= 1, "ablation.concurrency", "must be >= 1");

  const auto& w = benchmark.world;
  check(w.feature_dim >= 2, "benchmark.feature_dim", "must be >= 2");
  check(w.n_id >= 1, "benchmark.n_id", "must be >= 1");
  check(w.n_ood >= 1, "benchmark.n_ood", "must be >= 1");
  check(w.separation >= 0.0, "benchmark.separation", "must be >= 0");
  check(w.scale > 0.0, "benchmark.scale", "must be > 0");
  check(w.base_norm >= 0.0, "benchmark.base_norm", "must be >= 0");
  check(is_rate(w.contamination), "benchmark.contamination", "must be in [0, 1]");
  check(benchmark.eval_n_id >= 1, "benchmark.eval_n_id", "must be >= 1");
  check(benchmark.eval_n_ood >= 1, "benchmark.eval_n_ood", "must be >= 1");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
  auto c = config_from_json(j);
  c.base_dir = path.parent_path();
  return c;
}

void save_config(const std::filesystem::path& path, const PipelineConfig& config) {
  write_file_atomic(path, config_to_json(config).dump(2) + "\n");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("--set expects KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path segment");
    if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object value");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void set_concurrency(PipelineConfig& config, std::size_t n) {
  config.concepts.concepts.concurrency = n;
  config.synthesis.options.concurrency = n;
  config.refine.concurrency = n;
  config.features.concurrency = n;
  config.ablation.concurrency = n;
}

}  // namespace synood
