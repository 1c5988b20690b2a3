#include "synood/evaluation.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/parallel.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace synood {

namespace {

void require_nonempty(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw ArgumentError("score lists must be non-empty");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FprResult fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr_target) {
  require_nonempty(id_scores, ood_scores);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw ArgumentError("tpr_target must be in (0, 1]");
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(id.begin(), id.end(), std::greater<>());
  std::sort(ood.begin(), ood.end(), std::greater<>());

  // Walk distinct ID values from the top; the first one reaching the target is the largest valid t.
  const auto n_id = double(id.size());
  double threshold = id.back();
  for (std::size_t i = 0; i < id.size();) {
    std::size_t j = i;
    while (j < id.size() && id[j] == id[i]) ++j;
    if (double(j) / n_id >= tpr_target) {
      threshold = id[i];
      break;
    }
    i = j;
  }
  const auto above = std::upper_bound(ood.begin(), ood.end(), threshold, std::greater<>()) - ood.begin();
  return {double(above) / double(ood.size()), threshold};
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Sum of ID midranks (1-based), then U = R_id - n_id (n_id + 1) / 2.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t ids = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      ids += all[j].is_id ? 1 : 0;
      ++j;
    }
    const double midrank = (double(i + 1) + double(j)) / 2.0;
    rank_sum += midrank * double(ids);
    i = j;
  }
  const auto n_id = double(id_scores.size()), n_ood = double(ood_scores.size());
  const double u = rank_sum - n_id * (n_id + 1.0) / 2.0;
  return std::clamp(u / (n_id * n_ood), 0.0, 1.0);
}

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const auto fpr = fpr_at_tpr(id_scores, ood_scores, 0.95);
  EvalReport r;
  r.fpr95 = fpr.fpr;
  r.threshold = fpr.threshold;
  r.auroc = auroc(id_scores, ood_scores);
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

EvalReport evaluate(const MlpModel& model, const FeatureMatrix& id_features, const FeatureMatrix& ood_features) {
  const Eigen::VectorXd id = score_batch(model, id_features);
  const Eigen::VectorXd ood = score_batch(model, ood_features);
  auto report = evaluate_scores({id.data(), std::size_t(id.size())}, {ood.data(), std::size_t(ood.size())});
  report.seed = model.seed;
  return report;
}

std::string_view to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::sample_count: return "sample_count";
    case AblationAxis::concept_count: return "concept_count";
    case AblationAxis::filter_on_off: return "filter_on_off";
    case AblationAxis::refiner_on_off: return "refiner_on_off";
  }
  return "?";
}

AblationAxis ablation_axis_from_string(std::string_view s) {
  for (auto a : {AblationAxis::sample_count, AblationAxis::concept_count, AblationAxis::filter_on_off,
                 AblationAxis::refiner_on_off}) {
    if (to_string(a) == s) return a;
  }
  throw ArgumentError("unknown ablation axis '" + std::string(s) +
                      "' (expected sample_count, concept_count, filter_on_off or refiner_on_off)");
}

std::vector<AblationRow> run_ablation(const std::vector<std::string>& grid, const GridRunner& runner,
                                      std::size_t concurrency) {
  std::vector<AblationRow> rows(grid.size());
  parallel_for(grid.size(), concurrency, [&](std::size_t i) {
    rows[i].axis_value = grid[i];
    try {
      rows[i].report = runner(grid[i]);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "axis_value,fpr95,auroc,n_id,n_ood,threshold,seed,error\n";
  for (const auto& row : rows) {
    out += row.axis_value;
    if (row.report) {
      const auto& r = *row.report;
      out += "," + fmt_double(r.fpr95) + "," + fmt_double(r.auroc) + "," + std::to_string(r.n_id) + "," +
             std::to_string(r.n_ood) + "," + fmt_double(r.threshold) + "," + std::to_string(r.seed) + ",";
    } else {
      std::string msg = row.error;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      out += ",,,,,,,\"" + msg + "\"";
    }
    out += "\n";
  }
  return out;
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::string out = "fpr95,auroc,n_id,n_ood,threshold,seed,fingerprint\n";
  for (const auto& r : reports) {
    out += fmt_double(r.fpr95) + "," + fmt_double(r.auroc) + "," + std::to_string(r.n_id) + "," +
           std::to_string(r.n_ood) + "," + fmt_double(r.threshold) + "," + std::to_string(r.seed) + "," +
           r.fingerprint + "\n";
  }
  return out;
}

namespace {

nlohmann::json report_json(const EvalReport& r) {
  return {{"fpr95", r.fpr95}, {"auroc", r.auroc},         {"n_id", r.n_id},
          {"n_ood", r.n_ood}, {"threshold", r.threshold}, {"seed", r.seed},
          {"fingerprint", r.fingerprint}};
}

}  // namespace

std::string report_jsonl(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += report_json(r).dump() + "\n";
  return out;
}

void write_report(const std::filesystem::path& dir, const EvalReport& report) {
  write_file_atomic(dir / "report.csv", report_csv({report}));
  write_file_atomic(dir / "report.jsonl", report_jsonl({report}));
}

EvalReport read_report_json(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  for (const auto& line : lines) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalReport r;
      r.fpr95 = j.at("fpr95").get<double>();
      r.auroc = j.at("auroc").get<double>();
      r.n_id = j.at("n_id").get<std::size_t>();
      r.n_ood = j.at("n_ood").get<std::size_t>();
      r.threshold = j.at("threshold").get<double>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.fingerprint = j.at("fingerprint").get<std::string>();
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what(), 0);
    }
  }
  throw FormatError(path.string() + ": no report line", 0);
}

}  // namespace synood
