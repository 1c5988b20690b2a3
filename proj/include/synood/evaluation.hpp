#pragma once

#include "synood/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synood {

struct FprResult {
  double fpr = 0.0;
  double threshold = 0.0;
};

/// Threshold is the largest distinct ID score t with #{id >= t} / n_id >= tpr_target;
/// fpr is #{ood >= t} / n_ood. No interpolation between thresholds.
FprResult fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                     double tpr_target = 0.95);

/// Mann-Whitney statistic with ID as the positive class; ties count one half.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct EvalReport {
  double fpr95 = 0.0;
  double auroc = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double threshold = 0.0;
  std::string fingerprint;
  std::uint64_t seed = 0;
};

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores);
EvalReport evaluate(const MlpModel& model, const FeatureMatrix& id_features, const FeatureMatrix& ood_features);

enum class AblationAxis { sample_count, concept_count, filter_on_off, refiner_on_off };

std::string_view to_string(AblationAxis axis);
AblationAxis ablation_axis_from_string(std::string_view s);

struct AblationRow {
  std::string axis_value;
  std::optional<EvalReport> report;
  /// Set when the grid point failed; the sweep keeps going.
  std::string error;
};

using GridRunner = std::function<EvalReport(const std::string& axis_value)>;

/// Runs every grid point (possibly concurrently); rows come back in grid order.
std::vector<AblationRow> run_ablation(const std::vector<std::string>& grid, const GridRunner& runner,
                                      std::size_t concurrency = 1);

/// Columns: axis_value,fpr95,auroc,n_id,n_ood,threshold,seed,error
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Columns: fpr95,auroc,n_id,n_ood,threshold,seed,fingerprint
std::string report_csv(const std::vector<EvalReport>& reports);
std::string report_jsonl(const std::vector<EvalReport>& reports);

void write_report(const std::filesystem::path& dir, const EvalReport& report);
EvalReport read_report_json(const std::filesystem::path& path);

}  // namespace synood
