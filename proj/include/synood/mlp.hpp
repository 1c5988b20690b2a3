#pragma once

#include "synood/features.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace synood {

/// Three weight layers d -> h1 -> h2 -> 1, ReLU on the hidden layers, raw logit out.
/// A positive logit means "in-distribution".
struct MlpModel {
  std::array<std::size_t, 4> layer_dims{};
  std::array<Eigen::MatrixXd, 3> weights;  // (out x in)
  std::array<Eigen::VectorXd, 3> biases;
  /// Applied to hidden activations in training mode only.
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t input_dim() const noexcept { return layer_dims[0]; }
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const MlpModel& a, const MlpModel& b);
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_model(std::size_t input_dim, std::array<std::size_t, 2> hidden, std::uint64_t seed,
                    double dropout_rate = 0.0);

enum class ForwardMode { eval, train };

/// Logit for one feature vector. In train mode a dropout mask is drawn from
/// (model.seed, step, layer); eval mode is deterministic and ignores `step`.
double forward(const MlpModel& model, std::span<const double> z, ForwardMode mode = ForwardMode::eval,
               std::uint64_t step = 0);

/// Eval-mode logits for every row.
Eigen::VectorXd forward_batch(const MlpModel& model, const FeatureMatrix& rows);

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

/// mean softplus(-F) over ID logits + mean softplus(F) over OOD logits.
double bce_loss(std::span<const double> id_logits, std::span<const double> ood_logits);

struct Gradients {
  std::array<Eigen::MatrixXd, 3> weights;
  std::array<Eigen::VectorXd, 3> biases;
};

/// Per-unit inverted-dropout multipliers (0 or 1/(1-p)) for both hidden layers,
/// one column per sample (ID samples first, then OOD).
struct DropoutMasks {
  Eigen::MatrixXd hidden1;
  Eigen::MatrixXd hidden2;
};

DropoutMasks make_dropout_masks(const MlpModel& model, std::size_t batch, std::uint64_t seed, std::uint64_t step);

/// Loss of one batch (columns are samples) and, when `grad` is set, its exact gradient.
double batch_loss(const MlpModel& model, const Eigen::MatrixXd& id_cols, const Eigen::MatrixXd& ood_cols,
                  Gradients* grad = nullptr, const DropoutMasks* masks = nullptr);

/// Parameters in checkpoint order: W1 (row-major), b1, W2, b2, W3, b3.
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> values);
std::vector<double> flatten_gradients(const Gradients& grad);

struct TrainConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double dropout = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::array<std::size_t, 2> hidden{512, 128};

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  /// Mean batch loss per epoch.
  std::vector<double> loss_curve;
};

/// Mini-batch SGD with heavy-ball momentum on balanced batches: each batch holds
/// ceil(B/2) ID and floor(B/2) OOD samples. An epoch walks a seeded permutation
/// of the class needing more batches; the other class is drawn with replacement.
/// Samples are put in canonical order first, so input order never matters.
TrainResult train(MlpModel model, const FeatureMatrix& id_features, const FeatureMatrix& ood_features,
                  const TrainConfig& config);

/// sigmoid(logit), eval mode; higher means more in-distribution.
double score(const MlpModel& model, std::span<const double> z);
Eigen::VectorXd score_batch(const MlpModel& model, const FeatureMatrix& rows);

/*
 * Checkpoint layout (little-endian):
 *   "SYNM", u32 version (1), u32 layer count (4), 4 x u32 layer_dims,
 *   f64 dropout_rate, u64 seed, then parameters as f64 in flatten_parameters order.
 */
void write_model(const std::filesystem::path& path, const MlpModel& model);
MlpModel read_model(const std::filesystem::path& path);

/// "epoch,mean_loss" CSV, epochs numbered from 1.
void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve);

}  // namespace synood
