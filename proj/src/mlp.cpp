#include "synood/mlp.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/io.hpp"
#include "synood/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace synood {

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < 3; ++l) n += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return n;
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.layer_dims != b.layer_dims || a.dropout_rate != b.dropout_rate || a.seed != b.seed) return false;
  for (std::size_t l = 0; l < 3; ++l) {
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

MlpModel init_model(std::size_t input_dim, std::array<std::size_t, 2> hidden, std::uint64_t seed,
                    double dropout_rate) {
  if (input_dim < 1 || hidden[0] < 1 || hidden[1] < 1) throw ArgumentError("layer sizes must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout must be in [0, 1)");
  MlpModel m;
  m.layer_dims = {input_dim, hidden[0], hidden[1], 1};
  m.dropout_rate = dropout_rate;
  m.seed = seed;
  Rng rng(derive_seed({seed, 0x696e6974ULL}));
  for (std::size_t l = 0; l < 3; ++l) {
    const auto fan_in = m.layer_dims[l], fan_out = m.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    m.weights[l].resize(Eigen::Index(fan_out), Eigen::Index(fan_in));
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) m.weights[l](r, c) = rng.uniform(-limit, limit);
    }
    m.biases[l] = Eigen::VectorXd::Zero(Eigen::Index(fan_out));
  }
  return m;
}

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(std::span<const double> id_logits, std::span<const double> ood_logits) {
  if (id_logits.empty() || ood_logits.empty()) throw ArgumentError("loss needs at least one ID and one OOD logit");
  double id_term = 0.0, ood_term = 0.0;
  for (double f : id_logits) id_term += softplus(-f);
  for (double f : ood_logits) ood_term += softplus(f);
  return id_term / double(id_logits.size()) + ood_term / double(ood_logits.size());
}

DropoutMasks make_dropout_masks(const MlpModel& model, std::size_t batch, std::uint64_t seed, std::uint64_t step) {
  const double p = model.dropout_rate;
  const double keep_scale = 1.0 / (1.0 - p);
  auto layer_mask = [&](std::size_t layer, std::size_t units) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(units), static_cast<Eigen::Index>(batch));
    Rng rng(derive_seed({seed, step, layer, 0x64726f70ULL}));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform() < p ? 0.0 : keep_scale;
    }
    return m;
  };
  return {layer_mask(1, model.layer_dims[1]), layer_mask(2, model.layer_dims[2])};
}

namespace {

struct Activations {
  Eigen::MatrixXd a1, h1, a2, h2;
  Eigen::RowVectorXd logits;
};

Activations run_forward(const MlpModel& m, const Eigen::MatrixXd& x, const DropoutMasks* masks) {
  Activations act;
  act.a1 = (m.weights[0] * x).colwise() + m.biases[0];
  act.h1 = act.a1.cwiseMax(0.0);
  if (masks) act.h1 = act.h1.cwiseProduct(masks->hidden1);
  act.a2 = (m.weights[1] * act.h1).colwise() + m.biases[1];
  act.h2 = act.a2.cwiseMax(0.0);
  if (masks) act.h2 = act.h2.cwiseProduct(masks->hidden2);
  act.logits = (m.weights[2] * act.h2).colwise() + m.biases[2];
  return act;
}

void check_input(const MlpModel& m, Eigen::Index rows) {
  if (std::size_t(rows) != m.input_dim()) {
    throw ArgumentError("feature dimension " + std::to_string(rows) + " does not match model input " +
                        std::to_string(m.input_dim()));
  }
}

}  // namespace

double forward(const MlpModel& model, std::span<const double> z, ForwardMode mode, std::uint64_t step) {
  check_input(model, Eigen::Index(z.size()));
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(z.data(), Eigen::Index(z.size()));
  if (mode == ForwardMode::train && model.dropout_rate > 0.0) {
    const auto masks = make_dropout_masks(model, 1, model.seed, step);
    return run_forward(model, x, &masks).logits(0);
  }
  return run_forward(model, x, nullptr).logits(0);
}

Eigen::VectorXd forward_batch(const MlpModel& model, const FeatureMatrix& rows) {
  check_input(model, rows.cols());
  Eigen::VectorXd out(rows.rows());
  // Column blocks bound the working set.
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index start = 0; start < rows.rows(); start += kChunk) {
    const auto n = std::min(kChunk, rows.rows() - start);
    Eigen::MatrixXd x = rows.middleRows(start, n).transpose();
    out.segment(start, n) = run_forward(model, x, nullptr).logits.transpose();
  }
  return out;
}

double batch_loss(const MlpModel& model, const Eigen::MatrixXd& id_cols, const Eigen::MatrixXd& ood_cols,
                  Gradients* grad, const DropoutMasks* masks) {
  check_input(model, id_cols.rows());
  check_input(model, ood_cols.rows());
  const auto n_id = id_cols.cols(), n_ood = ood_cols.cols();
  if (n_id == 0 || n_ood == 0) throw ArgumentError("batch needs at least one ID and one OOD sample");
  Eigen::MatrixXd x(id_cols.rows(), n_id + n_ood);
  x << id_cols, ood_cols;
  const auto act = run_forward(model, x, masks);

  double id_term = 0.0, ood_term = 0.0;
  Eigen::RowVectorXd g(n_id + n_ood);  // dL/dlogit
  for (Eigen::Index i = 0; i < n_id; ++i) {
    const double f = act.logits(i);
    id_term += softplus(-f);
    g(i) = -sigmoid(-f) / double(n_id);
  }
  for (Eigen::Index i = 0; i < n_ood; ++i) {
    const double f = act.logits(n_id + i);
    ood_term += softplus(f);
    g(n_id + i) = sigmoid(f) / double(n_ood);
  }
  const double loss = id_term / double(n_id) + ood_term / double(n_ood);
  if (!grad) return loss;

  grad->weights[2] = g * act.h2.transpose();
  grad->biases[2] = Eigen::VectorXd::Constant(1, g.sum());

  Eigen::MatrixXd d2 = model.weights[2].transpose() * g;
  if (masks) d2 = d2.cwiseProduct(masks->hidden2);
  d2 = (act.a2.array() > 0.0).select(d2, 0.0);
  grad->weights[1] = d2 * act.h1.transpose();
  grad->biases[1] = d2.rowwise().sum();

  Eigen::MatrixXd d1 = model.weights[1].transpose() * d2;
  if (masks) d1 = d1.cwiseProduct(masks->hidden1);
  d1 = (act.a1.array() > 0.0).select(d1, 0.0);
  grad->weights[0] = d1 * x.transpose();
  grad->biases[0] = d1.rowwise().sum();
  return loss;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (std::size_t l = 0; l < 3; ++l) {
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) out.push_back(model.weights[l](r, c));
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) out.push_back(model.biases[l](r));
  }
  return out;
}

void assign_parameters(MlpModel& model, std::span<const double> values) {
  if (values.size() != model.parameter_count()) throw ArgumentError("parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < 3; ++l) {
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) model.weights[l](r, c) = values[k++];
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) model.biases[l](r) = values[k++];
  }
}

std::vector<double> flatten_gradients(const Gradients& grad) {
  std::vector<double> out;
  for (std::size_t l = 0; l < 3; ++l) {
    for (Eigen::Index r = 0; r < grad.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < grad.weights[l].cols(); ++c) out.push_back(grad.weights[l](r, c));
    }
    for (Eigen::Index r = 0; r < grad.biases[l].size(); ++r) out.push_back(grad.biases[l](r));
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must be in [0, 1)");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (hidden[0] < 1 || hidden[1] < 1) throw ArgumentError("hidden sizes must be >= 1");
}

namespace {

/// Row indices sorted by row contents; identical rows keep their relative order.
std::vector<Eigen::Index> canonical_order(const FeatureMatrix& m) {
  std::vector<Eigen::Index> idx(std::size_t(m.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double* ra = m.row(a).data();
    const double* rb = m.row(b).data();
    return std::lexicographical_compare(ra, ra + m.cols(), rb, rb + m.cols());
  });
  return idx;
}

/// Draws the per-batch sample indices of one class for one epoch.
class EpochSampler {
 public:
  EpochSampler(std::vector<Eigen::Index> canonical, std::size_t per_batch, bool exhaustive, Rng rng)
      : order_(std::move(canonical)), per_batch_(per_batch), exhaustive_(exhaustive), rng_(std::move(rng)) {
    if (exhaustive_) {
      for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    }
  }

  std::vector<Eigen::Index> next() {
    std::vector<Eigen::Index> out;
    if (exhaustive_) {
      const auto end = std::min(cursor_ + per_batch_, order_.size());
      out.assign(order_.begin() + std::ptrdiff_t(cursor_), order_.begin() + std::ptrdiff_t(end));
      cursor_ = end;
    } else {
      for (std::size_t k = 0; k < per_batch_; ++k) out.push_back(order_[rng_.below(order_.size())]);
    }
    return out;
  }

 private:
  std::vector<Eigen::Index> order_;
  std::size_t per_batch_;
  bool exhaustive_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

Eigen::MatrixXd gather_columns(const FeatureMatrix& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(m.cols(), Eigen::Index(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out.col(Eigen::Index(k)) = m.row(rows[k]).transpose();
  return out;
}

}  // namespace

TrainResult train(MlpModel model, const FeatureMatrix& id_features, const FeatureMatrix& ood_features,
                  const TrainConfig& config) {
  config.validate();
  if (id_features.rows() == 0 || ood_features.rows() == 0) {
    throw ArgumentError("training needs non-empty ID and OOD feature sets");
  }
  check_input(model, id_features.cols());
  check_input(model, ood_features.cols());
  model.dropout_rate = config.dropout;

  const std::size_t id_per_batch = (config.batch_size + 1) / 2;
  const std::size_t ood_per_batch = std::max<std::size_t>(1, config.batch_size / 2);
  const auto n_id = std::size_t(id_features.rows()), n_ood = std::size_t(ood_features.rows());
  const std::size_t id_batches = (n_id + id_per_batch - 1) / id_per_batch;
  const std::size_t ood_batches = (n_ood + ood_per_batch - 1) / ood_per_batch;
  const std::size_t batches = std::max(id_batches, ood_batches);
  const auto id_canonical = canonical_order(id_features);
  const auto ood_canonical = canonical_order(ood_features);
  const std::uint64_t dropout_seed = derive_seed({config.seed, 0x6d61736bULL});

  Gradients grad;
  std::array<Eigen::MatrixXd, 3> vel_w;
  std::array<Eigen::VectorXd, 3> vel_b;
  for (std::size_t l = 0; l < 3; ++l) {
    vel_w[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
    vel_b[l] = Eigen::VectorXd::Zero(model.biases[l].size());
  }

  TrainResult result;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochSampler id_sampler(id_canonical, id_per_batch, id_batches == batches,
                            Rng(derive_seed({config.seed, epoch, 0})));
    EpochSampler ood_sampler(ood_canonical, ood_per_batch, ood_batches == batches,
                             Rng(derive_seed({config.seed, epoch, 1})));
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const auto id_idx = id_sampler.next();
      const auto ood_idx = ood_sampler.next();
      const auto x_id = gather_columns(id_features, id_idx);
      const auto x_ood = gather_columns(ood_features, ood_idx);
      DropoutMasks masks;
      const DropoutMasks* mask_ptr = nullptr;
      if (config.dropout > 0.0) {
        masks = make_dropout_masks(model, id_idx.size() + ood_idx.size(), dropout_seed, step);
        mask_ptr = &masks;
      }
      const double loss = batch_loss(model, x_id, x_ood, &grad, mask_ptr);
      if (!std::isfinite(loss)) throw DivergenceError(epoch + 1, config.learning_rate);
      total += loss;
      for (std::size_t l = 0; l < 3; ++l) {
        vel_w[l] = config.momentum * vel_w[l] - config.learning_rate * grad.weights[l];
        vel_b[l] = config.momentum * vel_b[l] - config.learning_rate * grad.biases[l];
        model.weights[l] += vel_w[l];
        model.biases[l] += vel_b[l];
      }
    }
    result.loss_curve.push_back(total / double(batches));
  }
  result.model = std::move(model);
  return result;
}

double score(const MlpModel& model, std::span<const double> z) { return sigmoid(forward(model, z)); }

Eigen::VectorXd score_batch(const MlpModel& model, const FeatureMatrix& rows) {
  return forward_batch(model, rows).unaryExpr([](double f) { return sigmoid(f); });
}

namespace {
constexpr char kModelMagic[4] = {'S', 'Y', 'N', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[pos + std::size_t(i)]} << (8 * i);
  return v;
}
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos + std::size_t(i)]} << (8 * i);
  return v;
}
}  // namespace

void write_model(const std::filesystem::path& path, const MlpModel& model) {
  std::vector<std::uint8_t> out(kModelMagic, kModelMagic + 4);
  put_u32(out, 1);
  put_u32(out, 4);
  for (auto d : model.layer_dims) put_u32(out, std::uint32_t(d));
  put_u64(out, std::bit_cast<std::uint64_t>(model.dropout_rate));
  put_u64(out, model.seed);
  for (double v : flatten_parameters(model)) put_u64(out, std::bit_cast<std::uint64_t>(v));
  write_file_atomic(path, out);
}

MlpModel read_model(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  const std::span<const std::uint8_t> in(bytes);
  constexpr std::size_t header = 4 + 4 + 4 + 16 + 8 + 8;
  if (in.size() < header || std::memcmp(in.data(), kModelMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a model checkpoint (bad magic)", 0);
  }
  if (get_u32(in, 4) != 1) throw FormatError(path.string() + ": unsupported checkpoint version", 4);
  if (get_u32(in, 8) != 4) throw FormatError(path.string() + ": expected 4 layer sizes", 8);
  MlpModel m;
  for (std::size_t i = 0; i < 4; ++i) m.layer_dims[i] = get_u32(in, 12 + 4 * i);
  if (m.layer_dims[3] != 1 || m.layer_dims[0] == 0 || m.layer_dims[1] == 0 || m.layer_dims[2] == 0) {
    throw FormatError(path.string() + ": invalid layer sizes", 12);
  }
  m.dropout_rate = std::bit_cast<double>(get_u64(in, 28));
  m.seed = get_u64(in, 36);
  for (std::size_t l = 0; l < 3; ++l) {
    m.weights[l].resize(Eigen::Index(m.layer_dims[l + 1]), Eigen::Index(m.layer_dims[l]));
    m.biases[l].resize(Eigen::Index(m.layer_dims[l + 1]));
  }
  const auto count = m.parameter_count();
  if (in.size() != header + 8 * count) throw CorruptionError(path.string() + ": parameter block has wrong size", 0);
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    params[i] = std::bit_cast<double>(get_u64(in, header + 8 * i));
    if (!std::isfinite(params[i])) throw ValidationError(path.string() + ": non-finite parameter");
  }
  assign_parameters(m, params);
  return m;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve) {
  std::string text = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, curve[i]);
    text += buf;
  }
  write_file_atomic(path, text);
}

}  // namespace synood
