#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fontparts/common.hpp"
#include "fontparts/sift.hpp"

namespace fontparts::deepsets {

inline constexpr int kInputDim = 128;
inline constexpr int kEmbedDim = 128;
inline constexpr int kHiddenDim = 256;
inline constexpr int kLayerCount = 6;
inline constexpr double kProbabilityClip = 1e-7;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Embedding network g (128-128-128-128, relu between layers, linear output) and
/// output network f (tanh, 128-256-256-K, relu between layers, sigmoid output).
struct MlpParams {
  std::array<DenseLayer, 3> g;
  std::array<DenseLayer, 3> f;

  static MlpParams zeros(std::size_t num_labels);
  /// Uniform He-style init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
  static MlpParams he_uniform(std::size_t num_labels, std::uint64_t seed);

  std::size_t num_labels() const { return static_cast<std::size_t>(f[2].weight.rows()); }
  DenseLayer& layer(int i) { return i < 3 ? g[i] : f[i - 3]; }
  const DenseLayer& layer(int i) const { return i < 3 ? g[i] : f[i - 3]; }
  static const char* layer_name(int i);
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws DataError when a layer shape differs from the architecture.
  void validate() const;
};

struct PartEmbedding {
  Eigen::VectorXd values;
  double importance = 0;  // ||values||_2
};

/// Column-per-descriptor matrix (128 x L) in double precision.
Eigen::MatrixXd descriptor_matrix(const sift::DescriptorSet& set);
Eigen::VectorXd to_vector(const sift::DescriptorValues& values);

PartEmbedding g_forward(const MlpParams& params, const Eigen::VectorXd& x);
/// Sum in ascending index order.
Eigen::VectorXd pool(std::span<const PartEmbedding> embeddings);
Eigen::VectorXd f_forward(const MlpParams& params, const Eigen::VectorXd& pooled);
/// Mean binary cross-entropy over K after clipping p to [1e-7, 1 - 1e-7].
double bce_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& t);

/// Batched g over the columns of X; returns the 128 x L embedding matrix.
Eigen::MatrixXd g_forward_batch(const MlpParams& params, const Eigen::MatrixXd& descriptors);
/// f(sum_l g(x_l)) for one descriptor subset.
Eigen::VectorXd set_forward(const MlpParams& params, const Eigen::MatrixXd& descriptors);

double importance(const Eigen::VectorXd& x, const MlpParams& params);
/// ||g(x_l)|| for every column.
Eigen::VectorXd importances(const Eigen::MatrixXd& descriptors, const MlpParams& params);

struct BatchItem {
  Eigen::MatrixXd descriptors;  // 128 x n, the sampled subset
  Eigen::VectorXd labels;       // K, m-hot
};

struct LossAndGradient {
  double loss = 0;
  MlpParams gradient;
};

/// Batch-mean loss only.
double batch_loss(const MlpParams& params, std::span<const BatchItem> batch);
/// Batch-mean loss and its exact gradient with respect to every parameter.
LossAndGradient backward(const MlpParams& params, std::span<const BatchItem> batch);

/// Indices of an n-subset of [0, L): without replacement when L >= n, with replacement otherwise.
std::vector<std::size_t> subsample_indices(std::size_t available, std::size_t n, Rng& rng);
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> columns);

struct TrainConfig {
  std::size_t descriptors_per_font = 64;
  std::size_t fonts_per_batch = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 100;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingFont {
  std::string font_id;
  Eigen::MatrixXd descriptors;  // 128 x L_i
  Eigen::VectorXd labels;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double seconds = 0;
};

/// Everything needed to continue training bit-identically after a restart.
struct TrainState {
  MlpParams params;
  MlpParams adam_m;
  MlpParams adam_v;
  std::uint64_t step = 0;
  int epochs_done = 0;
  MlpParams best;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int bad_epochs = 0;
  bool finished = false;
  std::vector<EpochStats> history;
};

TrainState init_train_state(std::size_t num_labels, const TrainConfig& config);

/// Runs one epoch (fresh subsamples, Adam updates, validation) and updates early-stop bookkeeping.
void train_epoch(TrainState& state, std::span<const TrainingFont> train, std::span<const TrainingFont> val,
                 const TrainConfig& config);

using EpochCallback = std::function<void(const TrainState&)>;

/// Trains until the epoch budget or patience runs out. Fonts without descriptors are
/// skipped; `skipped` receives their count. When `resume` is given, continues from it.
TrainState train(std::span<const TrainingFont> train_fonts, std::span<const TrainingFont> val_fonts,
                 std::size_t num_labels, const TrainConfig& config, const TrainState* resume = nullptr,
                 const EpochCallback& on_epoch = {}, std::size_t* skipped = nullptr);

struct PredictConfig {
  std::size_t n_repeats = 8;
  std::size_t descriptors_per_font = 64;
  std::uint64_t seed = 0;
};

/// Columns in lexicographic order.
Eigen::MatrixXd canonical_order(const Eigen::MatrixXd& descriptors);

/// One forward pass on a subsample drawn with the given seed from the canonical order.
Eigen::VectorXd predict_once(const Eigen::MatrixXd& descriptors, const MlpParams& params,
                             std::size_t descriptors_per_font, std::uint64_t subsample_seed);

/// Mean of predict_once over n_repeats seeds derived from config.seed.
Eigen::VectorXd predict(const Eigen::MatrixXd& descriptors, const MlpParams& params, const PredictConfig& config);

/// Seed of repeat r used by predict().
std::uint64_t repeat_seed(std::uint64_t seed, std::size_t r);

}  // namespace fontparts::deepsets
