#include "fontparts/deepsets.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fontparts::deepsets {

namespace {

constexpr std::array<std::pair<int, int>, kLayerCount> kShapes = {{
    {kEmbedDim, kInputDim},
    {kEmbedDim, kEmbedDim},
    {kEmbedDim, kEmbedDim},
    {kHiddenDim, kEmbedDim},
    {kHiddenDim, kHiddenDim},
    {-1, kHiddenDim},  // rows = K
}};

std::pair<int, int> layer_shape(int i, std::size_t num_labels) {
  auto [rows, cols] = kShapes[i];
  if (rows < 0) rows = static_cast<int>(num_labels);
  return {rows, cols};
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

double clip_probability(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

}  // namespace

const char* MlpParams::layer_name(int i) {
  static constexpr std::array<const char*, kLayerCount> names = {"g1", "g2", "g3", "f1", "f2", "f3"};
  return names.at(i);
}

MlpParams MlpParams::zeros(std::size_t num_labels) {
  if (num_labels == 0) throw UsageError("number of labels must be positive");
  MlpParams p;
  for (int i = 0; i < kLayerCount; ++i) {
    const auto [rows, cols] = layer_shape(i, num_labels);
    p.layer(i).weight = Eigen::MatrixXd::Zero(rows, cols);
    p.layer(i).bias = Eigen::VectorXd::Zero(rows);
  }
  return p;
}

MlpParams MlpParams::he_uniform(std::size_t num_labels, std::uint64_t seed) {
  MlpParams p = zeros(num_labels);
  Rng rng(seed);
  for (int i = 0; i < kLayerCount; ++i) {
    auto& w = p.layer(i).weight;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (int i = 0; i < kLayerCount; ++i) n += layer(i).weight.size() + layer(i).bias.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (int i = 0; i < kLayerCount; ++i) {
    if (!layer(i).weight.allFinite() || !layer(i).bias.allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  const std::size_t k = num_labels();
  for (int i = 0; i < kLayerCount; ++i) {
    const auto [rows, cols] = layer_shape(i, k);
    if (layer(i).weight.rows() != rows || layer(i).weight.cols() != cols || layer(i).bias.size() != rows) {
      throw DataError(std::string("layer ") + layer_name(i) + " has wrong shape");
    }
  }
}

Eigen::VectorXd to_vector(const sift::DescriptorValues& values) {
  Eigen::VectorXd v(kInputDim);
  for (int i = 0; i < kInputDim; ++i) v[i] = values[i];
  return v;
}

Eigen::MatrixXd descriptor_matrix(const sift::DescriptorSet& set) {
  Eigen::MatrixXd m(kInputDim, static_cast<Eigen::Index>(set.descriptors.size()));
  for (std::size_t l = 0; l < set.descriptors.size(); ++l) {
    for (int i = 0; i < kInputDim; ++i) m(i, static_cast<Eigen::Index>(l)) = set.descriptors[l].values[i];
  }
  return m;
}

Eigen::MatrixXd g_forward_batch(const MlpParams& params, const Eigen::MatrixXd& descriptors) {
  Eigen::MatrixXd h = relu((params.g[0].weight * descriptors).colwise() + params.g[0].bias);
  h = relu((params.g[1].weight * h).colwise() + params.g[1].bias);
  Eigen::MatrixXd y = (params.g[2].weight * h).colwise() + params.g[2].bias;
  if (!y.allFinite()) throw NumericalError("numerical overflow in g");
  return y;
}

PartEmbedding g_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  if (x.size() != kInputDim) throw DataError("descriptor must have 128 components");
  const double norm = x.norm();
  if (std::abs(norm - 1.0) > 1e-6) throw DataError("descriptor is not unit-norm (|x| = " + std::to_string(norm) + ")");
  PartEmbedding e;
  e.values = g_forward_batch(params, x);
  e.importance = e.values.norm();
  return e;
}

Eigen::VectorXd pool(std::span<const PartEmbedding> embeddings) {
  if (embeddings.empty()) throw DataError("empty part set");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kEmbedDim);
  for (const auto& e : embeddings) {
    if (e.values.size() != kEmbedDim) throw DataError("embedding must have 128 components");
    sum += e.values;
  }
  return sum;
}

Eigen::VectorXd f_forward(const MlpParams& params, const Eigen::VectorXd& pooled) {
  if (!pooled.allFinite()) throw NumericalError("non-finite pooled vector");
  const Eigen::VectorXd u = pooled.array().tanh().matrix();
  Eigen::VectorXd a = relu(params.f[0].weight * u + params.f[0].bias);
  a = relu(params.f[1].weight * a + params.f[1].bias);
  const Eigen::VectorXd logits = params.f[2].weight * a + params.f[2].bias;
  if (!logits.allFinite()) throw NumericalError("numerical overflow in f");
  return sigmoid(logits);
}

double bce_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& t) {
  if (p.size() != t.size() || p.size() == 0) throw DataError("bce_loss: dimension mismatch");
  double sum = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double q = clip_probability(p[k]);
    sum -= t[k] * std::log(q) + (1.0 - t[k]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(p.size());
}

Eigen::VectorXd set_forward(const MlpParams& params, const Eigen::MatrixXd& descriptors) {
  if (descriptors.cols() == 0) throw DataError("empty part set");
  const Eigen::MatrixXd y = g_forward_batch(params, descriptors);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(kEmbedDim);
  for (Eigen::Index l = 0; l < y.cols(); ++l) pooled += y.col(l);
  return f_forward(params, pooled);
}

double importance(const Eigen::VectorXd& x, const MlpParams& params) { return g_forward(params, x).importance; }

Eigen::VectorXd importances(const Eigen::MatrixXd& descriptors, const MlpParams& params) {
  if (descriptors.cols() == 0) return Eigen::VectorXd();
  return g_forward_batch(params, descriptors).colwise().norm().transpose();
}

double batch_loss(const MlpParams& params, std::span<const BatchItem> batch) {
  if (batch.empty()) throw DataError("empty batch");
  double total = 0;
  for (const auto& item : batch) total += bce_loss(set_forward(params, item.descriptors), item.labels);
  return total / static_cast<double>(batch.size());
}

LossAndGradient backward(const MlpParams& params, std::span<const BatchItem> batch) {
  if (batch.empty()) throw DataError("empty batch");
  const std::size_t k = params.num_labels();
  const double scale = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(k));
  LossAndGradient out{0.0, MlpParams::zeros(k)};
  auto& grad = out.gradient;

  for (const auto& item : batch) {
    const Eigen::MatrixXd& x = item.descriptors;
    if (x.rows() != kInputDim || x.cols() == 0) throw DataError("batch item must be a non-empty 128 x n matrix");
    if (item.labels.size() != static_cast<Eigen::Index>(k)) throw DataError("label dimension mismatch");

    // Forward, keeping pre-activations.
    const Eigen::MatrixXd z1 = (params.g[0].weight * x).colwise() + params.g[0].bias;
    const Eigen::MatrixXd h1 = relu(z1);
    const Eigen::MatrixXd z2 = (params.g[1].weight * h1).colwise() + params.g[1].bias;
    const Eigen::MatrixXd h2 = relu(z2);
    const Eigen::VectorXd h2_sum = h2.rowwise().sum();
    const Eigen::VectorXd pooled =
        params.g[2].weight * h2_sum + params.g[2].bias * static_cast<double>(x.cols());
    const Eigen::VectorXd u = pooled.array().tanh().matrix();
    const Eigen::VectorXd a1 = params.f[0].weight * u + params.f[0].bias;
    const Eigen::VectorXd r1 = relu(a1);
    const Eigen::VectorXd a2 = params.f[1].weight * r1 + params.f[1].bias;
    const Eigen::VectorXd r2 = relu(a2);
    const Eigen::VectorXd logits = params.f[2].weight * r2 + params.f[2].bias;
    const Eigen::VectorXd p = sigmoid(logits);
    out.loss += bce_loss(p, item.labels);

    // d(mean BCE)/d(logit) = p - t, zero where the clip is active.
    Eigen::VectorXd d_logits(k);
    for (std::size_t j = 0; j < k; ++j) {
      const bool clipped = p[j] < kProbabilityClip || p[j] > 1.0 - kProbabilityClip;
      d_logits[j] = clipped ? 0.0 : (p[j] - item.labels[j]) * scale;
    }
    grad.f[2].weight.noalias() += d_logits * r2.transpose();
    grad.f[2].bias += d_logits;
    const Eigen::VectorXd d_a2 = (params.f[2].weight.transpose() * d_logits).cwiseProduct(
        (a2.array() > 0).cast<double>().matrix());
    grad.f[1].weight.noalias() += d_a2 * r1.transpose();
    grad.f[1].bias += d_a2;
    const Eigen::VectorXd d_a1 = (params.f[1].weight.transpose() * d_a2).cwiseProduct(
        (a1.array() > 0).cast<double>().matrix());
    grad.f[0].weight.noalias() += d_a1 * u.transpose();
    grad.f[0].bias += d_a1;
    const Eigen::VectorXd d_pooled =
        (params.f[0].weight.transpose() * d_a1).cwiseProduct((1.0 - u.array().square()).matrix());

    // Sum pooling hands the same upstream gradient to every part.
    grad.g[2].weight.noalias() += d_pooled * h2_sum.transpose();
    grad.g[2].bias += d_pooled * static_cast<double>(x.cols());
    const Eigen::VectorXd d_h2 = params.g[2].weight.transpose() * d_pooled;
    const Eigen::MatrixXd d_z2 = (z2.array() > 0).cast<double>().colwise() * d_h2.array();
    grad.g[1].weight.noalias() += d_z2 * h1.transpose();
    grad.g[1].bias += d_z2.rowwise().sum();
    const Eigen::MatrixXd d_z1 =
        (params.g[1].weight.transpose() * d_z2).cwiseProduct((z1.array() > 0).cast<double>().matrix());
    grad.g[0].weight.noalias() += d_z1 * x.transpose();
    grad.g[0].bias += d_z1.rowwise().sum();
  }
  out.loss /= static_cast<double>(batch.size());
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
  for (int i = kLayerCount - 1; i >= 0; --i) {
    if (!grad.layer(i).weight.allFinite() || !grad.layer(i).bias.allFinite()) {
      throw NumericalError(std::string("non-finite gradient in layer ") + MlpParams::layer_name(i));
    }
  }
  return out;
}

std::vector<std::size_t> subsample_indices(std::size_t available, std::size_t n, Rng& rng) {
  if (available == 0) throw DataError("cannot subsample an empty descriptor set");
  std::vector<std::size_t> out;
  out.reserve(n);
  if (available >= n) {
    std::vector<std::size_t> pool(available);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(pool[i], pool[i + uniform_index(rng, available - i)]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(uniform_index(rng, available));
  }
  return out;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> columns) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(columns[i]));
  }
  return out;
}

void TrainConfig::validate() const {
  if (descriptors_per_font < 1) throw UsageError("descriptors_per_font must be at least 1");
  if (fonts_per_batch < 1) throw UsageError("fonts_per_batch must be at least 1");
  if (!(learning_rate >= 0)) throw UsageError("learning_rate must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw UsageError("adam betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw UsageError("adam epsilon must be positive");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (patience < 1) throw UsageError("patience must be at least 1");
}

TrainState init_train_state(std::size_t num_labels, const TrainConfig& config) {
  TrainState s;
  s.params = MlpParams::he_uniform(num_labels, derive_seed(config.seed, "init"));
  s.adam_m = MlpParams::zeros(num_labels);
  s.adam_v = MlpParams::zeros(num_labels);
  s.best = s.params;
  return s;
}

namespace {

void adam_update(TrainState& s, const MlpParams& grad, const TrainConfig& c) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + c.epsilon);
  };
  for (int i = 0; i < kLayerCount; ++i) {
    update(s.params.layer(i).weight, grad.layer(i).weight, s.adam_m.layer(i).weight, s.adam_v.layer(i).weight);
    update(s.params.layer(i).bias, grad.layer(i).bias, s.adam_m.layer(i).bias, s.adam_v.layer(i).bias);
  }
  if (!s.params.all_finite()) throw NumericalError("parameters became non-finite");
}

double validation_loss(const MlpParams& params, std::span<const TrainingFont> fonts, const TrainConfig& c) {
  double total = 0;
  for (std::size_t i = 0; i < fonts.size(); ++i) {
    Rng rng = make_rng(c.seed, "validation", i);
    const auto idx = subsample_indices(static_cast<std::size_t>(fonts[i].descriptors.cols()),
                                       c.descriptors_per_font, rng);
    total += bce_loss(set_forward(params, gather_columns(fonts[i].descriptors, idx)), fonts[i].labels);
  }
  return total / static_cast<double>(fonts.size());
}

}  // namespace

void train_epoch(TrainState& state, std::span<const TrainingFont> train, std::span<const TrainingFont> val,
                 const TrainConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const int epoch = state.epochs_done + 1;
  Rng rng = make_rng(config.seed, "epoch", static_cast<std::uint64_t>(epoch));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  double loss_sum = 0;
  std::vector<BatchItem> batch;
  for (std::size_t start = 0; start < order.size(); start += config.fonts_per_batch) {
    const std::size_t end = std::min(order.size(), start + config.fonts_per_batch);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) {
      const auto& font = train[order[i]];
      const auto idx =
          subsample_indices(static_cast<std::size_t>(font.descriptors.cols()), config.descriptors_per_font, rng);
      batch.push_back({gather_columns(font.descriptors, idx), font.labels});
    }
    const auto lg = backward(state.params, batch);
    loss_sum += lg.loss * static_cast<double>(batch.size());
    adam_update(state, lg.gradient, config);
  }

  EpochStats stats;
  stats.epoch = epoch;
  stats.train_loss = loss_sum / static_cast<double>(train.size());
  stats.val_loss = val.empty() ? stats.train_loss : validation_loss(state.params, val, config);
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  state.history.push_back(stats);
  state.epochs_done = epoch;

  if (stats.val_loss < state.best_val) {
    state.best_val = stats.val_loss;
    state.best = state.params;
    state.best_epoch = epoch;
    state.bad_epochs = 0;
  } else {
    ++state.bad_epochs;
  }
  if (state.bad_epochs >= config.patience || state.epochs_done >= config.epochs) state.finished = true;
}

TrainState train(std::span<const TrainingFont> train_fonts, std::span<const TrainingFont> val_fonts,
                 std::size_t num_labels, const TrainConfig& config, const TrainState* resume,
                 const EpochCallback& on_epoch, std::size_t* skipped) {
  config.validate();
  std::vector<TrainingFont> usable_train;
  std::vector<TrainingFont> usable_val;
  std::size_t dropped = 0;
  for (const auto& f : train_fonts) {
    if (f.descriptors.cols() > 0) usable_train.push_back(f); else ++dropped;
  }
  for (const auto& f : val_fonts) {
    if (f.descriptors.cols() > 0) usable_val.push_back(f); else ++dropped;
  }
  if (skipped) *skipped = dropped;
  if (usable_train.empty()) throw DataError("no training font has descriptors");
  for (const auto& f : usable_train) {
    if (f.labels.size() != static_cast<Eigen::Index>(num_labels)) throw DataError("label dimension mismatch for " + f.font_id);
  }

  TrainState state = resume ? *resume : init_train_state(num_labels, config);
  state.finished = state.bad_epochs >= config.patience || state.epochs_done >= config.epochs;
  while (!state.finished) {
    train_epoch(state, usable_train, usable_val, config);
    if (on_epoch) on_epoch(state);
  }
  return state;
}

Eigen::MatrixXd canonical_order(const Eigen::MatrixXd& descriptors) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(descriptors.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < descriptors.rows(); ++r) {
      if (descriptors(r, a) != descriptors(r, b)) return descriptors(r, a) < descriptors(r, b);
    }
    return false;
  });
  Eigen::MatrixXd out(descriptors.rows(), descriptors.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = descriptors.col(order[i]);
  return out;
}

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t r) { return derive_seed(seed, "predict-repeat", r); }

Eigen::VectorXd predict_once(const Eigen::MatrixXd& descriptors, const MlpParams& params,
                             std::size_t descriptors_per_font, std::uint64_t subsample_seed) {
  if (descriptors.cols() == 0) throw DataError("cannot predict from an empty descriptor set");
  const Eigen::MatrixXd canonical = canonical_order(descriptors);
  Rng rng(subsample_seed);
  const auto idx = subsample_indices(static_cast<std::size_t>(canonical.cols()), descriptors_per_font, rng);
  return set_forward(params, gather_columns(canonical, idx));
}

Eigen::VectorXd predict(const Eigen::MatrixXd& descriptors, const MlpParams& params, const PredictConfig& config) {
  if (config.n_repeats < 1) throw UsageError("n_repeats must be at least 1");
  if (descriptors.cols() == 0) throw DataError("cannot predict from an empty descriptor set");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.num_labels()));
  for (std::size_t r = 0; r < config.n_repeats; ++r) {
    sum += predict_once(descriptors, params, config.descriptors_per_font, repeat_seed(config.seed, r));
  }
  return sum / static_cast<double>(config.n_repeats);
}

}  // namespace fontparts::deepsets
