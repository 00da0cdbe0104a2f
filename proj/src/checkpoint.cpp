#include "fontparts/checkpoint.hpp"

#include <numeric>

#include "fontparts/binary_io.hpp"

namespace fontparts::deepsets {

namespace {

constexpr std::uint32_t kTrainStateVersion = 1;

void write_params(BinaryWriter& w, const MlpParams& params) {
  for (int i = 0; i < kLayerCount; ++i) {
    const auto& layer = params.layer(i);
    w.u32(static_cast<std::uint32_t>(layer.weight.rows()));
    w.u32(static_cast<std::uint32_t>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.f64(layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias[r]);
  }
}

MlpParams read_params(BinaryReader& r, std::uint32_t num_labels) {
  MlpParams params = MlpParams::zeros(num_labels);
  for (int i = 0; i < kLayerCount; ++i) {
    auto& layer = params.layer(i);
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows != layer.weight.rows() || cols != layer.weight.cols()) {
      throw DataError(r.source() + ": layer " + MlpParams::layer_name(i) + " has shape " + std::to_string(rows) +
                      "x" + std::to_string(cols));
    }
    for (Eigen::Index a = 0; a < layer.weight.rows(); ++a) {
      for (Eigen::Index b = 0; b < layer.weight.cols(); ++b) layer.weight(a, b) = r.f64();
    }
    for (Eigen::Index a = 0; a < layer.bias.size(); ++a) layer.bias[a] = r.f64();
  }
  return params;
}

std::uint64_t byte_sum(std::span<const std::uint8_t> bytes) {
  return std::accumulate(bytes.begin(), bytes.end(), std::uint64_t{0});
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params) {
  params.validate();
  BinaryWriter w;
  w.magic("GIMP");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.num_labels()));
  write_params(w, params);
  const std::uint64_t checksum = byte_sum(w.buffer());
  w.u64(checksum);
  return w.take();
}

MlpParams decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 8) throw DataError(source + ": checkpoint too short");
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  BinaryReader tail(std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 8), source);
  if (tail.u64() != byte_sum(body)) throw DataError(source + ": checkpoint checksum mismatch");

  BinaryReader r(body, source);
  r.expect_magic("GIMP");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  const auto k = r.u32();
  if (k == 0) throw DataError(source + ": checkpoint has K = 0");
  MlpParams params = read_params(r, k);
  if (r.remaining() != 0) throw DataError(source + ": trailing bytes in checkpoint");
  if (!params.all_finite()) throw DataError(source + ": checkpoint contains non-finite parameters");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  write_file_bytes(path, encode_checkpoint(params));
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

void save_train_state(const std::filesystem::path& path, const TrainState& s) {
  BinaryWriter w;
  w.magic("GTST");
  w.u32(kTrainStateVersion);
  w.u32(static_cast<std::uint32_t>(s.params.num_labels()));
  write_params(w, s.params);
  write_params(w, s.adam_m);
  write_params(w, s.adam_v);
  write_params(w, s.best);
  w.u64(s.step);
  w.u32(static_cast<std::uint32_t>(s.epochs_done));
  w.f64(s.best_val);
  w.u32(static_cast<std::uint32_t>(s.best_epoch));
  w.u32(static_cast<std::uint32_t>(s.bad_epochs));
  w.u32(s.finished ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.history.size()));
  for (const auto& e : s.history) {
    w.u32(static_cast<std::uint32_t>(e.epoch));
    w.f64(e.train_loss);
    w.f64(e.val_loss);
    w.f64(e.seconds);
  }
  write_file_bytes(path, w.buffer());
}

TrainState load_train_state(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  BinaryReader r(bytes, path.string());
  r.expect_magic("GTST");
  if (r.u32() != kTrainStateVersion) throw DataError(path.string() + ": unsupported train state version");
  const auto k = r.u32();
  TrainState s;
  s.params = read_params(r, k);
  s.adam_m = read_params(r, k);
  s.adam_v = read_params(r, k);
  s.best = read_params(r, k);
  s.step = r.u64();
  s.epochs_done = static_cast<int>(r.u32());
  s.best_val = r.f64();
  s.best_epoch = static_cast<int>(r.u32());
  s.bad_epochs = static_cast<int>(r.u32());
  s.finished = r.u32() != 0;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    EpochStats e;
    e.epoch = static_cast<int>(r.u32());
    e.train_loss = r.f64();
    e.val_loss = r.f64();
    e.seconds = r.f64();
    s.history.push_back(e);
  }
  return s;
}

}  // namespace fontparts::deepsets
