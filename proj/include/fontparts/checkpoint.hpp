#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fontparts/deepsets.hpp"

namespace fontparts::deepsets {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// GIMP layout, little-endian: magic, version u32, K u32, then for g1..g3, f1..f3:
/// rows u32, cols u32, row-major f64 weights, f64 biases; trailing u64 byte-sum checksum.
std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params);
MlpParams decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "GIMP");

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

/// Optimizer state for resuming training; a private format beside the checkpoint.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace fontparts::deepsets
