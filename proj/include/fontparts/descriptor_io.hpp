#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fontparts/sift.hpp"

namespace fontparts::sift {

inline constexpr std::uint32_t kDescriptorCacheVersion = 1;

/// GIDX layout, little-endian: magic, version u32, font_id (u32 length + UTF-8),
/// count u32, dim u32, count*dim f32 values, then per descriptor
/// x, y, sigma, orientation (f32) and glyph index (u16).
std::vector<std::uint8_t> encode_descriptor_set(const DescriptorSet& set);
DescriptorSet decode_descriptor_set(const std::vector<std::uint8_t>& bytes, const std::string& source = "GIDX");

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set);
DescriptorSet load_descriptor_set(const std::filesystem::path& path);

}  // namespace fontparts::sift
