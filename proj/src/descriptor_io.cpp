#include "fontparts/descriptor_io.hpp"

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"

namespace fontparts::sift {

std::vector<std::uint8_t> encode_descriptor_set(const DescriptorSet& set) {
  BinaryWriter w;
  w.magic("GIDX");
  w.u32(kDescriptorCacheVersion);
  w.string(set.font_id);
  w.u32(static_cast<std::uint32_t>(set.descriptors.size()));
  w.u32(kDescriptorDim);
  for (const auto& d : set.descriptors) {
    for (float v : d.values) w.f32(v);
  }
  for (const auto& d : set.descriptors) {
    w.f32(static_cast<float>(d.keypoint.x));
    w.f32(static_cast<float>(d.keypoint.y));
    w.f32(static_cast<float>(d.keypoint.sigma));
    w.f32(static_cast<float>(d.keypoint.orientation));
    w.u16(d.glyph_index);
  }
  return w.take();
}

DescriptorSet decode_descriptor_set(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  BinaryReader r(bytes, source);
  r.expect_magic("GIDX");
  const auto version = r.u32();
  if (version != kDescriptorCacheVersion) {
    throw DataError(source + ": unsupported descriptor cache version " + std::to_string(version));
  }
  DescriptorSet set;
  set.font_id = r.string();
  const auto count = r.u32();
  const auto dim = r.u32();
  if (dim != kDescriptorDim) throw DataError(source + ": descriptor dimension " + std::to_string(dim));
  set.descriptors.resize(count);
  for (auto& d : set.descriptors) {
    for (auto& v : d.values) v = r.f32();
  }
  for (auto& d : set.descriptors) {
    d.keypoint.x = r.f32();
    d.keypoint.y = r.f32();
    d.keypoint.sigma = r.f32();
    d.keypoint.orientation = r.f32();
    d.glyph_index = r.u16();
  }
  if (r.remaining() != 0) throw DataError(source + ": trailing bytes after descriptor metadata");
  return set;
}

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set) {
  write_file_bytes(path, encode_descriptor_set(set));
}

DescriptorSet load_descriptor_set(const std::filesystem::path& path) {
  return decode_descriptor_set(read_file_bytes(path), path.string());
}

}  // namespace fontparts::sift
