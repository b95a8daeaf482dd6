#pragma once

// "GGT1" binary tensor container:
//   bytes 0..3  magic "GGT1"
//   u32 LE      rank
//   rank × u32 LE dims
//   row-major IEEE-754 float32 LE payload

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/transfer.hpp"

namespace gatgrasp {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline constexpr std::array<char, 4> kTensorMagic = {'G', 'G', 'T', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  if (t.element_count() != t.data.size()) throw Error(ErrorCode::DimensionMismatch, "tensor dims/data mismatch");
  std::string out(kTensorMagic.begin(), kTensorMagic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float f : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Tensor decode_tensor(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8) throw Error(ErrorCode::ParseError, "tensor file truncated");
  if (std::memcmp(p, kTensorMagic.data(), 4) != 0) throw Error(ErrorCode::MagicMismatch, "missing GGT1 magic");
  Tensor t;
  const std::uint32_t rank = detail::get_u32(p + 4);
  if (bytes.size() < 8 + 4ull * rank) throw Error(ErrorCode::ParseError, "tensor header truncated");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(detail::get_u32(p + 8 + 4 * i));
    count *= t.dims.back();
  }
  const std::size_t offset = 8 + 4ull * rank;
  if (bytes.size() != offset + 4 * count) throw Error(ErrorCode::ParseError, "tensor payload size mismatch");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = std::bit_cast<float>(detail::get_u32(p + offset + 4 * i));
  return t;
}

inline std::string read_file_bytes(const std::filesystem::path& path, ErrorCode missing_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing_code, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file_bytes(path, ErrorCode::MissingTensorFile));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_tensor(t)); }

// Feature maps are rank 3 (H, W, D); image dims travel separately.

inline Tensor to_tensor(const FeatureMap& map) {
  return {{static_cast<std::uint32_t>(map.h), static_cast<std::uint32_t>(map.w), static_cast<std::uint32_t>(map.d)},
          map.data};
}

inline FeatureMap feature_map_from_tensor(Tensor t, ImageDims image_dims) {
  if (t.dims.size() != 3) throw Error(ErrorCode::DimensionMismatch, "feature tensor must be rank 3");
  FeatureMap map{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                 std::move(t.data), image_dims};
  map.validate();
  return map;
}

inline FeatureMap read_feature_map(const std::filesystem::path& path, ImageDims image_dims) {
  return feature_map_from_tensor(read_tensor(path), image_dims);
}

// Depth scenes are rank 2 (H, W) in meters.

inline Tensor to_tensor(const DepthScene& scene) {
  Tensor t{{static_cast<std::uint32_t>(scene.height()), static_cast<std::uint32_t>(scene.width())}, {}};
  t.data.reserve(scene.data().size());
  for (double d : scene.data()) t.data.push_back(static_cast<float>(d));
  return t;
}

inline DepthScene depth_scene_from_tensor(const Tensor& t, const CameraIntrinsics& k) {
  if (t.dims.size() != 2) throw Error(ErrorCode::DimensionMismatch, "depth tensor must be rank 2");
  if (static_cast<int>(t.dims[0]) != k.height || static_cast<int>(t.dims[1]) != k.width) {
    throw Error(ErrorCode::DimensionMismatch, "depth tensor shape does not match intrinsics");
  }
  return DepthScene(k, std::vector<double>(t.data.begin(), t.data.end()));
}

/// Rounds every depth to float32 so that an in-memory scene matches its
/// on-disk form exactly.
inline DepthScene quantize_to_float(const DepthScene& scene) {
  return depth_scene_from_tensor(to_tensor(scene), scene.intrinsics());
}

}  // namespace gatgrasp
