#pragma once

// Distance-to-mask metric and binary PGM masks.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/tensor_io.hpp"

namespace gatgrasp {

/// Row-major boolean image.
struct Mask {
  ImageDims dims;
  std::vector<unsigned char> bits;  // 0 / 1

  Mask() = default;
  explicit Mask(ImageDims d) : dims(d), bits(static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.height), 0) {}

  bool at(int row, int col) const {
    return bits[static_cast<std::size_t>(row) * static_cast<std::size_t>(dims.width) + static_cast<std::size_t>(col)] != 0;
  }
  void set(int row, int col, bool value = true) {
    bits[static_cast<std::size_t>(row) * static_cast<std::size_t>(dims.width) + static_cast<std::size_t>(col)] =
        value ? 1 : 0;
  }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
};

/// Shortest distance from `pred` to a mask pixel center, divided by the
/// image diagonal. A prediction whose own pixel is in the mask scores 0.
inline double compute_dtm(const PixelPoint& pred, const Mask& mask) {
  const auto& dims = mask.dims;
  if (mask.bits.size() != static_cast<std::size_t>(dims.width) * static_cast<std::size_t>(dims.height) ||
      dims.width <= 0 || dims.height <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "mask size does not match its dims");
  }
  if (mask.count() == 0) throw Error(ErrorCode::EmptyMask, "mask has no pixels");
  if (contains(dims, pred) && mask.at(static_cast<int>(nearest_cell(pred.v)), static_cast<int>(nearest_cell(pred.u)))) {
    return 0.0;
  }
  double best_sq = std::numeric_limits<double>::infinity();
  for (int row = 0; row < dims.height; ++row) {
    for (int col = 0; col < dims.width; ++col) {
      if (!mask.at(row, col)) continue;
      const double du = col - pred.u;
      const double dv = row - pred.v;
      best_sq = std::min(best_sq, du * du + dv * dv);
    }
  }
  return std::sqrt(best_sq) / dims.diagonal();
}

/// Binary PGM (P5). Any nonzero sample is in the mask.
inline Mask decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        return;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error(ErrorCode::ParseError, "malformed PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(ErrorCode::ParseError, "not a P5 PGM");
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw Error(ErrorCode::ParseError, "bad PGM header");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::ParseError, "bad PGM header terminator");
  }
  ++pos;
  const std::size_t sample = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n * sample) throw Error(ErrorCode::ParseError, "PGM payload truncated");
  Mask mask(ImageDims{static_cast<int>(width), static_cast<int>(height)});
  for (std::size_t i = 0; i < n; ++i) {
    bool on = false;
    for (std::size_t b = 0; b < sample; ++b) on = on || bytes[pos + i * sample + b] != 0;
    mask.bits[i] = on ? 1 : 0;
  }
  return mask;
}

inline std::string encode_pgm(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.dims.width) + " " + std::to_string(mask.dims.height) + "\n255\n";
  out.reserve(out.size() + mask.bits.size());
  for (auto b : mask.bits) out.push_back(b ? static_cast<char>(255) : '\0');
  return out;
}

inline Mask read_mask(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path, ErrorCode::IoError)); }
inline void write_mask(const std::filesystem::path& path, const Mask& mask) { write_file_bytes(path, encode_pgm(mask)); }

}  // namespace gatgrasp
