#pragma once

// Contact-point transfer between images through dense feature
// correspondence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/pointing.hpp"

namespace gatgrasp {

/// h × w grid of d-channel descriptors, row-major with channels innermost.
/// `image_dims` is the pixel size of the image the grid was extracted from.
struct FeatureMap {
  int h = 0;
  int w = 0;
  int d = 0;
  std::vector<float> data;
  ImageDims image_dims{};

  std::size_t cell_offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(w) + static_cast<std::size_t>(col)) *
           static_cast<std::size_t>(d);
  }
  const float* cell(int row, int col) const { return data.data() + cell_offset(row, col); }
  float* cell(int row, int col) { return data.data() + cell_offset(row, col); }

  /// Pixel coordinates of the center of a grid cell.
  PixelPoint cell_center(int row, int col) const {
    return {(col + 0.5) * image_dims.width / w - 0.5, (row + 0.5) * image_dims.height / h - 0.5};
  }

  void validate() const {
    if (h <= 0 || w <= 0 || d <= 0) throw Error(ErrorCode::InvalidArgument, "feature grid dims must be positive");
    if (image_dims.width <= 0 || image_dims.height <= 0) {
      throw Error(ErrorCode::InvalidArgument, "feature map image dims must be positive");
    }
    if (data.size() != static_cast<std::size_t>(h) * w * d) {
      throw Error(ErrorCode::DimensionMismatch, "feature data size does not match h*w*d");
    }
    bool any_nonzero = false;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double sq = 0.0;
        const float* f = cell(r, c);
        for (int k = 0; k < d; ++k) {
          if (std::isnan(f[k])) throw Error(ErrorCode::InvalidArgument, "feature map contains NaN");
          sq += static_cast<double>(f[k]) * f[k];
        }
        any_nonzero = any_nonzero || sq > 0.0;
      }
    }
    if (!any_nonzero) throw Error(ErrorCode::InvalidArgument, "feature map is identically zero");
  }
};

namespace detail {

/// Image pixel → continuous grid coordinate, snapped to the integer when
/// within 1e-9 so exact cell centers sample exactly one cell.
inline double pixel_to_grid(double x, int image_extent, int grid_extent) {
  double g = (x + 0.5) * grid_extent / image_extent - 0.5;
  const double snapped = std::round(g);
  if (std::abs(g - snapped) < 1e-9) g = snapped;
  return std::clamp(g, 0.0, static_cast<double>(grid_extent - 1));
}

}  // namespace detail

/// Bilinear lookup at an image pixel with edge clamping.
inline std::vector<double> sample_feature(const FeatureMap& map, const PixelPoint& pixel) {
  if (!contains(map.image_dims, pixel)) throw Error(ErrorCode::OutOfBounds, "sample pixel outside image");
  const double gx = detail::pixel_to_grid(pixel.u, map.image_dims.width, map.w);
  const double gy = detail::pixel_to_grid(pixel.v, map.image_dims.height, map.h);
  const int c0 = static_cast<int>(std::floor(gx));
  const int r0 = static_cast<int>(std::floor(gy));
  const int c1 = std::min(c0 + 1, map.w - 1);
  const int r1 = std::min(r0 + 1, map.h - 1);
  const double ax = gx - c0;
  const double ay = gy - r0;

  std::vector<double> out(static_cast<std::size_t>(map.d), 0.0);
  auto accumulate = [&](int r, int c, double weight) {
    if (weight == 0.0) return;
    const float* f = map.cell(r, c);
    for (int k = 0; k < map.d; ++k) out[static_cast<std::size_t>(k)] += weight * f[k];
  };
  accumulate(r0, c0, (1.0 - ax) * (1.0 - ay));
  accumulate(r0, c1, ax * (1.0 - ay));
  accumulate(r1, c0, (1.0 - ax) * ay);
  accumulate(r1, c1, ax * ay);
  return out;
}

struct GridCell {
  int row = 0;
  int col = 0;
  bool operator==(const GridCell&) const = default;
};

struct Correspondence {
  PixelPoint target_pixel;
  double similarity = 0.0;
  GridCell target_cell;
};

struct TransferOptions {
  /// Only target cells whose center pixel falls inside this rectangle are
  /// considered.
  std::optional<CropRect> region;
  /// Optional window: only cells whose center pixel lies within
  /// `window_radius` pixels of `window_center`.
  std::optional<PixelPoint> window_center;
  double window_radius = 0.0;
};

/// Maps `c_src` to the most similar target cell (cosine). Ties go to the
/// lowest row-major cell index. Cells with a zero descriptor score 0.
inline Correspondence transfer_contact(const FeatureMap& src, const PixelPoint& c_src, const FeatureMap& tgt,
                                       const TransferOptions& options = {}) {
  if (src.d != tgt.d) throw Error(ErrorCode::ChannelMismatch, "source and target channel counts differ");
  const std::vector<double> query = sample_feature(src, c_src);
  double qn = 0.0;
  for (double x : query) qn += x * x;
  qn = std::sqrt(qn);
  if (qn < 1e-12) throw Error(ErrorCode::ZeroQueryFeature, "source descriptor has zero norm");

  std::optional<Correspondence> best;
  for (int r = 0; r < tgt.h; ++r) {
    for (int c = 0; c < tgt.w; ++c) {
      const PixelPoint center = tgt.cell_center(r, c);
      if (options.region && !options.region->contains(center)) continue;
      if (options.window_center &&
          std::hypot(center.u - options.window_center->u, center.v - options.window_center->v) >
              options.window_radius) {
        continue;
      }
      const float* f = tgt.cell(r, c);
      double dot = 0.0;
      double fn = 0.0;
      for (int k = 0; k < tgt.d; ++k) {
        dot += query[static_cast<std::size_t>(k)] * f[k];
        fn += static_cast<double>(f[k]) * f[k];
      }
      fn = std::sqrt(fn);
      const double sim = fn < 1e-12 ? 0.0 : std::clamp(dot / (qn * fn), -1.0, 1.0);
      if (!best || sim > best->similarity) best = Correspondence{center, sim, {r, c}};
    }
  }
  if (!best) throw Error(ErrorCode::OutOfBounds, "no target cell inside the transfer region");
  return *best;
}

}  // namespace gatgrasp
