#pragma once

// Pointing-gesture localization: depth refinement of keypoints, pointing ray
// estimation, ray/depth-map intersection and target-region cropping.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/gesture.hpp"

namespace gatgrasp {

/// Depth grid with its pinhole intrinsics. Cells that are NaN or
/// non-positive are invalid.
class DepthScene {
 public:
  static constexpr double kMaxDepth = 100.0;

  DepthScene() = default;

  DepthScene(CameraIntrinsics intrinsics, std::vector<double> depth)
      : intrinsics_(intrinsics), depth_(std::move(depth)) {
    intrinsics_.validate();
    if (depth_.size() != static_cast<std::size_t>(intrinsics_.width) * static_cast<std::size_t>(intrinsics_.height)) {
      throw Error(ErrorCode::DimensionMismatch, "depth grid size does not match intrinsics");
    }
    for (double d : depth_) {
      if (is_valid_depth(d) && !(d < kMaxDepth)) {
        throw Error(ErrorCode::InvalidArgument, "depth value beyond 100 m");
      }
    }
  }

  static bool is_valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }
  ImageDims dims() const { return intrinsics_.dims(); }
  const std::vector<double>& data() const { return depth_; }

  double at(int row, int col) const {
    return depth_[static_cast<std::size_t>(row) * static_cast<std::size_t>(intrinsics_.width) +
                  static_cast<std::size_t>(col)];
  }
  bool valid(int row, int col) const { return is_valid_depth(at(row, col)); }

  /// Depth of the valid cell closest to `pixel` (Euclidean distance between
  /// `pixel` and cell centers, row-major tie-break) within `radius` pixels.
  std::optional<double> nearest_valid_depth(const PixelPoint& pixel, double radius) const {
    const long r = static_cast<long>(std::ceil(radius));
    const long cu = nearest_cell(pixel.u);
    const long cv = nearest_cell(pixel.v);
    std::optional<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (long row = std::max(0L, cv - r); row <= std::min<long>(height() - 1, cv + r); ++row) {
      for (long col = std::max(0L, cu - r); col <= std::min<long>(width() - 1, cu + r); ++col) {
        if (!valid(static_cast<int>(row), static_cast<int>(col))) continue;
        const double dist = std::hypot(static_cast<double>(col) - pixel.u, static_cast<double>(row) - pixel.v);
        if (dist <= radius && dist < best_dist) {
          best_dist = dist;
          best = at(static_cast<int>(row), static_cast<int>(col));
        }
      }
    }
    return best;
  }

 private:
  CameraIntrinsics intrinsics_{};
  std::vector<double> depth_;
};

struct RefinedHand {
  HandKeypoints hand;
  std::array<bool, kNumJoints> refined{};
};

inline constexpr double kRefineSearchRadius = 5.0;  // pixels

/// Re-lifts every keypoint to the measured depth at its projection. Joints
/// that project outside the image, or with no valid depth within the search
/// radius, keep their raw value and are flagged as unrefined.
inline RefinedHand refine_keypoints(const HandKeypoints& raw, const DepthScene& scene,
                                    double search_radius = kRefineSearchRadius) {
  const auto& k = scene.intrinsics();
  RefinedHand out{raw, {}};
  bool any_in_frame = false;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const PixelPoint px = project(raw[j], k);
    if (!contains(scene.dims(), px)) continue;
    any_in_frame = true;
    if (auto depth = scene.nearest_valid_depth(px, search_radius)) {
      out.hand[j] = backproject(px, *depth, k);
      out.refined[j] = true;
    }
  }
  if (!any_in_frame) throw Error(ErrorCode::AllOutOfFrame, "no keypoint projects into the image");
  return out;
}

struct PointingRay {
  Ray ray;
  std::array<bool, 4> inliers{};  // index MCP, PIP, DIP, tip
  std::size_t inlier_count = 0;
  double residual = 0.0;
  double fingertip_parameter = 0.0;  // largest ray parameter among inliers
};

/// Fits the pointing ray through the index finger. The origin is the wrist
/// projected onto the fitted line; the direction runs from the wrist side
/// toward the fingertip.
inline PointingRay estimate_pointing_ray(const HandKeypoints& hand, const LineFitOptions& options = {}) {
  std::array<Vec3, 4> index{};
  for (std::size_t i = 0; i < 4; ++i) index[i] = hand[landmark::kIndexFinger[i]];
  double spread = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) spread = std::max(spread, (index[i] - index[j]).norm());
  if (spread < 1e-3) throw Error(ErrorCode::DegenerateGesture, "index keypoints nearly coincide");

  const LineFit fit = fit_line_ransac(index, options);
  const Vec3 wrist = hand[landmark::kWrist];
  const Vec3& c = fit.ray.origin();
  Vec3 d = fit.ray.direction();
  if (d.dot(c - wrist) < 0.0) d = -d;
  const Vec3 origin = c + d * (wrist - c).dot(d);

  PointingRay out;
  out.ray = Ray(origin, d);
  out.inlier_count = fit.inlier_count;
  out.residual = fit.residual;
  out.fingertip_parameter = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    out.inliers[i] = fit.inliers[i];
    if (fit.inliers[i]) out.fingertip_parameter = std::max(out.fingertip_parameter, out.ray.parameter_of(index[i]));
  }
  return out;
}

struct IntersectOptions {
  double epsilon = 0.01;  // meters, distance from the ray
  double min_t = 0.05;    // meters, self-hit exclusion along the ray
};

struct RayHit {
  Vec3 point;
  PixelPoint pixel;
  double t = 0.0;
  int row = 0;
  int col = 0;
};

/// First surface along the ray: among back-projected valid cells lying
/// within `epsilon` of the ray at parameter t > min_t, the one with the
/// smallest t. Equal t resolves to the first cell in row-major order.
inline RayHit intersect_ray_depth(const Ray& ray, const DepthScene& scene, const IntersectOptions& options = {}) {
  if (!(options.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  const auto& k = scene.intrinsics();
  std::optional<RayHit> best;
  for (int row = 0; row < scene.height(); ++row) {
    for (int col = 0; col < scene.width(); ++col) {
      const double d = scene.at(row, col);
      if (!DepthScene::is_valid_depth(d)) continue;
      const Vec3 p = backproject({static_cast<double>(col), static_cast<double>(row)}, d, k);
      const double t = ray.parameter_of(p);
      if (!(t > options.min_t)) continue;
      if (!(ray.line_distance(p) < options.epsilon)) continue;
      if (!best || t < best->t) best = RayHit{p, {}, t, row, col};
    }
  }
  if (!best) throw Error(ErrorCode::NoIntersection, "pointing ray does not meet the depth map");
  best->pixel = project(best->point, k);
  return *best;
}

/// Axis-aligned integer pixel rectangle.
struct CropRect {
  int u0 = 0;
  int v0 = 0;
  int w = 0;
  int h = 0;

  bool contains(const PixelPoint& p) const {
    return p.u >= u0 - 0.5 && p.u < u0 + w - 0.5 && p.v >= v0 - 0.5 && p.v < v0 + h - 0.5;
  }
  bool operator==(const CropRect&) const = default;
};

inline constexpr int kDefaultCropSize = 224;

/// Square of side `size` centered on the rounded pixel, shifted (never
/// shrunk) to lie inside the image.
inline CropRect crop_region(const PixelPoint& center, int size, const ImageDims& dims) {
  if (size <= 0) throw Error(ErrorCode::InvalidArgument, "crop size must be positive");
  if (size > std::min(dims.width, dims.height)) {
    throw Error(ErrorCode::SizeExceedsImage, "crop larger than image");
  }
  const long cu = nearest_cell(center.u);
  const long cv = nearest_cell(center.v);
  const long u0 = std::clamp<long>(cu - size / 2, 0, dims.width - size);
  const long v0 = std::clamp<long>(cv - size / 2, 0, dims.height - size);
  return {static_cast<int>(u0), static_cast<int>(v0), size, size};
}

inline CropRect full_image_rect(const ImageDims& dims) { return {0, 0, dims.width, dims.height}; }

struct PointingOptions {
  LineFitOptions line{};
  IntersectOptions intersect{};
  int crop_size = kDefaultCropSize;
  double refine_radius = kRefineSearchRadius;
  /// When set, the self-hit band starts this far past the fingertip instead
  /// of at the ray origin, so the pointing hand itself is never hit.
  bool exclude_past_fingertip = true;
};

struct PointingResult {
  PointingRay ray;
  RefinedHand refined;
  RayHit hit;
  CropRect crop;
};

/// Full pointing stage: refine → fit → intersect → crop.
inline PointingResult locate_target(const HandKeypoints& pointing_hand, const DepthScene& scene,
                                    const PointingOptions& options = {}) {
  PointingResult out;
  out.refined = refine_keypoints(pointing_hand, scene, options.refine_radius);
  out.ray = estimate_pointing_ray(out.refined.hand, options.line);
  IntersectOptions io = options.intersect;
  if (options.exclude_past_fingertip) io.min_t = std::max(io.min_t, out.ray.fingertip_parameter + io.min_t);
  out.hit = intersect_ray_depth(out.ray.ray, scene, io);
  out.crop = crop_region(out.hit.pixel, options.crop_size, scene.dims());
  return out;
}

}  // namespace gatgrasp
