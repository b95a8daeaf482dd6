#pragma once

// Camera model, rotations and robust 3D line fitting shared by the rest of
// the library. Everything here is a pure function of its inputs.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"

namespace gatgrasp {

/// Metric point or direction, camera frame unless stated otherwise.
using Vec3 = Eigen::Vector3d;

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Proper rotation matrix. Construction validates orthonormality and a
/// positive determinant.
class Rotation3 {
 public:
  static constexpr double kValidationTolerance = 1e-6;

  Rotation3() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation3 identity() { return Rotation3(); }

  /// Throws InvalidRotation when |RᵀR − I|_F or |det R − 1| exceeds
  /// kValidationTolerance.
  static Rotation3 from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::InvalidRotation, "matrix has non-finite entries");
    }
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
    const double det = m.determinant();
    if (ortho > kValidationTolerance || std::abs(det - 1.0) > kValidationTolerance) {
      throw Error(ErrorCode::InvalidRotation,
                  "not in SO(3): orthogonality error " + std::to_string(ortho) + ", det " +
                      std::to_string(det));
    }
    return Rotation3(m);
  }

  /// Builds the rotation whose columns are the given axes.
  static Rotation3 from_columns(const Vec3& x, const Vec3& y, const Vec3& z) {
    Eigen::Matrix3d m;
    m.col(0) = x;
    m.col(1) = y;
    m.col(2) = z;
    return from_matrix(m);
  }

  /// Rodrigues formula; `axis` need not be normalized but must be nonzero.
  static Rotation3 from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero rotation axis");
    return Rotation3(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix());
  }

  /// Unit quaternion in (w, x, y, z) order.
  static Rotation3 from_quaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero quaternion");
    return Rotation3(Eigen::Quaterniond(w / n, x / n, y / n, z / n).toRotationMatrix());
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  Vec3 col(int i) const { return m_.col(i); }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation3 transpose() const { return Rotation3(m_.transpose()); }
  Rotation3 operator*(const Rotation3& other) const { return Rotation3(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Row-major flattening.
  std::array<double, 9> row_major() const {
    std::array<double, 9> out{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r * 3 + c)] = m_(r, c);
    return out;
  }

 private:
  explicit Rotation3(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

struct ImageDims {
  int width = 0;
  int height = 0;

  double diagonal() const {
    const double w = width, h = height;
    return std::sqrt(w * w + h * h);
  }
  bool operator==(const ImageDims&) const = default;
};

/// Continuous pixel coordinates; (0, 0) is the center of the top-left pixel.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  bool operator==(const PixelPoint&) const = default;
};

/// A pixel is inside an image when it falls within the footprint of some
/// pixel, i.e. u ∈ [−0.5, width − 0.5) and likewise for v.
inline bool contains(const ImageDims& dims, const PixelPoint& p) {
  return std::isfinite(p.u) && std::isfinite(p.v) && p.u >= -0.5 && p.v >= -0.5 &&
         p.u < dims.width - 0.5 && p.v < dims.height - 0.5;
}

/// Index of the pixel whose footprint contains `x` (round half up).
inline long nearest_cell(double x) { return static_cast<long>(std::floor(x + 0.5)); }

/// Pinhole intrinsics without distortion.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  ImageDims dims() const { return {width, height}; }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw Error(ErrorCode::InvalidArgument, "principal point outside image");
    }
  }
};

inline PixelPoint project(const Vec3& point, const CameraIntrinsics& k) {
  if (!(point.z() > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "point is not in front of the camera");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

inline Vec3 backproject(const PixelPoint& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "depth must be positive");
  return {(pixel.u - k.cx) * depth / k.fx, (pixel.v - k.cy) * depth / k.fy, depth};
}

/// Parametric ray o + t·d with unit direction.
class Ray {
 public:
  Ray() = default;

  /// Normalizes `direction`; throws DegenerateInput on a zero vector.
  Ray(const Vec3& origin, const Vec3& direction) : origin_(origin) {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n) || !is_finite(origin)) {
      throw Error(ErrorCode::DegenerateInput, "ray needs a finite origin and nonzero direction");
    }
    direction_ = direction / n;
  }

  const Vec3& origin() const { return origin_; }
  const Vec3& direction() const { return direction_; }
  Vec3 at(double t) const { return origin_ + t * direction_; }

  /// Ray parameter of the orthogonal projection of `p` onto the line.
  double parameter_of(const Vec3& p) const { return (p - origin_).dot(direction_); }

  /// Distance from `p` to the infinite line carrying the ray.
  double line_distance(const Vec3& p) const { return (p - origin_).cross(direction_).norm(); }

  Ray flipped() const { return Ray(origin_, -direction_); }

 private:
  Vec3 origin_ = Vec3::Zero();
  Vec3 direction_ = Vec3::UnitZ();
};

struct LineFitOptions {
  double inlier_threshold = 0.01;  // meters
  int iterations = 100;
  std::uint64_t seed = 0;
};

struct LineFit {
  Ray ray;                  // origin = inlier centroid
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  double residual = 0.0;    // sum of inlier distances to the refined line
};

namespace detail {

inline Vec3 centroid_of(std::span<const Vec3> points, const std::vector<bool>& mask) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask[i]) {
      sum += points[i];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

/// Principal axis of the masked points about their centroid.
inline Vec3 principal_axis(std::span<const Vec3> points, const std::vector<bool>& mask, const Vec3& centroid) {
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!mask[i]) continue;
    const Vec3 d = points[i] - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
  return solver.eigenvectors().col(2).normalized();  // eigenvalues ascending
}

}  // namespace detail

/// RANSAC line fit over 3D points.
///
/// Candidate lines come from point pairs. With at most five points, or when
/// `iterations` covers every pair, all pairs are enumerated in lexicographic
/// order; otherwise `iterations` pairs are drawn from a generator seeded with
/// `options.seed`. The consensus model maximizes the inlier count (distance
/// strictly below the threshold), breaking ties by the lower sum of inlier
/// distances and then by enumeration order. The returned line is the
/// principal axis through the inlier centroid; its direction points from
/// the centroid toward the centroid of the later half of the inliers (in
/// input order).
inline LineFit fit_line_ransac(std::span<const Vec3> points, const LineFitOptions& options = {}) {
  if (!(options.inlier_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "inlier threshold must be positive");
  }
  const std::size_t n = points.size();
  for (const auto& p : points) {
    if (!is_finite(p)) throw Error(ErrorCode::DegenerateInput, "non-finite point");
  }
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "line fit needs at least two points");

  constexpr double kDistinct = 1e-12;

  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();

  auto evaluate = [&](std::size_t i, std::size_t j) {
    const Vec3 dir = points[j] - points[i];
    if (dir.norm() <= kDistinct) return;
    const Ray line(points[i], dir);
    std::vector<bool> mask(n, false);
    std::size_t count = 0;
    double residual = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double dist = line.line_distance(points[k]);
      if (dist < options.inlier_threshold) {
        mask[k] = true;
        ++count;
        residual += dist;
      }
    }
    if (count > best_count || (count == best_count && residual < best_residual)) {
      best_count = count;
      best_residual = residual;
      best_mask = std::move(mask);
    }
  };

  const std::size_t pair_count = n * (n - 1) / 2;
  if (n <= 5 || pair_count <= static_cast<std::size_t>(std::max(options.iterations, 0))) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) evaluate(i, j);
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int it = 0; it < options.iterations; ++it) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) j = pick(rng);
      evaluate(std::min(i, j), std::max(i, j));
    }
  }

  if (best_count < 2) throw Error(ErrorCode::DegenerateInput, "fewer than two distinct points");

  const Vec3 centroid = detail::centroid_of(points, best_mask);
  Vec3 axis = detail::principal_axis(points, best_mask, centroid);

  // Orient toward the later inliers.
  std::vector<bool> far_mask(n, false);
  std::size_t seen = 0;
  const std::size_t far_start = best_count / 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (!best_mask[i]) continue;
    if (seen >= far_start) far_mask[i] = true;
    ++seen;
  }
  const Vec3 far_centroid = detail::centroid_of(points, far_mask);
  if (axis.dot(far_centroid - centroid) < 0.0) axis = -axis;

  LineFit fit;
  fit.ray = Ray(centroid, axis);
  fit.inliers = std::move(best_mask);
  fit.inlier_count = best_count;
  for (std::size_t i = 0; i < n; ++i) {
    if (fit.inliers[i]) fit.residual += fit.ray.line_distance(points[i]);
  }
  return fit;
}

/// Angle in radians between two directions.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace gatgrasp
