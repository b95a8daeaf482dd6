#pragma once

// 21-joint hand schema, wrist-anchored canonical frame and gesture cosine
// similarity.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"

namespace gatgrasp {

enum class Chirality { Left, Right };

inline std::string_view to_string(Chirality c) { return c == Chirality::Left ? "L" : "R"; }

inline Chirality parse_chirality(std::string_view s) {
  if (s == "L" || s == "left" || s == "Left") return Chirality::Left;
  if (s == "R" || s == "right" || s == "Right") return Chirality::Right;
  throw Error(ErrorCode::ParseError, "unknown chirality tag '" + std::string(s) + "'");
}

inline constexpr std::size_t kNumJoints = 21;

/// Joint indices in the standard 21-point hand skeleton.
namespace landmark {
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kThumbCmc = 1;
inline constexpr std::size_t kThumbMcp = 2;
inline constexpr std::size_t kThumbIp = 3;
inline constexpr std::size_t kThumbTip = 4;
inline constexpr std::size_t kIndexMcp = 5;
inline constexpr std::size_t kIndexPip = 6;
inline constexpr std::size_t kIndexDip = 7;
inline constexpr std::size_t kIndexTip = 8;
inline constexpr std::size_t kMiddleMcp = 9;
inline constexpr std::size_t kMiddlePip = 10;
inline constexpr std::size_t kMiddleDip = 11;
inline constexpr std::size_t kMiddleTip = 12;
inline constexpr std::size_t kRingMcp = 13;
inline constexpr std::size_t kRingPip = 14;
inline constexpr std::size_t kRingDip = 15;
inline constexpr std::size_t kRingTip = 16;
inline constexpr std::size_t kPinkyMcp = 17;
inline constexpr std::size_t kPinkyPip = 18;
inline constexpr std::size_t kPinkyDip = 19;
inline constexpr std::size_t kPinkyTip = 20;

inline constexpr std::array<std::size_t, 4> kIndexFinger = {kIndexMcp, kIndexPip, kIndexDip, kIndexTip};
}  // namespace landmark

using JointArray = std::array<Vec3, kNumJoints>;

/// Eigen vectors are not zeroed by value-initialization, so defaults go
/// through this.
inline JointArray zero_joints() {
  JointArray j;
  j.fill(Vec3::Zero());
  return j;
}

/// Raw 21-joint observation in camera coordinates (meters).
struct HandKeypoints {
  JointArray joints = zero_joints();
  Chirality chirality = Chirality::Right;

  const Vec3& operator[](std::size_t i) const { return joints[i]; }
  Vec3& operator[](std::size_t i) { return joints[i]; }

  bool all_finite() const {
    for (const auto& j : joints)
      if (!is_finite(j)) return false;
    return true;
  }

  double max_pairwise_distance() const {
    double best = 0.0;
    for (std::size_t i = 0; i < kNumJoints; ++i)
      for (std::size_t j = i + 1; j < kNumJoints; ++j) best = std::max(best, (joints[i] - joints[j]).norm());
    return best;
  }
};

/// Physical plausibility bound applied to hands read from files.
inline constexpr double kMaxHandExtent = 0.5;  // meters

/// Checks the file-level sanity constraints of a recorded hand: finite
/// joints and a plausible physical extent.
inline void validate_recorded_hand(const HandKeypoints& hand) {
  if (!hand.all_finite()) throw Error(ErrorCode::InvalidArgument, "hand has non-finite joints");
  const double extent = hand.max_pairwise_distance();
  if (!(extent < kMaxHandExtent)) {
    throw Error(ErrorCode::InvalidArgument,
                "hand extent " + std::to_string(extent) + " m exceeds sanity bound");
  }
}

/// Hand expressed in the wrist-anchored, index-aligned, scale-normalized
/// frame. Values are dimensionless.
struct CanonicalGesture {
  JointArray joints = zero_joints();
  Chirality chirality = Chirality::Right;

  const Vec3& operator[](std::size_t i) const { return joints[i]; }

  /// Row-major 63-vector (x, y, z per joint).
  Eigen::Matrix<double, 63, 1> flattened() const {
    Eigen::Matrix<double, 63, 1> out;
    for (std::size_t j = 0; j < kNumJoints; ++j) out.segment<3>(static_cast<Eigen::Index>(3 * j)) = joints[j];
    return out;
  }

  /// Frame invariants: wrist at the origin, index MCP on +x at unit
  /// distance, pinky MCP in the xy-plane on the +y side.
  bool satisfies_frame_invariants(double tol = 1e-6) const {
    const Vec3& wrist = joints[landmark::kWrist];
    const Vec3& index = joints[landmark::kIndexMcp];
    const Vec3& pinky = joints[landmark::kPinkyMcp];
    return wrist == Vec3::Zero() && (index - Vec3::UnitX()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(pinky.z()) <= tol && pinky.y() > 0.0;
  }
};

/// Regularizer added to both axis norms when building the alignment frame.
inline constexpr double kAlignEpsilon = 1e-8;

/// Moves a hand into the canonical frame.
///
/// The wrist is translated to the origin, then the hand is rotated into the
/// frame spanned by x̄ = l_x/(|l_x|+ε) with l_x = index MCP − wrist, and
/// z̄ = v_z/(|v_z|+ε) with v_z = l_x × (pinky MCP − wrist), ȳ = z̄ × x̄.
/// Finally all joints are divided by |l_x|. Chirality is carried through
/// unchanged; no reflection is ever applied.
inline CanonicalGesture canonicalize(const HandKeypoints& hand) {
  if (!hand.all_finite()) throw Error(ErrorCode::DegenerateHand, "non-finite joints");
  const Vec3 wrist = hand[landmark::kWrist];
  const Vec3 lx = hand[landmark::kIndexMcp] - wrist;
  const Vec3 lp = hand[landmark::kPinkyMcp] - wrist;
  const double lx_norm = lx.norm();
  if (lx_norm < 1e-3) throw Error(ErrorCode::DegenerateHand, "wrist and index MCP closer than 1 mm");
  const Vec3 vz = lx.cross(lp);
  const double vz_norm = vz.norm();
  if (vz_norm <= 1e-8) throw Error(ErrorCode::DegenerateHand, "wrist, index MCP and pinky MCP are collinear");

  const Vec3 z_axis = vz / (vz_norm + kAlignEpsilon);
  const Vec3 x_axis = lx / (lx_norm + kAlignEpsilon);
  const Vec3 y_axis = z_axis.cross(x_axis);

  Eigen::Matrix3d align;
  align.row(0) = x_axis.transpose();
  align.row(1) = y_axis.transpose();
  align.row(2) = z_axis.transpose();

  CanonicalGesture out;
  out.chirality = hand.chirality;
  for (std::size_t j = 0; j < kNumJoints; ++j) out.joints[j] = align * (hand[j] - wrist) / lx_norm;
  out.joints[landmark::kWrist] = Vec3::Zero();
  return out;
}

/// Reinterprets a canonical gesture as keypoints (for idempotence checks).
inline HandKeypoints as_keypoints(const CanonicalGesture& g) { return {g.joints, g.chirality}; }

/// Cosine similarity of the flattened 63-vectors. Bit-equal inputs give
/// exactly 1.
inline double gesture_similarity(const CanonicalGesture& a, const CanonicalGesture& b) {
  if (a.joints == b.joints) {
    if (a.flattened().norm() < 1e-12) throw Error(ErrorCode::ZeroVector, "gesture vector is zero");
    return 1.0;
  }
  const auto fa = a.flattened();
  const auto fb = b.flattened();
  const double na = fa.norm();
  const double nb = fb.norm();
  if (na < 1e-12 || nb < 1e-12) throw Error(ErrorCode::ZeroVector, "gesture vector is zero");
  return std::clamp(fa.dot(fb) / (na * nb), -1.0, 1.0);
}

}  // namespace gatgrasp
