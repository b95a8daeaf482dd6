#pragma once

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/gesture.hpp"

namespace gatgrasp {

/// Gripper orientation from the thumb MCP, index MCP and index tip.
///
/// Columns: x̄ runs thumb MCP → index MCP (finger closing direction), z̄ is
/// the normal (k_inp − k_thu) × (k_inf − k_thu) of the landmark plane, and
/// ȳ = z̄ × x̄. The normal sign follows the cross-product order for both
/// chiralities; callers that want a palm-facing normal on left hands can
/// negate ȳ and z̄ together.
inline Rotation3 hand_to_gripper_rotation(const HandKeypoints& hand) {
  const Vec3& thumb = hand[landmark::kThumbMcp];
  const Vec3& index_mcp = hand[landmark::kIndexMcp];
  const Vec3& index_tip = hand[landmark::kIndexTip];
  const Vec3 a = index_mcp - thumb;
  const Vec3 b = index_tip - thumb;
  const Vec3 normal = a.cross(b);
  if (!(normal.norm() > 1e-10) || !(a.norm() > 0.0)) {
    throw Error(ErrorCode::DegenerateTriangle, "thumb MCP, index MCP and index tip are collinear");
  }
  const Vec3 x = a.normalized();
  const Vec3 z = normal.normalized();
  const Vec3 y = z.cross(x);
  return Rotation3::from_columns(x, y, z);
}

}  // namespace gatgrasp
