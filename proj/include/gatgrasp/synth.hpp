#pragma once

// Deterministic synthetic fixtures (hands, analytic depth scenes, planted
// feature correspondences) and brute-force oracles used by the test and
// acceptance suites.
//
// The hand templates below are hand-made fixture constants with roughly
// human proportions. They are not measured data.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/gesture.hpp"
#include "gatgrasp/grasp.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/transfer.hpp"

namespace gatgrasp::synth {

using Rng = std::mt19937_64;

/// Relaxed power-grasp pose in canonical units (wrist at the origin, index
/// MCP at (1,0,0), pinky MCP in the xy-plane with y > 0).
inline const JointArray& grasp_template() {
  static const JointArray joints = {
      Vec3(0.00, 0.00, 0.00),                                                                        // wrist
      Vec3(0.25, -0.30, 0.10), Vec3(0.50, -0.55, 0.20), Vec3(0.75, -0.70, 0.30), Vec3(0.95, -0.80, 0.40),  // thumb
      Vec3(1.00, 0.00, 0.00), Vec3(1.40, 0.02, 0.10), Vec3(1.62, 0.03, 0.22), Vec3(1.80, 0.04, 0.35),      // index
      Vec3(0.98, 0.25, 0.02), Vec3(1.42, 0.28, 0.14), Vec3(1.66, 0.29, 0.28), Vec3(1.84, 0.30, 0.44),      // middle
      Vec3(0.92, 0.48, 0.02), Vec3(1.30, 0.53, 0.15), Vec3(1.52, 0.55, 0.28), Vec3(1.68, 0.57, 0.42),      // ring
      Vec3(0.82, 0.68, 0.00), Vec3(1.10, 0.74, 0.12), Vec3(1.28, 0.77, 0.22), Vec3(1.42, 0.80, 0.33),      // pinky
  };
  return joints;
}

/// Pointing pose: index finger straight along +x through the wrist, other
/// fingers curled toward the palm.
inline const JointArray& pointing_template() {
  static const JointArray joints = {
      Vec3(0.00, 0.00, 0.00),
      Vec3(0.25, -0.30, 0.10), Vec3(0.50, -0.45, 0.25), Vec3(0.75, -0.40, 0.38), Vec3(0.95, -0.30, 0.42),
      Vec3(1.00, 0.00, 0.00), Vec3(1.45, 0.00, 0.00), Vec3(1.72, 0.00, 0.00), Vec3(1.95, 0.00, 0.00),
      Vec3(0.98, 0.25, 0.02), Vec3(1.30, 0.27, 0.25), Vec3(1.15, 0.28, 0.40), Vec3(0.95, 0.28, 0.35),
      Vec3(0.92, 0.48, 0.02), Vec3(1.22, 0.50, 0.25), Vec3(1.08, 0.51, 0.40), Vec3(0.90, 0.51, 0.33),
      Vec3(0.82, 0.68, 0.00), Vec3(1.08, 0.70, 0.22), Vec3(0.98, 0.71, 0.35), Vec3(0.84, 0.71, 0.30),
  };
  return joints;
}

/// x ↦ s·R·x + t with s > 0.
struct Similarity {
  Rotation3 R;
  double scale = 1.0;
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (R * x) + t; }
};

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Vec3 uniform_vec(Rng& rng, double lo, double hi) {
  const double x = uniform(rng, lo, hi);
  const double y = uniform(rng, lo, hi);
  const double z = uniform(rng, lo, hi);
  return {x, y, z};
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
inline Rotation3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double norm = 0.0;
  do {
    for (double& x : q) x = n(rng);
    norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  } while (norm < 1e-6);
  return Rotation3::from_quaternion(q[0], q[1], q[2], q[3]);
}

inline Similarity random_similarity(Rng& rng, double min_scale = 0.2, double max_scale = 5.0, double max_shift = 1.0) {
  Similarity s;
  s.R = random_rotation(rng);
  s.scale = uniform(rng, min_scale, max_scale);
  s.t = uniform_vec(rng, -max_shift, max_shift);
  return s;
}

struct HandOptions {
  const JointArray* base = nullptr;  // defaults to grasp_template()
  Chirality chirality = Chirality::Right;
};

/// Template + uniform per-joint noise in [−amplitude, amplitude]³, then the
/// optional similarity transform. The wrist, index MCP and pinky MCP are
/// never perturbed. Left hands mirror the template through its palm plane.
inline HandKeypoints synth_hand(std::uint64_t seed, double amplitude, const std::optional<Similarity>& transform = {},
                                const HandOptions& options = {}) {
  if (!(amplitude >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise amplitude must be non-negative");
  const JointArray& base = options.base ? *options.base : grasp_template();
  Rng rng(seed);
  HandKeypoints hand;
  hand.chirality = options.chirality;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    Vec3 p = base[j];
    if (options.chirality == Chirality::Left) p.z() = -p.z();
    const Vec3 noise = uniform_vec(rng, -1.0, 1.0) * amplitude;
    const bool reference = j == landmark::kWrist || j == landmark::kIndexMcp || j == landmark::kPinkyMcp;
    if (!reference) p += noise;
    hand.joints[j] = transform ? transform->apply(p) : p;
  }
  return hand;
}

// ---------------------------------------------------------------------------
// Analytic depth scenes.

struct Plane {
  Vec3 point;
  Vec3 normal;
};

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

/// Axis-aligned box; `extents` are full side lengths.
struct Box {
  Vec3 center;
  Vec3 extents;
};

using Primitive = std::variant<Plane, Sphere, Box>;

struct SceneSpec {
  std::vector<Primitive> primitives;
  CameraIntrinsics intrinsics;
  std::uint64_t seed = 0;
};

/// Smallest positive parameter t at which o + t·dir meets the primitive.
inline std::optional<double> ray_hit(const Primitive& prim, const Vec3& o, const Vec3& dir) {
  constexpr double kMin = 1e-12;
  if (const auto* pl = std::get_if<Plane>(&prim)) {
    const double denom = pl->normal.dot(dir);
    if (std::abs(denom) < 1e-15) return std::nullopt;
    const double t = pl->normal.dot(pl->point - o) / denom;
    return t > kMin ? std::optional<double>(t) : std::nullopt;
  }
  if (const auto* sp = std::get_if<Sphere>(&prim)) {
    const Vec3 oc = o - sp->center;
    const double a = dir.dot(dir);
    const double b = 2.0 * dir.dot(oc);
    const double c = oc.dot(oc) - sp->radius * sp->radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    const double t0 = (-b - root) / (2.0 * a);
    const double t1 = (-b + root) / (2.0 * a);
    if (t0 > kMin) return t0;
    if (t1 > kMin) return t1;
    return std::nullopt;
  }
  const auto& box = std::get<Box>(prim);
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = box.center[axis] - 0.5 * box.extents[axis];
    const double hi = box.center[axis] + 0.5 * box.extents[axis];
    if (std::abs(dir[axis]) < 1e-15) {
      if (o[axis] < lo || o[axis] > hi) return std::nullopt;
      continue;
    }
    double a = (lo - o[axis]) / dir[axis];
    double b = (hi - o[axis]) / dir[axis];
    if (a > b) std::swap(a, b);
    t_near = std::max(t_near, a);
    t_far = std::min(t_far, b);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > kMin) return t_near;
  if (t_far > kMin) return t_far;
  return std::nullopt;
}

/// Nearest hit over all primitives.
inline std::optional<double> first_hit(const std::vector<Primitive>& prims, const Vec3& o, const Vec3& dir) {
  std::optional<double> best;
  for (const auto& p : prims) {
    if (auto t = ray_hit(p, o, dir); t && (!best || *t < *best)) best = t;
  }
  return best;
}

/// Casts one camera ray per pixel center; the stored depth is the z of the
/// nearest hit, or 0 (invalid) on a miss.
inline DepthScene render_depth(const SceneSpec& spec) {
  const auto& k = spec.intrinsics;
  k.validate();
  std::vector<double> depth(static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height), 0.0);
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      // z-component 1, so the hit parameter is the depth itself.
      const Vec3 dir((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
      if (auto t = first_hit(spec.primitives, Vec3::Zero(), dir); t && *t < DepthScene::kMaxDepth) {
        depth[static_cast<std::size_t>(row) * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(col)] = *t;
      }
    }
  }
  return DepthScene(k, std::move(depth));
}

// ---------------------------------------------------------------------------
// Planted feature correspondences.

struct PlantedPair {
  GridCell src;
  GridCell tgt;
};

struct PlantedTruth {
  GridCell src_cell;
  GridCell tgt_cell;
  PixelPoint src_pixel;  // center of the source cell
  PixelPoint tgt_pixel;  // center of the target cell
};

struct FeaturePair {
  FeatureMap src;
  FeatureMap tgt;
  std::vector<PlantedTruth> truth;
};

inline constexpr double kPlantedMargin = 0.2;

namespace detail {

inline std::vector<double> random_unit(Rng& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(d));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = n(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-6);
  for (auto& x : v) x /= norm;
  return v;
}

inline double unit_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Two h×w×d maps of random unit descriptors. Each planted pair shares one
/// descriptor that is unique in both maps: its cosine to every other cell
/// and to every other planted descriptor is at most 1 − margin. Violating
/// draws are rejected and redrawn up to `max_retries` times.
inline FeaturePair synth_featmap_pair(int h, int w, int d, std::uint64_t seed, const std::vector<PlantedPair>& planted,
                                      ImageDims src_dims, ImageDims tgt_dims, double margin = kPlantedMargin,
                                      int max_retries = 1000) {
  if (h <= 0 || w <= 0) throw Error(ErrorCode::InvalidArgument, "grid dims must be positive");
  if (d < 8) throw Error(ErrorCode::InvalidArgument, "planted correspondences need d >= 8");
  auto in_range = [&](const GridCell& c) { return c.row >= 0 && c.row < h && c.col >= 0 && c.col < w; };
  for (std::size_t i = 0; i < planted.size(); ++i) {
    if (!in_range(planted[i].src) || !in_range(planted[i].tgt)) {
      throw Error(ErrorCode::InvalidArgument, "planted cell out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (planted[i].src == planted[j].src || planted[i].tgt == planted[j].tgt) {
        throw Error(ErrorCode::InvalidArgument, "planted cells must be distinct");
      }
    }
  }

  Rng rng(seed);
  const double max_cos = 1.0 - margin;
  std::vector<std::vector<double>> anchors;
  for (std::size_t i = 0; i < planted.size(); ++i) {
    int tries = 0;
    for (;;) {
      auto v = detail::random_unit(rng, d);
      bool ok = true;
      for (const auto& a : anchors) ok = ok && detail::unit_cos(v, a) <= max_cos;
      if (ok) {
        anchors.push_back(std::move(v));
        break;
      }
      if (++tries > max_retries) throw Error(ErrorCode::MarginUnsatisfiable, "cannot separate planted descriptors");
    }
  }

  auto fill = [&](FeatureMap& map, ImageDims dims, bool is_src) {
    map = FeatureMap{h, w, d, std::vector<float>(static_cast<std::size_t>(h) * w * d), dims};
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        std::optional<std::size_t> anchor;
        for (std::size_t i = 0; i < planted.size(); ++i) {
          if ((is_src ? planted[i].src : planted[i].tgt) == GridCell{r, c}) anchor = i;
        }
        std::vector<double> v;
        if (anchor) {
          v = anchors[*anchor];
        } else {
          int tries = 0;
          for (;;) {
            v = detail::random_unit(rng, d);
            bool ok = true;
            for (const auto& a : anchors) ok = ok && detail::unit_cos(v, a) <= max_cos;
            if (ok) break;
            if (++tries > max_retries) throw Error(ErrorCode::MarginUnsatisfiable, "cannot keep descriptor margin");
          }
        }
        float* f = map.cell(r, c);
        for (int k = 0; k < d; ++k) f[k] = static_cast<float>(v[static_cast<std::size_t>(k)]);
      }
    }
  };

  FeaturePair out;
  fill(out.src, src_dims, true);
  fill(out.tgt, tgt_dims, false);
  for (const auto& p : planted) {
    out.truth.push_back({p.src, p.tgt, out.src.cell_center(p.src.row, p.src.col), out.tgt.cell_center(p.tgt.row, p.tgt.col)});
  }
  return out;
}

inline FeaturePair synth_featmap_pair(int h, int w, int d, std::uint64_t seed, const std::vector<PlantedPair>& planted) {
  const ImageDims dims{w * 8, h * 8};
  return synth_featmap_pair(h, w, d, seed, planted, dims, dims);
}

/// Random h×w×d map of unit descriptors with the given image dims.
inline FeatureMap random_feature_map(int h, int w, int d, std::uint64_t seed, ImageDims dims) {
  Rng rng(seed);
  FeatureMap map{h, w, d, std::vector<float>(static_cast<std::size_t>(h) * w * d), dims};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto v = detail::random_unit(rng, d);
      float* f = map.cell(r, c);
      for (int k = 0; k < d; ++k) f[k] = static_cast<float>(v[static_cast<std::size_t>(k)]);
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Grasp-selection oracle. Written with plain loops and its own projection
// so it shares no scoring code with select_grasp.

inline std::size_t oracle_select(const std::vector<GraspCandidate>& candidates, const Rotation3& r_h,
                                 const PixelPoint& c_t, const CameraIntrinsics& k, const SelectionParams& params) {
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    double frob_sq = 0.0;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) {
        double m = 0.0;  // (R_hᵀ R_i)(r, col)
        for (int s = 0; s < 3; ++s) m += r_h(s, r) * c.pose.R(s, col);
        const double diff = (r == col ? 1.0 : 0.0) - m;
        frob_sq += diff * diff;
      }
    }
    double weight = 1.0;
    if (params.attention == AttentionMode::Weight) {
      const double u = k.fx * c.pose.t[0] / c.pose.t[2] + k.cx;
      const double v = k.fy * c.pose.t[1] / c.pose.t[2] + k.cy;
      const double dist_sq = (u - c_t.u) * (u - c_t.u) + (v - c_t.v) * (v - c_t.v);
      weight = std::exp(-dist_sq / (2.0 * params.sigma * params.sigma));
    }
    const double value = c.score * weight - params.lambda * std::sqrt(frob_sq);
    if (i == 0 || value > best_value) {
      best = i;
      best_value = value;
    }
  }
  return best;
}

/// Random candidate set around a point in front of the camera.
inline std::vector<GraspCandidate> random_candidates(Rng& rng, std::size_t n, const Vec3& around, double spread) {
  std::vector<GraspCandidate> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GraspCandidate c;
    c.pose.t = around + uniform_vec(rng, -spread, spread);
    c.pose.R = random_rotation(rng);
    c.score = uniform(rng, 0.0, 1.0);
    out.push_back(c);
  }
  return out;
}

}  // namespace gatgrasp::synth
