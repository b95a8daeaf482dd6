#pragma once

// Whole-pipeline synthetic cases with planted ground truth: an analytic
// scene with the pointing hand rendered into the depth map, a memory bank
// whose intended entry carries a planted feature correspondence, query
// embedding/features, grasp candidates and a ground-truth mask.

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>

#include "gatgrasp/dtm.hpp"
#include "gatgrasp/io.hpp"
#include "gatgrasp/memory.hpp"
#include "gatgrasp/pipeline.hpp"
#include "gatgrasp/synth.hpp"

namespace gatgrasp::synth {

struct CaseOptions {
  int bank_size = 8;
  int embedding_dim = 64;
  int feature_dim = 32;
  int grid_h = 30;  // 16-px cells on a 640×480 image
  int grid_w = 40;
  int candidate_count = 20;
  double hand_scale = 0.09;     // meters per canonical unit
  double joint_radius = 0.006;  // rendered keypoint spheres, meters
  double depth_error = 0.03;    // relative depth error of raw pointing keypoints
};

struct CaseTruth {
  Vec3 target3d;
  PixelPoint target2d;
  GridCell target_cell;
  std::string intended_entry;
};

struct SynthCase {
  PipelineInputs inputs;
  CaseTruth truth;
  SceneSpec scene_spec;
  /// Candidate file exactly as generated. Re-serializing parsed candidates
  /// would round the rotations through a second quaternion conversion.
  std::string candidates_jsonl;
};

inline CameraIntrinsics default_intrinsics() { return {600.0, 600.0, 319.5, 239.5, 640, 480}; }

/// Rotation whose first column is `x`, rolled by `roll` about it.
inline Rotation3 frame_with_x_axis(const Vec3& x, double roll) {
  const Vec3 xn = x.normalized();
  const Vec3 helper = std::abs(xn.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  Vec3 y = helper.cross(xn).normalized();
  y = Eigen::AngleAxisd(roll, xn) * y;
  return Rotation3::from_columns(xn, y, xn.cross(y));
}

inline SynthCase generate_case(std::uint64_t seed, const CaseOptions& opt = {}) {
  Rng rng(seed);
  SynthCase out;
  const CameraIntrinsics k = default_intrinsics();

  // Scene: tilted support plane and a sphere resting in front of it.
  SceneSpec spec;
  spec.intrinsics = k;
  spec.seed = seed;
  const double table_z = uniform(rng, 0.9, 1.1);
  const Vec3 normal = Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), -1.0).normalized();
  spec.primitives.push_back(Plane{Vec3(0.0, 0.0, table_z), normal});
  const double radius = uniform(rng, 0.04, 0.08);
  spec.primitives.push_back(
      Sphere{Vec3(uniform(rng, -0.15, 0.15), uniform(rng, -0.1, 0.1), table_z - radius - 0.02), radius});
  const std::vector<Primitive> objects = spec.primitives;

  // Pointing hand: wrist between camera and scene, index aimed at a pixel.
  // Draws are repeated until the hand is fully in frame and the true target
  // is visible to the camera.
  HandKeypoints pointing;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw Error(ErrorCode::InvalidArgument, "could not place a visible pointing target");
    const PixelPoint aim_px{uniform(rng, 200.0, 440.0), uniform(rng, 150.0, 330.0)};
    const Vec3 aim_dir((aim_px.u - k.cx) / k.fx, (aim_px.v - k.cy) / k.fy, 1.0);
    const Vec3 aim = aim_dir * *first_hit(objects, Vec3::Zero(), aim_dir);
    const double rho = uniform(rng, 0.08, 0.15);
    const double phi = uniform(rng, 0.0, 2.0 * M_PI);
    const Vec3 wrist = aim + Vec3(rho * std::cos(phi), rho * std::sin(phi), -uniform(rng, 0.3, 0.4));
    const Vec3 d = (aim - wrist).normalized();
    Similarity pose;
    pose.R = frame_with_x_axis(d, uniform(rng, 0.0, 2.0 * M_PI));
    pose.scale = opt.hand_scale;
    pose.t = wrist;
    HandOptions pointing_opts;
    pointing_opts.base = &pointing_template();
    pointing = synth_hand(seed ^ 0x5A5A5A5AULL, 0.0, pose, pointing_opts);

    // The true target is the first object surface past the fingertip.
    const double tip_t = (pointing[landmark::kIndexTip] - wrist).dot(d);
    const Vec3 start = wrist + d * (tip_t + 0.05);
    const auto hit_t = first_hit(objects, start, d);
    if (!hit_t) continue;
    const Vec3 target = start + d * *hit_t;

    std::vector<Primitive> with_hand = objects;
    for (const auto& j : pointing.joints) {
      with_hand.push_back(Sphere{j + opt.joint_radius * j.normalized(), opt.joint_radius});
    }
    const auto seen = first_hit(with_hand, Vec3::Zero(), target / target.z());
    if (!seen || std::abs(*seen - target.z()) > 1e-6) continue;
    // Every index joint must be the first surface on its own camera ray;
    // an occluded joint would be lifted onto the occluder's depth.
    bool index_visible = true;
    for (std::size_t j : landmark::kIndexFinger) {
      const Vec3& p = pointing[j];
      const auto front = first_hit(with_hand, Vec3::Zero(), p / p.z());
      index_visible = index_visible && front && std::abs(*front - p.z()) <= 1e-6;
    }
    if (!index_visible) continue;
    bool in_frame = true;
    for (const auto& j : pointing.joints) {
      const PixelPoint px = project(j, k);
      in_frame = in_frame && px.u > 10.0 && px.u < k.width - 11.0 && px.v > 10.0 && px.v < k.height - 11.0;
    }
    if (!in_frame) continue;

    out.truth.target3d = target;
    out.truth.target2d = project(target, k);
    spec.primitives = std::move(with_hand);
    break;
  }
  out.scene_spec = spec;
  out.inputs.scene = quantize_to_float(render_depth(spec));

  // Raw keypoints carry a per-joint depth error along the viewing ray.
  out.inputs.pointing_hand = pointing;
  for (auto& j : out.inputs.pointing_hand.joints) j *= 1.0 + uniform(rng, -opt.depth_error, opt.depth_error);

  // Ground-truth cell on the query feature grid.
  const ImageDims img = k.dims();
  const int cell_w = img.width / opt.grid_w;
  const int cell_h = img.height / opt.grid_h;
  out.truth.target_cell = {static_cast<int>(std::floor((out.truth.target2d.v + 0.5) / cell_h)),
                           static_cast<int>(std::floor((out.truth.target2d.u + 0.5) / cell_w))};
  Mask mask(img);
  for (int r = 0; r < cell_h; ++r)
    for (int c = 0; c < cell_w; ++c) mask.set(out.truth.target_cell.row * cell_h + r, out.truth.target_cell.col * cell_w + c);
  out.inputs.mask = mask;

  // Memory bank. Entry `intended` is the one the grasp gesture should hit.
  const int intended = static_cast<int>(std::uniform_int_distribution<int>(0, opt.bank_size - 1)(rng));
  const GridCell src_cell{std::uniform_int_distribution<int>(0, opt.grid_h - 1)(rng),
                          std::uniform_int_distribution<int>(0, opt.grid_w - 1)(rng)};
  FeaturePair pair = synth_featmap_pair(opt.grid_h, opt.grid_w, opt.feature_dim, seed + 17,
                                        {{src_cell, out.truth.target_cell}}, img, img);
  MemoryBank bank;
  std::vector<double> intended_embedding;
  HandKeypoints intended_canonical_hand;
  for (int i = 0; i < opt.bank_size; ++i) {
    MemoryRecord rec;
    rec.id = "entry-" + std::to_string(seed) + "-" + std::to_string(i);
    HandOptions ho;
    ho.chirality = (i == intended || i % 4 != 3) ? Chirality::Right : Chirality::Left;
    const HandKeypoints base = synth_hand(seed * 1000 + static_cast<std::uint64_t>(i), 0.08, {}, ho);
    Similarity place;
    place.R = random_rotation(rng);
    place.scale = uniform(rng, 0.085, 0.095);
    place.t = Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, 0.5, 0.8));
    rec.gesture = base;
    for (auto& j : rec.gesture.joints) j = place.apply(j);
    const auto e = detail::random_unit(rng, opt.embedding_dim);
    rec.embedding = e;
    rec.image_dims = img;
    rec.image_ref = "images/" + rec.id + ".png";
    rec.category = i % 2 ? "mug" : "bottle";
    if (i == intended) {
      rec.features = std::make_shared<const FeatureMap>(pair.src);
      rec.contact = pair.truth.front().src_pixel;
      intended_embedding = e;
      intended_canonical_hand = base;
      out.truth.intended_entry = rec.id;
    } else {
      rec.features = std::make_shared<const FeatureMap>(
          random_feature_map(opt.grid_h, opt.grid_w, opt.feature_dim, seed * 1000 + 500 + static_cast<std::uint64_t>(i), img));
      rec.contact = {uniform(rng, 0.0, img.width - 1.0), uniform(rng, 0.0, img.height - 1.0)};
    }
    bank = ingest_entry(std::move(bank), std::move(rec));
  }
  out.inputs.bank = std::make_shared<const MemoryBank>(std::move(bank));
  out.inputs.query_features = std::make_shared<const FeatureMap>(pair.tgt);

  // Query grasp gesture: intended hand with slight jitter, re-posed.
  HandKeypoints grasp = intended_canonical_hand;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (j == landmark::kWrist || j == landmark::kIndexMcp || j == landmark::kPinkyMcp) continue;
    grasp.joints[j] += uniform_vec(rng, -0.01, 0.01);
  }
  Similarity grasp_pose;
  grasp_pose.R = random_rotation(rng);
  grasp_pose.scale = uniform(rng, 0.085, 0.095);
  grasp_pose.t = Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, 0.5, 0.8));
  for (auto& j : grasp.joints) j = grasp_pose.apply(j);
  out.inputs.grasp_hand = grasp;

  // Query embedding close to the intended entry's.
  std::vector<double> qe = intended_embedding;
  const auto noise = detail::random_unit(rng, opt.embedding_dim);
  for (std::size_t i = 0; i < qe.size(); ++i) qe[i] += 0.3 * noise[i];
  out.inputs.query_embedding = qe;

  // Candidates around the target; round-tripped through the text format so
  // in-memory and on-disk cases are identical.
  std::string text;
  for (const auto& c : random_candidates(rng, static_cast<std::size_t>(opt.candidate_count), out.truth.target3d, 0.05)) {
    text += candidate_to_json(c).dump() + "\n";
  }
  out.inputs.candidates = parse_candidates(text);
  out.candidates_jsonl = std::move(text);
  return out;
}

/// Writes a case directory consumable by `eval` / `pipeline --config`.
inline void write_case(const std::filesystem::path& dir, const SynthCase& c, const PipelineConfig& config = {}) {
  std::filesystem::create_directories(dir);
  save_bank(*c.inputs.bank, dir / "bank");
  io::write_keypoints(dir / "pointing.json", c.inputs.pointing_hand);
  io::write_keypoints(dir / "grasp.json", c.inputs.grasp_hand);
  io::write_scene(dir / "scene.json", c.inputs.scene);
  io::write_embedding(dir / "embedding.json", c.inputs.query_embedding);
  write_tensor(dir / "query.ggt", to_tensor(*c.inputs.query_features));
  if (c.inputs.candidates) {
    if (!c.candidates_jsonl.empty()) {
      write_file_bytes(dir / "candidates.jsonl", c.candidates_jsonl);
    } else {
      save_candidates(dir / "candidates.jsonl", *c.inputs.candidates);
    }
  }
  if (c.inputs.mask) write_mask(dir / "mask.pgm", *c.inputs.mask);

  nlohmann::json j = report_json::params(config);
  nlohmann::json cfg;
  cfg["bank"] = "bank";
  cfg["pointing_keypoints"] = "pointing.json";
  cfg["grasp_keypoints"] = "grasp.json";
  cfg["scene"] = "scene.json";
  cfg["query_embedding"] = "embedding.json";
  cfg["query_features"] = "query.ggt";
  cfg["query_feature_dims"] = {c.inputs.query_features->image_dims.width, c.inputs.query_features->image_dims.height};
  cfg["candidates"] = c.inputs.candidates && !config.ablations.no_grasp_model ? nlohmann::json("candidates.jsonl")
                                                                             : nlohmann::json(nullptr);
  cfg["mask"] = c.inputs.mask ? nlohmann::json("mask.pgm") : nlohmann::json(nullptr);
  cfg["ablations"] = j["ablations"];
  j.erase("ablations");
  cfg["params"] = j;
  io::write_json(dir / "case.json", cfg);

  io::write_json(dir / "truth.json",
                 {{"target3d", report_json::vec(c.truth.target3d)},
                  {"target2d", report_json::pixel(c.truth.target2d)},
                  {"target_cell", {c.truth.target_cell.row, c.truth.target_cell.col}},
                  {"intended_entry", c.truth.intended_entry}});
}

}  // namespace gatgrasp::synth
