#pragma once

// Text record formats used by the command-line tool:
//
//   keypoints  {"chirality": "L"|"R", "joints": [[x,y,z] × 21], "frame_id": optional}
//   embedding  {"embedding": [e0, e1, ...]}
//   scene      {"intrinsics": {"fx","fy","cx","cy","width","height"}, "depth": "<GGT1 rank-2 file>"}
//
// Relative paths inside a record resolve against the record's directory.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/gesture.hpp"
#include "gatgrasp/memory.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/tensor_io.hpp"

namespace gatgrasp::io {

using nlohmann::json;

inline json read_json(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path, ErrorCode::IoError);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file_bytes(path, j.dump(2) + "\n"); }

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& ref) {
  const std::filesystem::path p(ref);
  return p.is_absolute() ? p : base_dir / p;
}

struct KeypointRecord {
  HandKeypoints hand;
  std::optional<std::string> frame_id;
};

inline KeypointRecord keypoints_from_json(const json& j) {
  KeypointRecord r;
  r.hand = json_io::hand_from_json(j);
  if (j.contains("frame_id") && !j["frame_id"].is_null()) {
    r.frame_id = j["frame_id"].is_string() ? j["frame_id"].get<std::string>() : j["frame_id"].dump();
  }
  return r;
}

inline json keypoints_to_json(const HandKeypoints& hand, const std::optional<std::string>& frame_id = {}) {
  json j = json_io::hand_to_json(hand);
  if (frame_id) j["frame_id"] = *frame_id;
  return j;
}

/// Reads a recorded hand and applies the physical sanity bound.
inline HandKeypoints read_keypoints(const std::filesystem::path& path) {
  auto r = keypoints_from_json(read_json(path));
  validate_recorded_hand(r.hand);
  return r.hand;
}

inline void write_keypoints(const std::filesystem::path& path, const HandKeypoints& hand,
                            const std::optional<std::string>& frame_id = {}) {
  write_json(path, keypoints_to_json(hand, frame_id));
}

inline std::vector<double> read_embedding(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    return j.at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_embedding(const std::filesystem::path& path, const std::vector<double>& e) {
  write_json(path, json{{"embedding", e}});
}

inline json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  try {
    CameraIntrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(), j.at("width").get<int>(),  j.at("height").get<int>()};
    k.validate();
    return k;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("intrinsics: ") + e.what());
  }
}

inline DepthScene read_scene(const std::filesystem::path& path) {
  const json j = read_json(path);
  std::string depth_ref;
  try {
    depth_ref = j.at("depth").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  const CameraIntrinsics k = intrinsics_from_json(j.at("intrinsics"));
  return depth_scene_from_tensor(read_tensor(resolve(path.parent_path(), depth_ref)), k);
}

/// Writes `<stem>.json` plus the depth tensor next to it.
inline void write_scene(const std::filesystem::path& path, const DepthScene& scene,
                        const std::string& depth_name = "depth.ggt") {
  write_tensor(path.parent_path() / depth_name, to_tensor(scene));
  write_json(path, json{{"intrinsics", intrinsics_to_json(scene.intrinsics())}, {"depth", depth_name}});
}

}  // namespace gatgrasp::io
