#pragma once

// Grasp pose model and rotation-constrained candidate selection.

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/geometry.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/tensor_io.hpp"

namespace gatgrasp {

/// 7-DOF grasp: translation, rotation and binary width command
/// (1 = open / pre-grasp, 0 = closed).
struct GraspPose {
  Vec3 t = Vec3::Zero();
  Rotation3 R;
  int w = 1;
};

struct GraspCandidate {
  GraspPose pose;
  double score = 0.0;  // generator confidence in [0, 1]
};

enum class AttentionMode { Off, Weight };

inline std::string_view to_string(AttentionMode m) { return m == AttentionMode::Off ? "off" : "weight"; }

inline AttentionMode parse_attention_mode(std::string_view s) {
  if (s == "off") return AttentionMode::Off;
  if (s == "weight") return AttentionMode::Weight;
  throw Error(ErrorCode::ParseError, "attention mode must be 'off' or 'weight'");
}

struct SelectionParams {
  double lambda = 0.1;
  double sigma = 30.0;  // pixels
  AttentionMode attention = AttentionMode::Weight;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  }
};

/// ‖I − R_hᵀ R_i‖_F, which equals 2√2·|sin(θ/2)| for relative angle θ.
inline double frobenius_deviation(const Rotation3& r_h, const Rotation3& r_i) {
  return (Eigen::Matrix3d::Identity() - r_h.matrix().transpose() * r_i.matrix()).norm();
}

/// exp(−‖project(t) − c_t‖² / (2σ²)).
inline double gaussian_attention_weight(const GraspCandidate& candidate, const PixelPoint& c_t,
                                        const CameraIntrinsics& k, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  const PixelPoint p = project(candidate.pose.t, k);
  const double du = p.u - c_t.u;
  const double dv = p.v - c_t.v;
  return std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
}

struct CandidateScore {
  double confidence = 0.0;
  double attention = 1.0;
  double deviation = 0.0;
  double effective = 0.0;
};

struct GraspSelection {
  std::size_t index = 0;
  GraspCandidate candidate;
  std::vector<CandidateScore> breakdown;
};

/// Maximizes (s_i·a_i) − λ·‖I − R_hᵀR_i‖_F, where a_i is the Gaussian
/// attention weight around `c_t` (or 1 with attention off). Ties go to the
/// lowest candidate index.
inline GraspSelection select_grasp(const std::vector<GraspCandidate>& candidates, const Rotation3& r_h,
                                   const PixelPoint& c_t, const CameraIntrinsics& k, const SelectionParams& params) {
  params.validate();
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no grasp candidates");
  GraspSelection out;
  out.breakdown.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    CandidateScore s;
    s.confidence = c.score;
    s.attention = params.attention == AttentionMode::Weight ? gaussian_attention_weight(c, c_t, k, params.sigma) : 1.0;
    s.deviation = frobenius_deviation(r_h, c.pose.R);
    s.effective = s.confidence * s.attention - params.lambda * s.deviation;
    if (i == 0 || s.effective > out.breakdown[out.index].effective) out.index = i;
    out.breakdown.push_back(s);
  }
  out.candidate = candidates[out.index];
  return out;
}

/// Generator-free grasp: back-project the contact at the nearest valid
/// depth and back off along the approach axis (third column of R_h).
inline GraspPose direct_grasp(const PixelPoint& c_t, const DepthScene& scene, const Rotation3& r_h,
                              double standoff = 0.0) {
  const auto depth = scene.nearest_valid_depth(c_t, kRefineSearchRadius);
  if (!depth) throw Error(ErrorCode::NoValidDepth, "no valid depth near the contact point");
  GraspPose pose;
  pose.t = backproject(c_t, *depth, scene.intrinsics()) - standoff * r_h.col(2);
  pose.R = r_h;
  pose.w = 1;
  return pose;
}

/// Quaternion tolerance for accepting generator output: |‖q‖ − 1| ≤ 1e-3.
inline constexpr double kQuaternionTolerance = 1e-3;

/// Parses one candidate record: {"t":[x,y,z], "q":[w,x,y,z], "score":s}.
inline GraspCandidate candidate_from_json(const nlohmann::json& j) {
  std::vector<double> t, q;
  double score = 0.0;
  try {
    t = j.at("t").get<std::vector<double>>();
    q = j.at("q").get<std::vector<double>>();
    score = j.at("score").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("candidate record: ") + e.what());
  }
  if (t.size() != 3 || q.size() != 4) throw Error(ErrorCode::ParseError, "candidate needs t[3] and q[4]");
  for (double x : t)
    if (!std::isfinite(x)) throw Error(ErrorCode::ParseError, "non-finite translation");
  const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!std::isfinite(qn) || std::abs(qn - 1.0) > kQuaternionTolerance) {
    throw Error(ErrorCode::NonUnitQuaternion, "quaternion norm " + std::to_string(qn));
  }
  if (!(score >= 0.0 && score <= 1.0)) throw Error(ErrorCode::ScoreOutOfRange, "score " + std::to_string(score));
  GraspCandidate c;
  c.pose.t = Vec3(t[0], t[1], t[2]);
  c.pose.R = Rotation3::from_quaternion(q[0], q[1], q[2], q[3]);
  c.score = score;
  return c;
}

inline nlohmann::json candidate_to_json(const GraspCandidate& c) {
  const Eigen::Quaterniond q(c.pose.R.matrix());
  return {{"t", {c.pose.t.x(), c.pose.t.y(), c.pose.t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}, {"score", c.score}};
}

/// JSON Lines candidate file; blank lines are skipped.
inline std::vector<GraspCandidate> parse_candidates(const std::string& text) {
  std::vector<GraspCandidate> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      out.push_back(candidate_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<GraspCandidate> load_candidates(const std::filesystem::path& path) {
  return parse_candidates(read_file_bytes(path, ErrorCode::ParseError));
}

inline void save_candidates(const std::filesystem::path& path, const std::vector<GraspCandidate>& candidates) {
  std::string text;
  for (const auto& c : candidates) text += candidate_to_json(c).dump() + "\n";
  write_file_bytes(path, text);
}

}  // namespace gatgrasp
