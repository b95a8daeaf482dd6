#pragma once

// End-to-end composition: point → crop → retrieve → transfer → rotation →
// grasp selection (or direct grasp), with ablation switches and DTM
// evaluation.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gatgrasp/dtm.hpp"
#include "gatgrasp/error.hpp"
#include "gatgrasp/grasp.hpp"
#include "gatgrasp/gripper.hpp"
#include "gatgrasp/io.hpp"
#include "gatgrasp/memory.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/retrieval.hpp"
#include "gatgrasp/transfer.hpp"

namespace gatgrasp {

struct PipelineParams {
  int top_k = kDefaultTopK;
  double epsilon = 0.01;           // ray/depth tolerance, meters
  double self_hit = 0.05;          // exclusion band past the fingertip, meters
  int crop_size = kDefaultCropSize;
  double ransac_threshold = 0.01;  // meters
  int ransac_iterations = 100;
  std::uint64_t seed = 0;
  SelectionParams selection{};
  double standoff = 0.0;           // meters
};

struct AblationFlags {
  bool no_pointing = false;
  bool no_transfer = false;
  bool no_rotation = false;
  bool no_grasp_model = false;
};

struct PipelineInputs {
  std::shared_ptr<const MemoryBank> bank;
  HandKeypoints pointing_hand;
  HandKeypoints grasp_hand;
  DepthScene scene;
  std::vector<double> query_embedding;
  std::shared_ptr<const FeatureMap> query_features;
  std::optional<std::vector<GraspCandidate>> candidates;
  std::optional<Mask> mask;
};

struct PipelineConfig {
  PipelineParams params;
  AblationFlags ablations;

  void validate(const PipelineInputs& in) const {
    if (ablations.no_pointing && ablations.no_transfer) {
      throw Error(ErrorCode::InvalidArgument, "no_pointing and no_transfer together leave no contact point");
    }
    if (ablations.no_grasp_model && in.candidates) {
      throw Error(ErrorCode::InvalidArgument, "no_grasp_model excludes a candidates file");
    }
    if (!ablations.no_grasp_model && !in.candidates) {
      throw Error(ErrorCode::InvalidArgument, "a candidates file is required unless no_grasp_model is set");
    }
    if (!ablations.no_transfer && (!in.bank || !in.query_features)) {
      throw Error(ErrorCode::InvalidArgument, "transfer needs a bank and query features");
    }
    if (params.top_k < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
    params.selection.validate();
  }
};

struct PipelineTimings {
  double pointing_ms = 0.0;
  double retrieval_ms = 0.0;
  double transfer_ms = 0.0;
  double rotation_ms = 0.0;
  double grasp_ms = 0.0;
};

struct TransferOutcome {
  PixelPoint source_contact;
  PixelPoint target_contact;  // C^T, full-image pixels
  double similarity = 0.0;
  GridCell cell;
  bool from_pointing = false;  // C^T = u* (transfer ablated)
};

struct PipelineReport {
  PipelineConfig config;
  std::optional<PointingResult> pointing;
  CropRect region;
  std::optional<RetrievalResult> retrieval;
  TransferOutcome transfer;
  std::optional<Rotation3> rotation;
  bool direct = false;
  GraspPose grasp;
  std::optional<GraspSelection> selection;
  std::optional<double> dtm;
  PipelineTimings timings;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, double& elapsed_ms, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    } else {
      auto result = f();
      elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

}  // namespace detail

inline PipelineReport run_pipeline(const PipelineInputs& in, const PipelineConfig& config) {
  try {
    config.validate(in);
  } catch (const Error& e) {
    throw StageError("config", e);
  }
  const auto& p = config.params;
  const auto& flags = config.ablations;
  const auto& k = in.scene.intrinsics();

  PipelineReport report;
  report.config = config;

  // Pointing → target region.
  if (!flags.no_pointing) {
    report.pointing = detail::run_stage("pointing", report.timings.pointing_ms, [&] {
      PointingOptions opts;
      opts.line = {p.ransac_threshold, p.ransac_iterations, p.seed};
      opts.intersect = {p.epsilon, p.self_hit};
      opts.crop_size = p.crop_size;
      return locate_target(in.pointing_hand, in.scene, opts);
    });
    report.region = report.pointing->crop;
  } else {
    report.region = full_image_rect(in.scene.dims());
  }

  // Retrieval + transfer → C^T.
  if (!flags.no_transfer) {
    report.retrieval = detail::run_stage("retrieval", report.timings.retrieval_ms, [&] {
      return retrieve(in.grasp_hand, in.query_embedding, *in.bank, p.top_k);
    });
    report.transfer = detail::run_stage("transfer", report.timings.transfer_ms, [&] {
      const auto& entry = in.bank->entries.at(report.retrieval->index);
      const FeatureMap& tgt = *in.query_features;
      TransferOutcome t;
      t.source_contact = entry.contact;
      TransferOptions topts;
      PixelPoint offset{0.0, 0.0};
      if (tgt.image_dims == in.scene.dims()) {
        topts.region = report.region;
      } else if (tgt.image_dims == ImageDims{report.region.w, report.region.h}) {
        offset = {static_cast<double>(report.region.u0), static_cast<double>(report.region.v0)};
      } else {
        throw Error(ErrorCode::DimensionMismatch, "query feature map covers neither the image nor the crop");
      }
      const Correspondence c = transfer_contact(*entry.features, entry.contact, tgt, topts);
      t.target_contact = {c.target_pixel.u + offset.u, c.target_pixel.v + offset.v};
      t.similarity = c.similarity;
      t.cell = c.target_cell;
      return t;
    });
  } else {
    report.transfer.from_pointing = true;
    report.transfer.target_contact = report.pointing->hit.pixel;
  }
  const PixelPoint c_t = report.transfer.target_contact;

  // Hand → gripper rotation.
  if (!flags.no_rotation) {
    report.rotation = detail::run_stage("rotation", report.timings.rotation_ms,
                                        [&] { return hand_to_gripper_rotation(in.grasp_hand); });
  }
  const Rotation3 r_h = report.rotation.value_or(Rotation3::identity());

  // Grasp.
  detail::run_stage("grasp", report.timings.grasp_ms, [&] {
    if (flags.no_grasp_model) {
      report.direct = true;
      report.grasp = direct_grasp(c_t, in.scene, r_h, p.standoff);
    } else {
      SelectionParams sp = p.selection;
      if (flags.no_rotation) sp.lambda = 0.0;
      report.selection = select_grasp(*in.candidates, r_h, c_t, k, sp);
      report.grasp = report.selection->candidate.pose;
    }
  });

  if (in.mask) {
    double unused = 0.0;
    report.dtm = detail::run_stage("dtm", unused, [&] {
      if (in.mask->dims != in.scene.dims()) throw Error(ErrorCode::DimensionMismatch, "mask dims differ from scene");
      return compute_dtm(c_t, *in.mask);
    });
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization. Keys are sorted, so equal reports dump to equal
// bytes. Timings are wall-clock and only included on request.

namespace report_json {

using nlohmann::json;

inline json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline json pixel(const PixelPoint& p) { return {p.u, p.v}; }
inline json rect(const CropRect& r) { return {{"u0", r.u0}, {"v0", r.v0}, {"w", r.w}, {"h", r.h}}; }
inline json rotation(const Rotation3& r) { return r.row_major(); }

inline json pointing(const PointingResult& p) {
  json inl = json::array();
  for (bool b : p.ray.inliers) inl.push_back(b);
  json refined = json::array();
  for (bool b : p.refined.refined) refined.push_back(b);
  return {{"ray_origin", vec(p.ray.ray.origin())},
          {"ray_direction", vec(p.ray.ray.direction())},
          {"inliers", inl},
          {"inlier_count", p.ray.inlier_count},
          {"refined", refined},
          {"target3d", vec(p.hit.point)},
          {"target2d", pixel(p.hit.pixel)},
          {"crop", rect(p.crop)}};
}

inline json params(const PipelineConfig& c) {
  const auto& p = c.params;
  return {{"k", p.top_k},
          {"epsilon", p.epsilon},
          {"self_hit", p.self_hit},
          {"crop_size", p.crop_size},
          {"ransac_threshold", p.ransac_threshold},
          {"ransac_iterations", p.ransac_iterations},
          {"seed", p.seed},
          {"lambda", p.selection.lambda},
          {"sigma", p.selection.sigma},
          {"attention", std::string(to_string(p.selection.attention))},
          {"standoff", p.standoff},
          {"ablations",
           {{"no_pointing", c.ablations.no_pointing},
            {"no_transfer", c.ablations.no_transfer},
            {"no_rotation", c.ablations.no_rotation},
            {"no_grasp_model", c.ablations.no_grasp_model}}}};
}

inline json to_json(const PipelineReport& r, bool include_timings = false) {
  json j;
  j["config"] = params(r.config);
  j["pointing"] = r.pointing ? pointing(*r.pointing) : json(nullptr);
  j["region"] = rect(r.region);
  if (r.retrieval) {
    j["retrieval"] = {{"entry_id", r.retrieval->entry_id},
                      {"gesture_similarity", r.retrieval->gesture_similarity},
                      {"embedding_similarity", r.retrieval->embedding_similarity},
                      {"rank_stage1", r.retrieval->rank_stage1},
                      {"truncated", r.retrieval->truncated}};
  } else {
    j["retrieval"] = nullptr;
  }
  j["contact"] = {{"target", pixel(r.transfer.target_contact)},
                  {"source", r.transfer.from_pointing ? json(nullptr) : pixel(r.transfer.source_contact)},
                  {"similarity", r.transfer.from_pointing ? json(nullptr) : json(r.transfer.similarity)},
                  {"cell", r.transfer.from_pointing ? json(nullptr) : json{r.transfer.cell.row, r.transfer.cell.col}},
                  {"mode", r.transfer.from_pointing ? "pointing" : "transfer"}};
  j["rotation"] = r.rotation ? rotation(*r.rotation) : json(nullptr);
  json grasp = {{"mode", r.direct ? "direct" : "generator"},
                {"t", vec(r.grasp.t)},
                {"R", rotation(r.grasp.R)},
                {"w", r.grasp.w}};
  if (r.selection) {
    grasp["index"] = r.selection->index;
    json rows = json::array();
    for (const auto& s : r.selection->breakdown) {
      rows.push_back({{"confidence", s.confidence},
                      {"attention", s.attention},
                      {"deviation", s.deviation},
                      {"effective", s.effective}});
    }
    grasp["breakdown"] = rows;
  }
  j["grasp"] = grasp;
  j["dtm"] = r.dtm ? json(*r.dtm) : json(nullptr);
  if (include_timings) {
    j["timings_ms"] = {{"pointing", r.timings.pointing_ms},
                       {"retrieval", r.timings.retrieval_ms},
                       {"transfer", r.timings.transfer_ms},
                       {"rotation", r.timings.rotation_ms},
                       {"grasp", r.timings.grasp_ms}};
  }
  return j;
}

}  // namespace report_json

// ---------------------------------------------------------------------------
// Config files. Paths resolve against the config file's directory.
//
// {
//   "bank": "bank", "pointing_keypoints": "pointing.json", "grasp_keypoints": "grasp.json",
//   "scene": "scene.json", "query_embedding": "embedding.json",
//   "query_features": "query.ggt", "query_feature_dims": [w, h],     (dims optional: default scene dims)
//   "candidates": "candidates.jsonl", "mask": "mask.pgm",            (both optional)
//   "params": {"k", "epsilon", "self_hit", "crop_size", "ransac_threshold", "ransac_iterations",
//              "seed", "lambda", "sigma", "attention", "standoff"},
//   "ablations": {"no_pointing", "no_transfer", "no_rotation", "no_grasp_model"}
// }

struct PipelineFiles {
  std::filesystem::path bank, pointing_keypoints, grasp_keypoints, scene, query_embedding, query_features;
  std::optional<ImageDims> query_feature_dims;
  std::optional<std::filesystem::path> candidates, mask;
};

inline void apply_params_json(const nlohmann::json& j, PipelineConfig& c) {
  try {
    if (j.contains("params")) {
      const auto& p = j["params"];
      auto& pp = c.params;
      pp.top_k = p.value("k", pp.top_k);
      pp.epsilon = p.value("epsilon", pp.epsilon);
      pp.self_hit = p.value("self_hit", pp.self_hit);
      pp.crop_size = p.value("crop_size", pp.crop_size);
      pp.ransac_threshold = p.value("ransac_threshold", pp.ransac_threshold);
      pp.ransac_iterations = p.value("ransac_iterations", pp.ransac_iterations);
      pp.seed = p.value("seed", pp.seed);
      pp.selection.lambda = p.value("lambda", pp.selection.lambda);
      pp.selection.sigma = p.value("sigma", pp.selection.sigma);
      if (p.contains("attention")) pp.selection.attention = parse_attention_mode(p["attention"].get<std::string>());
      pp.standoff = p.value("standoff", pp.standoff);
    }
    if (j.contains("ablations")) {
      const auto& a = j["ablations"];
      auto& f = c.ablations;
      f.no_pointing = a.value("no_pointing", f.no_pointing);
      f.no_transfer = a.value("no_transfer", f.no_transfer);
      f.no_rotation = a.value("no_rotation", f.no_rotation);
      f.no_grasp_model = a.value("no_grasp_model", f.no_grasp_model);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config params: ") + e.what());
  }
}

inline PipelineFiles files_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  PipelineFiles f;
  auto path_of = [&](const char* key) { return io::resolve(base, j.at(key).get<std::string>()); };
  try {
    f.bank = path_of("bank");
    f.pointing_keypoints = path_of("pointing_keypoints");
    f.grasp_keypoints = path_of("grasp_keypoints");
    f.scene = path_of("scene");
    f.query_embedding = path_of("query_embedding");
    f.query_features = path_of("query_features");
    if (j.contains("query_feature_dims")) {
      const auto& d = j["query_feature_dims"];
      f.query_feature_dims = ImageDims{d.at(0).get<int>(), d.at(1).get<int>()};
    }
    if (j.contains("candidates") && !j["candidates"].is_null()) f.candidates = path_of("candidates");
    if (j.contains("mask") && !j["mask"].is_null()) f.mask = path_of("mask");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return f;
}

inline PipelineInputs load_inputs(const PipelineFiles& f, const AblationFlags& flags) {
  PipelineInputs in;
  in.scene = io::read_scene(f.scene);
  in.pointing_hand = io::read_keypoints(f.pointing_keypoints);
  in.grasp_hand = io::read_keypoints(f.grasp_keypoints);
  if (!flags.no_transfer) {
    in.bank = std::make_shared<const MemoryBank>(load_bank(f.bank));
    in.query_embedding = io::read_embedding(f.query_embedding);
    in.query_features = std::make_shared<const FeatureMap>(
        read_feature_map(f.query_features, f.query_feature_dims.value_or(in.scene.dims())));
  }
  if (f.candidates && !flags.no_grasp_model) in.candidates = load_candidates(*f.candidates);
  if (f.mask) in.mask = read_mask(*f.mask);
  return in;
}

struct LoadedCase {
  PipelineConfig config;
  PipelineInputs inputs;
};

/// Reads a config file and everything it references. `overrides` is merged
/// on top of the file's params/ablations.
inline LoadedCase load_case(const std::filesystem::path& config_path, const nlohmann::json& overrides = {}) {
  const auto j = io::read_json(config_path);
  LoadedCase c;
  apply_params_json(j, c.config);
  if (!overrides.is_null()) apply_params_json(overrides, c.config);
  try {
    c.inputs = load_inputs(files_from_json(j, config_path.parent_path()), c.config.ablations);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("load", e);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Batch evaluation over a directory of cases (one sub-directory with a
// `case.json` per case, processed in name order).

struct CaseResult {
  std::string name;
  bool completed = false;
  std::optional<double> dtm;
  std::string error;
};

struct BatchMetrics {
  std::vector<CaseResult> cases;
  std::size_t completed = 0;
  std::size_t with_dtm = 0;
  double mean_dtm = 0.0;
  double median_dtm = 0.0;
  double dtm_threshold = 0.05;
  /// Completion with DTM at or under the threshold. A localization proxy,
  /// not a physical grasp success rate.
  double proxy_success_rate = 0.0;
};

inline BatchMetrics aggregate(std::vector<CaseResult> cases, double dtm_threshold) {
  BatchMetrics m;
  m.dtm_threshold = dtm_threshold;
  std::vector<double> values;
  std::size_t proxy = 0;
  for (const auto& c : cases) {
    if (c.completed) ++m.completed;
    if (c.dtm) {
      values.push_back(*c.dtm);
      if (c.completed && *c.dtm <= dtm_threshold) ++proxy;
    }
  }
  m.with_dtm = values.size();
  if (!values.empty()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean_dtm = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    m.median_dtm = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  if (!cases.empty()) m.proxy_success_rate = static_cast<double>(proxy) / static_cast<double>(cases.size());
  m.cases = std::move(cases);
  return m;
}

inline BatchMetrics eval_batch(const std::filesystem::path& cases_dir, const nlohmann::json& overrides = {},
                               double dtm_threshold = 0.05) {
  if (!std::filesystem::is_directory(cases_dir)) {
    throw Error(ErrorCode::InvalidArgument, "cases directory does not exist: " + cases_dir.string());
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(cases_dir)) {
    if (e.is_directory() && std::filesystem::exists(e.path() / "case.json")) dirs.push_back(e.path());
  }
  if (dirs.empty()) throw Error(ErrorCode::InvalidArgument, "no cases (sub-directories with case.json) found");
  std::sort(dirs.begin(), dirs.end());

  std::vector<CaseResult> results;
  for (const auto& dir : dirs) {
    CaseResult r;
    r.name = dir.filename().string();
    try {
      const auto loaded = load_case(dir / "case.json", overrides);
      const auto report = run_pipeline(loaded.inputs, loaded.config);
      r.completed = true;
      r.dtm = report.dtm;
    } catch (const Error& e) {
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  return aggregate(std::move(results), dtm_threshold);
}

inline nlohmann::json to_json(const BatchMetrics& m) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : m.cases) {
    cases.push_back({{"name", c.name},
                     {"completed", c.completed},
                     {"dtm", c.dtm ? nlohmann::json(*c.dtm) : nlohmann::json(nullptr)},
                     {"error", c.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.error)}});
  }
  return {{"cases", cases},
          {"n_cases", m.cases.size()},
          {"completed", m.completed},
          {"with_dtm", m.with_dtm},
          {"mean_dtm", m.mean_dtm},
          {"median_dtm", m.median_dtm},
          {"dtm_threshold", m.dtm_threshold},
          {"proxy_success_rate", m.proxy_success_rate}};
}

inline std::string format_table(const BatchMetrics& m) {
  std::ostringstream out;
  out << "case                          status     dtm\n";
  char buf[160];
  for (const auto& c : m.cases) {
    std::snprintf(buf, sizeof buf, "%-28s  %-9s  %s\n", c.name.c_str(), c.completed ? "ok" : "error",
                  c.dtm ? std::to_string(*c.dtm).c_str() : "-");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "completed %zu/%zu  mean DTM %.6f  median DTM %.6f\n", m.completed, m.cases.size(),
                m.mean_dtm, m.median_dtm);
  out << buf;
  std::snprintf(buf, sizeof buf, "proxy success (completed and DTM <= %.3f, not a physical SR): %.4f\n",
                m.dtm_threshold, m.proxy_success_rate);
  out << buf;
  return out.str();
}

}  // namespace gatgrasp
