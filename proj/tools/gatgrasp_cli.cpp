// gatgrasp command-line tool. Every subcommand prints JSON on stdout (or a
// table for `eval`) and reports failures on stderr as
// "error: [stage] Code: message" with a nonzero exit code.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gatgrasp/dtm.hpp"
#include "gatgrasp/gesture.hpp"
#include "gatgrasp/grasp.hpp"
#include "gatgrasp/gripper.hpp"
#include "gatgrasp/io.hpp"
#include "gatgrasp/memory.hpp"
#include "gatgrasp/pipeline.hpp"
#include "gatgrasp/pointing.hpp"
#include "gatgrasp/retrieval.hpp"
#include "gatgrasp/synth_case.hpp"
#include "gatgrasp/tensor_io.hpp"
#include "gatgrasp/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gatgrasp;

namespace {

constexpr int kExitFailure = 2;

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    io::write_json(out, j);
  }
}

ImageDims dims_of(const std::vector<int>& wh) { return {wh.at(0), wh.at(1)}; }
PixelPoint pixel_of(const std::vector<double>& uv) { return {uv.at(0), uv.at(1)}; }

// Runs `body`, tagging plain library errors with the subcommand name.
template <typename F>
void tagged(const std::string& stage, F&& body) {
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

// Pipeline flags shared by `pipeline` and `eval`. Only flags the user set
// end up in the override object.
struct PipelineFlags {
  std::optional<int> k, crop_size, ransac_iterations;
  std::optional<double> epsilon, self_hit, ransac_threshold, lambda, sigma, standoff;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> attention;
  bool no_pointing = false, no_transfer = false, no_rotation = false, no_grasp_model = false;

  void add_to(CLI::App* app) {
    app->add_option("--k", k, "Stage-1 gesture shortlist size");
    app->add_option("--epsilon", epsilon, "Ray/depth tolerance in meters");
    app->add_option("--self-hit", self_hit, "Exclusion band past the fingertip in meters");
    app->add_option("--crop-size", crop_size, "Square crop side in pixels");
    app->add_option("--ransac-threshold", ransac_threshold, "Line-fit inlier distance in meters");
    app->add_option("--ransac-iterations", ransac_iterations, "Line-fit iterations");
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--lambda", lambda, "Rotation penalty weight");
    app->add_option("--sigma", sigma, "Attention bandwidth in pixels");
    app->add_option("--attention", attention, "Attention mode")->check(CLI::IsMember({"off", "weight"}));
    app->add_option("--standoff", standoff, "Direct-grasp standoff in meters");
    app->add_flag("--no-pointing", no_pointing, "Search the whole image instead of the pointed crop");
    app->add_flag("--no-transfer", no_transfer, "Use the pointed pixel as the contact point");
    app->add_flag("--no-rotation", no_rotation, "Drop the hand-derived rotation term");
    app->add_flag("--no-grasp-model", no_grasp_model, "Build the grasp directly from depth");
  }

  json overrides() const {
    json p = json::object();
    if (k) p["k"] = *k;
    if (epsilon) p["epsilon"] = *epsilon;
    if (self_hit) p["self_hit"] = *self_hit;
    if (crop_size) p["crop_size"] = *crop_size;
    if (ransac_threshold) p["ransac_threshold"] = *ransac_threshold;
    if (ransac_iterations) p["ransac_iterations"] = *ransac_iterations;
    if (seed) p["seed"] = *seed;
    if (lambda) p["lambda"] = *lambda;
    if (sigma) p["sigma"] = *sigma;
    if (attention) p["attention"] = *attention;
    if (standoff) p["standoff"] = *standoff;
    json a = json::object();
    if (no_pointing) a["no_pointing"] = true;
    if (no_transfer) a["no_transfer"] = true;
    if (no_rotation) a["no_rotation"] = true;
    if (no_grasp_model) a["no_grasp_model"] = true;
    return {{"params", p}, {"ablations", a}};
  }
};

json joints_json(const JointArray& joints) {
  json arr = json::array();
  for (const auto& j : joints) arr.push_back({j.x(), j.y(), j.z()});
  return arr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gesture-conditioned grasp pipeline tools"};
  app.require_subcommand(1);
  std::string out;

  // point
  auto* point = app.add_subcommand("point", "Locate the pointed target in a depth scene");
  std::string point_kp, point_scene;
  PointingOptions point_opts;
  point->add_option("--keypoints", point_kp, "Pointing-hand keypoint file")->required();
  point->add_option("--scene", point_scene, "Depth scene file")->required();
  point->add_option("--epsilon", point_opts.intersect.epsilon, "Ray/depth tolerance in meters");
  point->add_option("--self-hit", point_opts.intersect.min_t, "Exclusion band past the fingertip in meters");
  point->add_option("--crop-size", point_opts.crop_size, "Square crop side in pixels");
  point->add_option("--ransac-threshold", point_opts.line.inlier_threshold, "Line-fit inlier distance in meters");
  point->add_option("--ransac-iterations", point_opts.line.iterations, "Line-fit iterations");
  point->add_option("--seed", point_opts.line.seed, "RNG seed");
  point->add_option("--out", out, "Write JSON here instead of stdout");
  point->callback([&] {
    tagged("pointing", [&] {
      const auto result = locate_target(io::read_keypoints(point_kp), io::read_scene(point_scene), point_opts);
      emit(report_json::pointing(result), out);
    });
  });

  // canon
  auto* canon = app.add_subcommand("canon", "Canonicalize a hand gesture");
  std::string canon_kp;
  canon->add_option("--keypoints", canon_kp, "Keypoint file")->required();
  canon->add_option("--out", out, "Write JSON here instead of stdout");
  canon->callback([&] {
    tagged("canon", [&] {
      const auto g = canonicalize(io::read_keypoints(canon_kp));
      emit({{"chirality", std::string(to_string(g.chirality))}, {"joints", joints_json(g.joints)}}, out);
    });
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Add one entry to a memory bank directory");
  std::string ing_bank, ing_id, ing_kp, ing_emb, ing_feat, ing_image_ref;
  std::optional<std::string> ing_category;
  std::vector<int> ing_dims;
  std::vector<double> ing_contact;
  ingest->add_option("--bank", ing_bank, "Bank directory (created when missing)")->required();
  ingest->add_option("--id", ing_id, "Entry id")->required();
  ingest->add_option("--keypoints", ing_kp, "Grasp-gesture keypoint file")->required();
  ingest->add_option("--embedding", ing_emb, "Image embedding file")->required();
  ingest->add_option("--features", ing_feat, "Feature map tensor")->required();
  ingest->add_option("--image-dims", ing_dims, "Source image width and height")->expected(2)->required();
  ingest->add_option("--contact", ing_contact, "Contact pixel u v")->expected(2)->required();
  ingest->add_option("--image-ref", ing_image_ref, "Opaque reference to the source image");
  ingest->add_option("--category", ing_category, "Object category");
  ingest->callback([&] {
    tagged("ingest", [&] {
      MemoryBank bank = fs::exists(fs::path(ing_bank) / kManifestName) ? load_bank(ing_bank) : MemoryBank{};
      MemoryRecord rec;
      rec.id = ing_id;
      rec.gesture = io::read_keypoints(ing_kp);
      validate_recorded_hand(rec.gesture);
      rec.embedding = io::read_embedding(ing_emb);
      rec.image_dims = dims_of(ing_dims);
      rec.features = std::make_shared<const FeatureMap>(read_feature_map(ing_feat, rec.image_dims));
      rec.contact = pixel_of(ing_contact);
      rec.image_ref = ing_image_ref;
      rec.category = ing_category;
      bank = ingest_entry(std::move(bank), std::move(rec));
      save_bank(bank, ing_bank);
      std::cout << json{{"entries", bank.size()}, {"id", ing_id}}.dump() << "\n";
    });
  });

  // validate
  auto* validate = app.add_subcommand("validate", "Check a memory bank for inconsistencies");
  std::string val_bank;
  validate->add_option("--bank", val_bank, "Bank directory")->required();
  bool validate_failed = false;
  validate->callback([&] {
    tagged("validate", [&] {
      const auto report = validate_bank(load_bank(val_bank));
      json findings = json::array();
      for (const auto& f : report.findings) findings.push_back({{"id", f.entry_id}, {"kind", f.kind}, {"detail", f.detail}});
      std::cout << json{{"ok", report.ok()}, {"empty", report.empty}, {"findings", findings}}.dump(2) << "\n";
      if (report.empty) std::cerr << "warning: bank is empty\n";
      validate_failed = !report.ok();
    });
  });

  // retrieve
  auto* retr = app.add_subcommand("retrieve", "Two-stage memory retrieval");
  std::string retr_bank, retr_kp, retr_emb;
  int retr_k = kDefaultTopK;
  retr->add_option("--bank", retr_bank, "Bank directory")->required();
  retr->add_option("--keypoints", retr_kp, "Grasp-gesture keypoint file")->required();
  retr->add_option("--embedding", retr_emb, "Query embedding file")->required();
  retr->add_option("--k", retr_k, "Stage-1 shortlist size");
  retr->add_option("--out", out, "Write JSON here instead of stdout");
  retr->callback([&] {
    tagged("retrieval", [&] {
      const auto bank = load_bank(retr_bank);
      const auto hand = io::read_keypoints(retr_kp);
      const auto top = retrieve_topk_gestures(hand, bank, retr_k);
      const auto r = select_entry(top, bank, io::read_embedding(retr_emb));
      json shortlist = json::array();
      for (const auto& s : top.items) shortlist.push_back({{"id", s.id}, {"similarity", s.similarity}});
      emit({{"entry_id", r.entry_id},
            {"gesture_similarity", r.gesture_similarity},
            {"embedding_similarity", r.embedding_similarity},
            {"rank_stage1", r.rank_stage1},
            {"truncated", r.truncated},
            {"stage1", shortlist}},
           out);
    });
  });

  // transfer
  auto* xfer = app.add_subcommand("transfer", "Map a contact point between two feature maps");
  std::string xf_src, xf_tgt;
  std::vector<int> xf_src_dims, xf_tgt_dims, xf_region;
  std::vector<double> xf_contact;
  xfer->add_option("--src", xf_src, "Source feature map tensor")->required();
  xfer->add_option("--src-dims", xf_src_dims, "Source image width and height")->expected(2)->required();
  xfer->add_option("--tgt", xf_tgt, "Target feature map tensor")->required();
  xfer->add_option("--tgt-dims", xf_tgt_dims, "Target image width and height")->expected(2)->required();
  xfer->add_option("--contact", xf_contact, "Source contact pixel u v")->expected(2)->required();
  xfer->add_option("--region", xf_region, "Restrict to u0 v0 w h")->expected(4);
  xfer->add_option("--out", out, "Write JSON here instead of stdout");
  xfer->callback([&] {
    tagged("transfer", [&] {
      TransferOptions opts;
      if (!xf_region.empty()) opts.region = CropRect{xf_region[0], xf_region[1], xf_region[2], xf_region[3]};
      const auto c = transfer_contact(read_feature_map(xf_src, dims_of(xf_src_dims)), pixel_of(xf_contact),
                                      read_feature_map(xf_tgt, dims_of(xf_tgt_dims)), opts);
      emit({{"target", report_json::pixel(c.target_pixel)},
            {"similarity", c.similarity},
            {"cell", {c.target_cell.row, c.target_cell.col}}},
           out);
    });
  });

  // rot
  auto* rot = app.add_subcommand("rot", "Gripper rotation from a grasp gesture");
  std::string rot_kp;
  rot->add_option("--keypoints", rot_kp, "Grasp-gesture keypoint file")->required();
  rot->add_option("--out", out, "Write JSON here instead of stdout");
  rot->callback([&] {
    tagged("rotation", [&] {
      emit({{"R", report_json::rotation(hand_to_gripper_rotation(io::read_keypoints(rot_kp)))}}, out);
    });
  });

  // grasp
  auto* grasp = app.add_subcommand("grasp", "Select a grasp from generator candidates");
  std::string gr_cands, gr_kp, gr_scene, gr_attention = "weight";
  std::vector<double> gr_contact;
  SelectionParams gr_params;
  bool gr_direct = false;
  double gr_standoff = 0.0;
  grasp->add_option("--candidates", gr_cands, "Candidate file (one JSON record per line)");
  grasp->add_option("--keypoints", gr_kp, "Grasp-gesture keypoint file")->required();
  grasp->add_option("--scene", gr_scene, "Depth scene file (intrinsics, and depth for --direct)")->required();
  grasp->add_option("--contact", gr_contact, "Contact pixel u v")->expected(2)->required();
  grasp->add_option("--lambda", gr_params.lambda, "Rotation penalty weight");
  grasp->add_option("--sigma", gr_params.sigma, "Attention bandwidth in pixels");
  grasp->add_option("--attention", gr_attention, "Attention mode")->check(CLI::IsMember({"off", "weight"}));
  grasp->add_flag("--direct", gr_direct, "Build the grasp from depth without candidates");
  grasp->add_option("--standoff", gr_standoff, "Direct-grasp standoff in meters");
  grasp->add_option("--out", out, "Write JSON here instead of stdout");
  grasp->callback([&] {
    tagged("grasp", [&] {
      const auto scene = io::read_scene(gr_scene);
      const auto r_h = hand_to_gripper_rotation(io::read_keypoints(gr_kp));
      const auto c_t = pixel_of(gr_contact);
      if (gr_direct) {
        const auto pose = direct_grasp(c_t, scene, r_h, gr_standoff);
        emit({{"mode", "direct"}, {"t", report_json::vec(pose.t)}, {"R", report_json::rotation(pose.R)}, {"w", pose.w}}, out);
        return;
      }
      if (gr_cands.empty()) throw Error(ErrorCode::InvalidArgument, "--candidates is required unless --direct is set");
      gr_params.attention = parse_attention_mode(gr_attention);
      const auto sel = select_grasp(load_candidates(gr_cands), r_h, c_t, scene.intrinsics(), gr_params);
      json rows = json::array();
      for (const auto& s : sel.breakdown) {
        rows.push_back({{"confidence", s.confidence}, {"attention", s.attention}, {"deviation", s.deviation}, {"effective", s.effective}});
      }
      const auto& pose = sel.candidate.pose;
      emit({{"mode", "generator"},
            {"index", sel.index},
            {"t", report_json::vec(pose.t)},
            {"R", report_json::rotation(pose.R)},
            {"w", pose.w},
            {"breakdown", rows}},
           out);
    });
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run the full pipeline from a config file");
  std::string pipe_config;
  bool pipe_timings = false;
  PipelineFlags pipe_flags;
  pipe->add_option("--config", pipe_config, "Config file")->required()->check(CLI::ExistingFile);
  pipe->add_option("--out", out, "Write the report here instead of stdout");
  pipe->add_flag("--timings", pipe_timings, "Include wall-clock stage timings in the report");
  pipe_flags.add_to(pipe);
  pipe->callback([&] {
    tagged("pipeline", [&] {
      const auto loaded = load_case(pipe_config, pipe_flags.overrides());
      emit(report_json::to_json(run_pipeline(loaded.inputs, loaded.config), pipe_timings), out);
    });
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate every case directory under a folder");
  std::string eval_dir, eval_json;
  double eval_threshold = 0.05;
  PipelineFlags eval_flags;
  eval->add_option("--cases", eval_dir, "Directory of case sub-directories")->required();
  eval->add_option("--threshold", eval_threshold, "DTM threshold for the proxy success rate");
  eval->add_option("--json", eval_json, "Also write the machine-readable metrics here");
  eval_flags.add_to(eval);
  eval->callback([&] {
    tagged("eval", [&] {
      const auto metrics = eval_batch(eval_dir, eval_flags.overrides(), eval_threshold);
      std::cout << format_table(metrics);
      if (!eval_json.empty()) io::write_json(eval_json, to_json(metrics));
    });
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Write synthetic cases with planted ground truth");
  std::string syn_out;
  int syn_n = 1;
  std::uint64_t syn_seed = 0;
  syn->add_option("--out", syn_out, "Output directory (one sub-directory per case)")->required();
  syn->add_option("--n", syn_n, "Number of cases")->check(CLI::PositiveNumber);
  syn->add_option("--seed", syn_seed, "Seed of the first case; case i uses seed + i");
  syn->callback([&] {
    tagged("synth", [&] {
      for (int i = 0; i < syn_n; ++i) {
        const std::uint64_t seed = syn_seed + static_cast<std::uint64_t>(i);
        synth::write_case(fs::path(syn_out) / ("case-" + std::to_string(seed)), synth::generate_case(seed));
      }
      std::cout << json{{"cases", syn_n}, {"out", syn_out}}.dump() << "\n";
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: [io] " << e.what() << "\n";
    return kExitFailure;
  }
  return validate_failed ? 1 : 0;
}
