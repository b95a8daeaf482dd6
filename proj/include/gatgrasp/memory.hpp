#pragma once

// Affordance memory bank: gesture / source image / contact triplets with
// cached canonical gestures, embeddings and dense feature maps.
//
// On disk a bank is a directory holding `manifest.jsonl` (one JSON object
// per entry, insertion order) and one GGT1 rank-3 tensor per feature map.
// Paths in the manifest are relative to the bank directory.

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/gesture.hpp"
#include "gatgrasp/tensor_io.hpp"
#include "gatgrasp/transfer.hpp"

namespace gatgrasp {

/// Record as produced by an exporter, before canonicalization.
struct MemoryRecord {
  std::string id;
  HandKeypoints gesture;
  std::vector<double> embedding;
  std::shared_ptr<const FeatureMap> features;
  std::string feature_ref;  // relative path inside the bank; assigned on ingest when empty
  std::string image_ref;    // opaque to the library
  PixelPoint contact;       // in source-image pixels
  ImageDims image_dims;
  std::optional<std::string> category;
};

struct MemoryEntry : MemoryRecord {
  CanonicalGesture canonical;
};

struct MemoryBank {
  std::vector<MemoryEntry> entries;
  std::size_t embedding_dim = 0;
  std::size_t feature_dim = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  const MemoryEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

inline constexpr char kManifestName[] = "manifest.jsonl";

namespace detail {

inline double vector_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline bool is_relative_inside(const std::string& ref) {
  const std::filesystem::path p(ref);
  if (ref.empty() || p.is_absolute()) return false;
  for (const auto& part : p)
    if (part == "..") return false;
  return true;
}

inline double max_abs_difference(const JointArray& a, const JointArray& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < kNumJoints; ++j) worst = std::max(worst, (a[j] - b[j]).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace detail

/// Validates a record against the bank, canonicalizes its gesture and
/// appends it. Returns the grown bank; the input value is untouched.
inline MemoryBank ingest_entry(MemoryBank bank, MemoryRecord record) {
  if (record.id.empty()) throw Error(ErrorCode::InvalidEntry, "entry id is empty");
  if (bank.find(record.id)) throw Error(ErrorCode::DuplicateId, "duplicate entry id '" + record.id + "'");
  if (record.embedding.empty()) throw Error(ErrorCode::InvalidEntry, "embedding is empty");
  for (double x : record.embedding)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidEntry, "embedding has non-finite values");
  if (!(detail::vector_norm(record.embedding) > 0.0)) throw Error(ErrorCode::InvalidEntry, "embedding norm is zero");
  if (!bank.empty() && record.embedding.size() != bank.embedding_dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedding length " + std::to_string(record.embedding.size()) +
                                                  " != bank dimension " + std::to_string(bank.embedding_dim));
  }
  if (record.image_dims.width <= 0 || record.image_dims.height <= 0) {
    throw Error(ErrorCode::InvalidEntry, "image dims must be positive");
  }
  if (!contains(record.image_dims, record.contact)) {
    throw Error(ErrorCode::InvalidEntry, "contact point lies outside the source image");
  }
  if (!record.features) throw Error(ErrorCode::InvalidEntry, "entry has no feature map");
  record.features->validate();
  if (record.features->image_dims != record.image_dims) {
    throw Error(ErrorCode::InvalidEntry, "feature map image dims differ from entry image dims");
  }
  if (!bank.empty() && static_cast<std::size_t>(record.features->d) != bank.feature_dim) {
    throw Error(ErrorCode::DimensionMismatch, "feature channels differ from bank dimension");
  }
  if (record.feature_ref.empty()) record.feature_ref = "features/" + std::to_string(bank.size()) + ".ggt";
  if (!detail::is_relative_inside(record.feature_ref)) {
    throw Error(ErrorCode::InvalidEntry, "feature_ref must be a relative path inside the bank");
  }
  for (const auto& e : bank.entries) {
    if (e.feature_ref == record.feature_ref) throw Error(ErrorCode::InvalidEntry, "feature_ref already in use");
  }

  MemoryEntry entry;
  static_cast<MemoryRecord&>(entry) = std::move(record);
  entry.canonical = canonicalize(entry.gesture);  // DegenerateHand propagates

  if (bank.empty()) {
    bank.embedding_dim = entry.embedding.size();
    bank.feature_dim = static_cast<std::size_t>(entry.features->d);
  }
  bank.entries.push_back(std::move(entry));
  return bank;
}

// ---------------------------------------------------------------------------
// JSON helpers shared by the manifest and the CLI record formats.

namespace json_io {

using nlohmann::json;

inline json joints_to_json(const JointArray& joints) {
  json arr = json::array();
  for (const auto& j : joints) arr.push_back({j.x(), j.y(), j.z()});
  return arr;
}

inline JointArray joints_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() != kNumJoints) {
    throw Error(ErrorCode::ParseError, "expected 21 joint triples");
  }
  JointArray out{};
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& t = arr[i];
    if (!t.is_array() || t.size() != 3) throw Error(ErrorCode::ParseError, "joint must be an [x,y,z] triple");
    out[i] = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  }
  return out;
}

inline json hand_to_json(const HandKeypoints& hand) {
  return {{"chirality", std::string(to_string(hand.chirality))}, {"joints", joints_to_json(hand.joints)}};
}

inline HandKeypoints hand_from_json(const json& j) {
  try {
    HandKeypoints h;
    h.chirality = parse_chirality(j.at("chirality").get<std::string>());
    h.joints = joints_from_json(j.at("joints"));
    return h;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("keypoint record: ") + e.what());
  }
}

inline json entry_to_json(const MemoryEntry& e) {
  json j;
  j["id"] = e.id;
  j["chirality"] = std::string(to_string(e.gesture.chirality));
  j["joints"] = joints_to_json(e.gesture.joints);
  j["canonical"] = joints_to_json(e.canonical.joints);
  j["embedding"] = e.embedding;
  j["contact"] = {e.contact.u, e.contact.v};
  j["image_dims"] = {e.image_dims.width, e.image_dims.height};
  j["category"] = e.category ? json(*e.category) : json(nullptr);
  j["feature_ref"] = e.feature_ref;
  j["image_ref"] = e.image_ref;
  return j;
}

}  // namespace json_io

/// Writes the manifest and every feature tensor. Existing files with the
/// same names are overwritten.
inline void save_bank(const MemoryBank& bank, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::string manifest;
  for (const auto& e : bank.entries) {
    if (!e.features) throw Error(ErrorCode::InvalidEntry, "entry '" + e.id + "' has no feature map");
    if (!detail::is_relative_inside(e.feature_ref)) {
      throw Error(ErrorCode::InvalidEntry, "entry '" + e.id + "' has an invalid feature_ref");
    }
    write_tensor(directory / e.feature_ref, to_tensor(*e.features));
    manifest += json_io::entry_to_json(e).dump();
    manifest += '\n';
  }
  write_file_bytes(directory / kManifestName, manifest);
}

/// Reads a bank exactly as stored, including the cached canonical gestures,
/// so that `validate_bank` can audit what is on disk.
inline MemoryBank load_bank(const std::filesystem::path& directory) {
  using nlohmann::json;
  const auto manifest_path = directory / kManifestName;
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorCode::CorruptManifest, "no manifest at " + manifest_path.string());
  }
  std::istringstream lines(read_file_bytes(manifest_path, ErrorCode::CorruptManifest));
  MemoryBank bank;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    MemoryEntry e;
    try {
      const json j = json::parse(line);
      e.id = j.at("id").get<std::string>();
      e.gesture.chirality = parse_chirality(j.at("chirality").get<std::string>());
      e.gesture.joints = json_io::joints_from_json(j.at("joints"));
      e.canonical.chirality = e.gesture.chirality;
      e.canonical.joints = json_io::joints_from_json(j.at("canonical"));
      e.embedding = j.at("embedding").get<std::vector<double>>();
      const auto& c = j.at("contact");
      e.contact = {c.at(0).get<double>(), c.at(1).get<double>()};
      const auto& dims = j.at("image_dims");
      e.image_dims = {dims.at(0).get<int>(), dims.at(1).get<int>()};
      if (j.contains("category") && !j["category"].is_null()) e.category = j["category"].get<std::string>();
      e.feature_ref = j.at("feature_ref").get<std::string>();
      e.image_ref = j.value("image_ref", std::string());
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::CorruptManifest, "line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ErrorCode::CorruptManifest, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!detail::is_relative_inside(e.feature_ref)) {
      throw Error(ErrorCode::CorruptManifest, "line " + std::to_string(line_no) + ": bad feature_ref");
    }
    const auto tensor_path = directory / e.feature_ref;
    if (!std::filesystem::exists(tensor_path)) {
      throw Error(ErrorCode::MissingTensorFile, "missing feature tensor " + tensor_path.string());
    }
    Tensor t = read_tensor(tensor_path);
    if (t.dims.size() != 3) throw Error(ErrorCode::DimensionMismatch, "feature tensor must be rank 3");
    e.features = std::make_shared<const FeatureMap>(FeatureMap{static_cast<int>(t.dims[0]),
                                                               static_cast<int>(t.dims[1]),
                                                               static_cast<int>(t.dims[2]), std::move(t.data),
                                                               e.image_dims});
    bank.entries.push_back(std::move(e));
  }
  if (!bank.empty()) {
    bank.embedding_dim = bank.entries.front().embedding.size();
    bank.feature_dim = static_cast<std::size_t>(bank.entries.front().features->d);
  }
  return bank;
}

struct BankFinding {
  std::string entry_id;
  std::string kind;
  std::string detail;
};

struct BankReport {
  std::vector<BankFinding> findings;
  bool empty = false;  // warning only

  bool ok() const { return findings.empty(); }
  bool mentions(const std::string& id) const {
    for (const auto& f : findings)
      if (f.entry_id == id) return true;
    return false;
  }
};

inline constexpr double kCanonicalTolerance = 1e-9;

/// Re-checks every entry invariant without mutating the bank.
inline BankReport validate_bank(const MemoryBank& bank) {
  BankReport report;
  report.empty = bank.empty();
  std::set<std::string> seen;
  std::set<std::string> refs;
  auto add = [&](const MemoryEntry& e, std::string kind, std::string detail) {
    report.findings.push_back({e.id, std::move(kind), std::move(detail)});
  };

  for (const auto& e : bank.entries) {
    if (e.id.empty()) add(e, "empty-id", "entry id is empty");
    if (!seen.insert(e.id).second) add(e, "duplicate-id", "id appears more than once");

    if (!e.gesture.all_finite()) {
      add(e, "nonfinite-joints", "gesture has non-finite joints");
    } else if (!(e.gesture.max_pairwise_distance() < kMaxHandExtent)) {
      add(e, "hand-extent", "gesture extent exceeds the 0.5 m sanity bound");
    }
    if (e.canonical.chirality != e.gesture.chirality) add(e, "chirality-mismatch", "cached canonical chirality differs");
    try {
      const CanonicalGesture fresh = canonicalize(e.gesture);
      const double diff = detail::max_abs_difference(fresh.joints, e.canonical.joints);
      if (!(diff <= kCanonicalTolerance)) {
        add(e, "canonical-mismatch", "cached canonical differs by " + std::to_string(diff));
      }
    } catch (const Error& ex) {
      add(e, "degenerate-hand", ex.what());
    }

    if (e.embedding.size() != bank.embedding_dim) {
      add(e, "embedding-dim", "embedding length " + std::to_string(e.embedding.size()) + " != " +
                                  std::to_string(bank.embedding_dim));
    }
    bool finite = true;
    for (double x : e.embedding) finite = finite && std::isfinite(x);
    if (!finite || !(detail::vector_norm(e.embedding) > 0.0)) add(e, "embedding-norm", "embedding is zero or non-finite");

    if (e.image_dims.width <= 0 || e.image_dims.height <= 0) {
      add(e, "image-dims", "non-positive image dims");
    } else if (!contains(e.image_dims, e.contact)) {
      add(e, "contact-out-of-bounds", "contact lies outside the source image");
    }

    if (!detail::is_relative_inside(e.feature_ref)) add(e, "feature-ref", "feature_ref is not a relative path");
    if (!refs.insert(e.feature_ref).second) add(e, "feature-ref", "feature_ref shared with another entry");
    if (!e.features) {
      add(e, "missing-features", "no feature map attached");
    } else {
      if (static_cast<std::size_t>(e.features->d) != bank.feature_dim) add(e, "feature-dim", "channel count mismatch");
      if (e.features->image_dims != e.image_dims) add(e, "feature-image-dims", "feature map image dims differ");
      try {
        e.features->validate();
      } catch (const Error& ex) {
        add(e, "feature-invalid", ex.what());
      }
    }
  }
  return report;
}

}  // namespace gatgrasp
