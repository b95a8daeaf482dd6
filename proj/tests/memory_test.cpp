#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include "gatgrasp/memory.hpp"
#include "gatgrasp/synth.hpp"
#include "gatgrasp/tensor_io.hpp"
#include "test_support.hpp"

using namespace gatgrasp;
using gatgrasp::testing::TempDir;

namespace {

constexpr ImageDims kImage{64, 48};

HandKeypoints meter_hand(std::uint64_t seed, Chirality chirality = Chirality::Right) {
  std::mt19937_64 rng(seed);
  synth::Similarity s;
  s.R = synth::random_rotation(rng);
  s.scale = 0.09;
  s.t = synth::uniform_vec(rng, -0.3, 0.3) + Vec3(0, 0, 0.8);
  synth::HandOptions opts;
  opts.chirality = chirality;
  return synth::synth_hand(seed, 0.1, s, opts);
}

MemoryRecord make_record(const std::string& id, std::uint64_t seed, std::size_t emb_dim = 8, int feat_dim = 8) {
  std::mt19937_64 rng(seed);
  MemoryRecord r;
  r.id = id;
  r.gesture = meter_hand(seed);
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < emb_dim; ++i) r.embedding.push_back(n(rng));
  r.features = std::make_shared<FeatureMap>(synth::random_feature_map(6, 8, feat_dim, seed, kImage));
  r.image_dims = kImage;
  r.contact = {synth::uniform(rng, 0.0, 63.0), synth::uniform(rng, 0.0, 47.0)};
  r.image_ref = "images/" + id + ".png";
  if (seed % 2) r.category = "mug";
  return r;
}

MemoryBank make_bank(int n) {
  MemoryBank bank;
  for (int i = 0; i < n; ++i) bank = ingest_entry(std::move(bank), make_record("e" + std::to_string(i), 100 + i));
  return bank;
}

void expect_bit_equal(const MemoryBank& a, const MemoryBank& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.embedding_dim, b.embedding_dim);
  EXPECT_EQ(a.feature_dim, b.feature_dim);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    EXPECT_EQ(x.id, y.id);
    EXPECT_EQ(x.gesture.chirality, y.gesture.chirality);
    EXPECT_EQ(0, std::memcmp(x.gesture.joints.data(), y.gesture.joints.data(), sizeof(x.gesture.joints)));
    EXPECT_EQ(0, std::memcmp(x.canonical.joints.data(), y.canonical.joints.data(), sizeof(x.canonical.joints)));
    EXPECT_EQ(x.embedding, y.embedding);
    EXPECT_EQ(x.contact, y.contact);
    EXPECT_EQ(x.image_dims, y.image_dims);
    EXPECT_EQ(x.category, y.category);
    EXPECT_EQ(x.feature_ref, y.feature_ref);
    EXPECT_EQ(x.image_ref, y.image_ref);
    EXPECT_EQ(x.features->h, y.features->h);
    EXPECT_EQ(x.features->w, y.features->w);
    EXPECT_EQ(x.features->d, y.features->d);
    EXPECT_EQ(0, std::memcmp(x.features->data.data(), y.features->data.data(), x.features->data.size() * sizeof(float)));
  }
}

}  // namespace

TEST(Ingest, FirstRecordSetsDimensions) {
  const auto bank = ingest_entry({}, make_record("a", 1, 12, 16));
  EXPECT_EQ(bank.size(), 1u);
  EXPECT_EQ(bank.embedding_dim, 12u);
  EXPECT_EQ(bank.feature_dim, 16u);
  EXPECT_TRUE(bank.entries[0].canonical.satisfies_frame_invariants());
  EXPECT_EQ(bank.entries[0].feature_ref, "features/0.ggt");
}

TEST(Ingest, InputBankIsUntouchedOnError) {
  const auto bank = make_bank(2);
  EXPECT_ERROR_CODE(ingest_entry(bank, make_record("x", 5, 9)), ErrorCode::DimensionMismatch);
  EXPECT_ERROR_CODE(ingest_entry(bank, make_record("x", 5, 8, 12)), ErrorCode::DimensionMismatch);
  EXPECT_ERROR_CODE(ingest_entry(bank, make_record("e1", 5)), ErrorCode::DuplicateId);
  EXPECT_EQ(bank.size(), 2u);
}

TEST(Ingest, ContactOutsideImageIsInvalid) {
  auto r = make_record("a", 1);
  r.contact = {64.0, 10.0};
  EXPECT_ERROR_CODE(ingest_entry({}, r), ErrorCode::InvalidEntry);
}

TEST(Ingest, OtherInvalidRecords) {
  auto empty_id = make_record("", 1);
  EXPECT_ERROR_CODE(ingest_entry({}, empty_id), ErrorCode::InvalidEntry);
  auto zero = make_record("a", 1);
  std::fill(zero.embedding.begin(), zero.embedding.end(), 0.0);
  EXPECT_ERROR_CODE(ingest_entry({}, zero), ErrorCode::InvalidEntry);
  auto escaping = make_record("a", 1);
  escaping.feature_ref = "../outside.ggt";
  EXPECT_ERROR_CODE(ingest_entry({}, escaping), ErrorCode::InvalidEntry);
  auto degenerate = make_record("a", 1);
  degenerate.gesture.joints[landmark::kIndexMcp] = degenerate.gesture.joints[landmark::kWrist];
  EXPECT_ERROR_CODE(ingest_entry({}, degenerate), ErrorCode::DegenerateHand);
}

TEST(Tensor, EncodingLayout) {
  const Tensor t{{2, 1}, {1.0f, -2.5f}};
  const std::string bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 4u + 4u + 8u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "GGT1");
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 1);
  float f;
  std::memcpy(&f, bytes.data() + 20, 4);
  EXPECT_EQ(f, -2.5f);
  const Tensor back = decode_tensor(bytes);
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_EQ(back.data, t.data);
}

TEST(Tensor, Errors) {
  std::string bytes = encode_tensor({{3}, {1, 2, 3}});
  bytes[0] = 'X';
  EXPECT_ERROR_CODE(decode_tensor(bytes), ErrorCode::MagicMismatch);
  EXPECT_ERROR_CODE(decode_tensor(encode_tensor({{3}, {1, 2, 3}}).substr(0, 15)), ErrorCode::ParseError);
}

TEST(Persistence, RoundTripIsBitExact) {
  TempDir dir;
  const auto bank = make_bank(3);
  save_bank(bank, dir.path());
  expect_bit_equal(bank, load_bank(dir.path()));
}

TEST(Persistence, SavingTwiceProducesIdenticalFiles) {
  TempDir a, b;
  const auto bank = make_bank(3);
  save_bank(bank, a.path());
  save_bank(load_bank(a.path()), b.path());
  EXPECT_EQ(read_file_bytes(a / kManifestName, ErrorCode::IoError), read_file_bytes(b / kManifestName, ErrorCode::IoError));
  EXPECT_EQ(read_file_bytes(a / "features/2.ggt", ErrorCode::IoError),
            read_file_bytes(b / "features/2.ggt", ErrorCode::IoError));
}

TEST(Persistence, MissingTensorFile) {
  TempDir dir;
  save_bank(make_bank(2), dir.path());
  std::filesystem::remove(dir / "features/1.ggt");
  EXPECT_ERROR_CODE(load_bank(dir.path()), ErrorCode::MissingTensorFile);
}

TEST(Persistence, WrongMagic) {
  TempDir dir;
  save_bank(make_bank(2), dir.path());
  std::string bytes = read_file_bytes(dir / "features/0.ggt", ErrorCode::IoError);
  bytes.replace(0, 4, "NOPE");
  write_file_bytes(dir / "features/0.ggt", bytes);
  EXPECT_ERROR_CODE(load_bank(dir.path()), ErrorCode::MagicMismatch);
}

TEST(Persistence, CorruptManifest) {
  TempDir dir;
  EXPECT_ERROR_CODE(load_bank(dir.path()), ErrorCode::CorruptManifest);
  write_file_bytes(dir / kManifestName, "{\"id\": \"x\"\n");
  EXPECT_ERROR_CODE(load_bank(dir.path()), ErrorCode::CorruptManifest);
}

TEST(Validate, FreshBankIsClean) {
  const auto report = validate_bank(make_bank(4));
  EXPECT_TRUE(report.ok());
  EXPECT_FALSE(report.empty);
}

TEST(Validate, EmptyBankWarnsOnly) {
  const auto report = validate_bank({});
  EXPECT_TRUE(report.ok());
  EXPECT_TRUE(report.empty);
}

TEST(Validate, EditedCanonicalIsReported) {
  auto bank = make_bank(3);
  bank.entries[1].canonical.joints[12].y() += 1e-6;
  const auto report = validate_bank(bank);
  ASSERT_EQ(report.findings.size(), 1u);
  EXPECT_EQ(report.findings[0].entry_id, "e1");
  EXPECT_EQ(report.findings[0].kind, "canonical-mismatch");
}

TEST(Validate, EditedCanonicalOnDiskIsReported) {
  TempDir dir;
  save_bank(make_bank(2), dir.path());
  std::string manifest = read_file_bytes(dir / kManifestName, ErrorCode::IoError);
  const auto first_line_end = manifest.find('\n');
  auto j = nlohmann::json::parse(manifest.substr(0, first_line_end));
  j["canonical"][4][0] = j["canonical"][4][0].get<double>() + 0.01;
  manifest = j.dump() + manifest.substr(first_line_end);
  write_file_bytes(dir / kManifestName, manifest);
  const auto report = validate_bank(load_bank(dir.path()));
  EXPECT_TRUE(report.mentions("e0"));
  EXPECT_FALSE(report.mentions("e1"));
}

// Each mutation breaks exactly one invariant of one entry; the validator must
// name that entry.
TEST(Validate, MutationHarness) {
  using Mutation = std::function<void(MemoryEntry&, MemoryBank&)>;
  const std::vector<std::pair<std::string, Mutation>> mutations = {
      {"empty-id", [](MemoryEntry& e, MemoryBank&) { e.id.clear(); }},
      {"nonfinite-joints", [](MemoryEntry& e, MemoryBank&) { e.gesture.joints[3].x() = std::nan(""); }},
      {"hand-extent", [](MemoryEntry& e, MemoryBank&) { e.gesture.joints[20] += Vec3(0.6, 0, 0); }},
      {"chirality-mismatch", [](MemoryEntry& e, MemoryBank&) { e.canonical.chirality = Chirality::Left; }},
      {"embedding-dim", [](MemoryEntry& e, MemoryBank&) { e.embedding.push_back(1.0); }},
      {"embedding-norm", [](MemoryEntry& e, MemoryBank&) { std::fill(e.embedding.begin(), e.embedding.end(), 0.0); }},
      {"contact-out-of-bounds", [](MemoryEntry& e, MemoryBank&) { e.contact = {-3.0, 2.0}; }},
      {"image-dims", [](MemoryEntry& e, MemoryBank&) { e.image_dims = {0, 48}; }},
      {"feature-ref", [](MemoryEntry& e, MemoryBank&) { e.feature_ref = "/abs/path.ggt"; }},
      {"missing-features", [](MemoryEntry& e, MemoryBank&) { e.features.reset(); }},
      {"feature-dim",
       [](MemoryEntry& e, MemoryBank&) {
         e.features = std::make_shared<FeatureMap>(synth::random_feature_map(6, 8, 4, 1, kImage));
       }},
      {"feature-invalid",
       [](MemoryEntry& e, MemoryBank&) {
         auto f = *e.features;
         std::fill(f.data.begin(), f.data.end(), 0.0f);
         e.features = std::make_shared<FeatureMap>(f);
       }},
  };
  for (const auto& [kind, mutate] : mutations) {
    auto bank = make_bank(3);
    auto& target = bank.entries[1];
    const std::string id = target.id;
    mutate(target, bank);
    const auto report = validate_bank(bank);
    bool found = false;
    for (const auto& f : report.findings) found = found || (f.kind == kind && (f.entry_id == id || id.empty() || f.entry_id.empty()));
    EXPECT_TRUE(found) << kind;
    EXPECT_FALSE(report.mentions("e0")) << kind;
    EXPECT_FALSE(report.mentions("e2")) << kind;
  }
}

TEST(Validate, DuplicateIdsInABankAssembledByHand) {
  auto bank = make_bank(2);
  bank.entries[1].id = "e0";
  bool dup = false;
  for (const auto& f : validate_bank(bank).findings) dup = dup || f.kind == "duplicate-id";
  EXPECT_TRUE(dup);
}
