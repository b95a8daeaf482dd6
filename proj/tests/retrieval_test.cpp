#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "gatgrasp/retrieval.hpp"
#include "gatgrasp/synth.hpp"
#include "test_support.hpp"

using namespace gatgrasp;

namespace {

constexpr ImageDims kImage{32, 32};

std::shared_ptr<const FeatureMap> shared_features() {
  static const auto f = std::make_shared<const FeatureMap>(synth::random_feature_map(4, 4, 8, 1, kImage));
  return f;
}

// Entries are stored directly so tests control ids, embeddings and gestures
// exactly.
MemoryEntry entry(const std::string& id, const HandKeypoints& hand, std::vector<double> embedding) {
  MemoryEntry e;
  e.id = id;
  e.gesture = hand;
  e.canonical = canonicalize(hand);
  e.embedding = std::move(embedding);
  e.features = shared_features();
  e.image_dims = kImage;
  e.contact = {10, 10};
  return e;
}

MemoryBank bank_of(std::vector<MemoryEntry> entries) {
  MemoryBank b;
  b.entries = std::move(entries);
  b.embedding_dim = b.entries.empty() ? 0 : b.entries.front().embedding.size();
  b.feature_dim = 8;
  return b;
}

HandKeypoints hand(std::uint64_t seed, Chirality c = Chirality::Right) {
  synth::HandOptions opts;
  opts.chirality = c;
  return synth::synth_hand(seed, 0.12, {}, opts);
}

// Independent stage-1 oracle: score every same-chirality entry, sort with a
// full comparison sort, keep K.
std::vector<std::string> oracle_topk(const HandKeypoints& q, const MemoryBank& bank, int k) {
  const auto qc = canonicalize(q).flattened();
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& e : bank.entries) {
    if (e.gesture.chirality != q.chirality) continue;
    const auto ec = e.canonical.flattened();
    double s = qc.dot(ec) / (qc.norm() * ec.norm());
    if (canonicalize(q).joints == e.canonical.joints) s = 1.0;
    scored.emplace_back(std::min(1.0, std::max(-1.0, s)), e.id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i) ids.push_back(scored[static_cast<std::size_t>(i)].second);
  return ids;
}

std::vector<std::string> ids_of(const TopK& t) {
  std::vector<std::string> out;
  for (const auto& s : t.items) out.push_back(s.id);
  return out;
}

}  // namespace

TEST(TopK, ExactCopyRetrievesItselfWithSimilarityOne) {
  std::vector<MemoryEntry> entries;
  for (int i = 0; i < 6; ++i) entries.push_back(entry("e" + std::to_string(i), hand(i), {1.0, 0.0}));
  const auto bank = bank_of(entries);
  const auto top = retrieve_topk_gestures(bank.entries[3].gesture, bank, 1);
  ASSERT_EQ(top.items.size(), 1u);
  EXPECT_EQ(top.items[0].id, "e3");
  EXPECT_EQ(top.items[0].similarity, 1.0);
}

TEST(TopK, TransformedCopyRetrievesItsSource) {
  std::vector<MemoryEntry> entries;
  for (int i = 0; i < 10; ++i) entries.push_back(entry("e" + std::to_string(i), hand(i), {1.0}));
  const auto bank = bank_of(entries);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const auto q = synth::synth_hand(static_cast<std::uint64_t>(i), 0.12, synth::random_similarity(rng));
    const auto top = retrieve_topk_gestures(q, bank, 1);
    EXPECT_EQ(top.items[0].id, "e" + std::to_string(i));
    EXPECT_GE(top.items[0].similarity, 1.0 - 1e-9);
  }
}

TEST(TopK, MatchesBruteForceArgsort) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MemoryEntry> entries;
    const int n = 5 + trial * 3;
    for (int i = 0; i < n; ++i) {
      const auto c = i % 3 == 0 ? Chirality::Left : Chirality::Right;
      entries.push_back(entry("id" + std::to_string((i * 7919) % 1000), hand(static_cast<std::uint64_t>(trial * 100 + i), c), {1.0}));
    }
    // Duplicate gestures under different ids force ties.
    entries.push_back(entry("zz-dup", entries[1].gesture, {1.0}));
    entries.push_back(entry("aa-dup", entries[1].gesture, {1.0}));
    const auto bank = bank_of(entries);
    const auto q = hand(static_cast<std::uint64_t>(trial * 100 + 1), Chirality::Right);
    for (int k : {1, 3, 5, 1000}) EXPECT_EQ(ids_of(retrieve_topk_gestures(q, bank, k)), oracle_topk(q, bank, k));
  }
}

TEST(TopK, EqualScoresOrderByAscendingId) {
  const auto h = hand(3);
  const auto bank = bank_of({entry("b", h, {1.0}), entry("c", h, {1.0}), entry("a", h, {1.0})});
  EXPECT_EQ(ids_of(retrieve_topk_gestures(h, bank, 3)), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TopK, ChiralityIsAHardFilter) {
  const auto bank = bank_of({entry("r1", hand(1), {1.0}), entry("r2", hand(2), {1.0})});
  EXPECT_ERROR_CODE(retrieve_topk_gestures(hand(1, Chirality::Left), bank, 1), ErrorCode::NoChiralityMatch);
}

TEST(TopK, EmptyBankAndBadK) {
  EXPECT_ERROR_CODE(retrieve_topk_gestures(hand(1), MemoryBank{}, 1), ErrorCode::EmptyBank);
  const auto bank = bank_of({entry("a", hand(1), {1.0})});
  EXPECT_ERROR_CODE(retrieve_topk_gestures(hand(1), bank, 0), ErrorCode::InvalidArgument);
}

TEST(TopK, KIsClampedAndFlagged) {
  const auto bank = bank_of({entry("a", hand(1), {1.0}), entry("b", hand(2), {1.0}), entry("c", hand(3, Chirality::Left), {1.0})});
  const auto top = retrieve_topk_gestures(hand(5), bank, 5);
  EXPECT_EQ(top.items.size(), 2u);
  EXPECT_TRUE(top.truncated);
  EXPECT_FALSE(retrieve_topk_gestures(hand(5), bank, 2).truncated);
}

TEST(TopK, BankOrderDoesNotMatter) {
  std::vector<MemoryEntry> entries;
  for (int i = 0; i < 12; ++i) entries.push_back(entry("e" + std::to_string(i), hand(i), {1.0}));
  entries.push_back(entry("e-twin", entries[4].gesture, {1.0}));
  const auto q = hand(4);
  const auto expected = ids_of(retrieve_topk_gestures(q, bank_of(entries), 5));
  std::mt19937_64 rng(8);
  for (int p = 0; p < 10; ++p) {
    std::shuffle(entries.begin(), entries.end(), rng);
    EXPECT_EQ(ids_of(retrieve_topk_gestures(q, bank_of(entries), 5)), expected);
  }
}

TEST(Stage2, HandComputedCosine) {
  const auto bank = bank_of({entry("first", hand(1), {1.0, 0.0}), entry("second", hand(2), {0.0, 1.0})});
  const TopK top{{{0, "first", 0.9}, {1, "second", 0.8}}, false};
  const auto r = select_entry(top, bank, {0.6, 0.8});
  EXPECT_EQ(r.entry_id, "second");
  EXPECT_NEAR(r.embedding_similarity, 0.8, 1e-15);
  EXPECT_EQ(r.rank_stage1, 2);
}

TEST(Stage2, EqualEmbeddingGivesOne) {
  const auto bank = bank_of({entry("a", hand(1), {0.3, -0.2, 0.9}), entry("b", hand(2), {1.0, 0.0, 0.0})});
  const TopK top{{{0, "a", 0.9}, {1, "b", 0.8}}, false};
  const auto r = select_entry(top, bank, {0.3, -0.2, 0.9});
  EXPECT_EQ(r.entry_id, "a");
  EXPECT_EQ(r.embedding_similarity, 1.0);
}

TEST(Stage2, TieGoesToLowerId) {
  const auto bank = bank_of({entry("m", hand(1), {1.0, 0.0}), entry("k", hand(2), {1.0, 0.0})});
  const TopK top{{{0, "m", 0.9}, {1, "k", 0.8}}, false};
  EXPECT_EQ(select_entry(top, bank, {1.0, 1.0}).entry_id, "k");
}

TEST(Stage2, DimensionMismatch) {
  const auto bank = bank_of({entry("a", hand(1), {1.0, 0.0})});
  EXPECT_ERROR_CODE(retrieve(hand(1), {1.0, 0.0, 0.0}, bank, 1), ErrorCode::DimensionMismatch);
}

TEST(Retrieve, SingleEntryWinsRegardlessOfEmbedding) {
  const auto bank = bank_of({entry("only", hand(1), {1.0, 0.0})});
  EXPECT_EQ(retrieve(hand(9), {-1.0, 0.0}, bank, 5).entry_id, "only");
}

TEST(Retrieve, GestureTwinsAreSeparatedByEmbedding) {
  const auto h = hand(6);
  const auto bank = bank_of({entry("a", h, {1.0, 0.0}), entry("b", h, {0.0, 1.0}), entry("c", hand(40), {0.0, 1.0})});
  const auto r = retrieve(h, {0.1, 0.9}, bank, 2);
  EXPECT_EQ(r.entry_id, "b");
  EXPECT_EQ(r.gesture_similarity, 1.0);
}

TEST(Retrieve, StageTwoOnlyChoosesAmongStageOne) {
  // The best embedding belongs to an entry outside the top-K gesture list.
  const auto h = hand(6);
  const auto bank = bank_of({entry("near", h, {1.0, 0.0}), entry("far", hand(50), {0.0, 1.0})});
  EXPECT_EQ(retrieve(h, {0.0, 1.0}, bank, 1).entry_id, "near");
}

TEST(Cosine, ZeroAndMismatch) {
  EXPECT_ERROR_CODE(cosine_similarity({0.0, 0.0}, {1.0, 0.0}), ErrorCode::ZeroVector);
  EXPECT_ERROR_CODE(cosine_similarity({1.0}, {1.0, 0.0}), ErrorCode::DimensionMismatch);
}
