#pragma once

// Two-stage hierarchical retrieval over the memory bank: top-K by canonical
// gesture similarity within the query's chirality, then re-ranking of those
// K by image-embedding cosine.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gatgrasp/error.hpp"
#include "gatgrasp/gesture.hpp"
#include "gatgrasp/memory.hpp"

namespace gatgrasp {

inline constexpr int kDefaultTopK = 5;

struct ScoredEntry {
  std::size_t index = 0;  // position in the bank
  std::string id;
  double similarity = 0.0;
};

struct TopK {
  std::vector<ScoredEntry> items;  // descending similarity, ascending id on ties
  bool truncated = false;          // fewer than K same-chirality entries
};

struct RetrievalResult {
  std::size_t index = 0;
  std::string entry_id;
  double gesture_similarity = 0.0;
  double embedding_similarity = 0.0;
  int rank_stage1 = 0;  // 1-based position in the stage-1 list
  bool truncated = false;
};

/// Orders by descending score, then ascending id.
inline bool ranks_before(const ScoredEntry& a, const ScoredEntry& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

inline TopK retrieve_topk_gestures(const HandKeypoints& query, const MemoryBank& bank, int k = kDefaultTopK) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  if (bank.empty()) throw Error(ErrorCode::EmptyBank, "memory bank is empty");
  const CanonicalGesture q = canonicalize(query);

  std::vector<ScoredEntry> scored;
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const auto& e = bank.entries[i];
    if (e.gesture.chirality != query.chirality) continue;
    scored.push_back({i, e.id, gesture_similarity(q, e.canonical)});
  }
  if (scored.empty()) throw Error(ErrorCode::NoChiralityMatch, "no stored gesture with the query's chirality");

  TopK out;
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  out.truncated = scored.size() < static_cast<std::size_t>(k);
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
  scored.resize(keep);
  out.items = std::move(scored);
  return out;
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vector lengths differ");
  if (a == b) {
    if (detail::vector_norm(a) == 0.0) throw Error(ErrorCode::ZeroVector, "zero vector");
    return 1.0;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double na = detail::vector_norm(a);
  const double nb = detail::vector_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "zero vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

/// Stage 2: picks the stage-1 candidate whose stored embedding is most
/// similar to the query embedding; ties go to the lower id.
inline RetrievalResult select_entry(const TopK& candidates, const MemoryBank& bank,
                                    const std::vector<double>& query_embedding) {
  if (candidates.items.empty()) throw Error(ErrorCode::EmptyBank, "no stage-1 candidates");
  if (query_embedding.size() != bank.embedding_dim) {
    throw Error(ErrorCode::DimensionMismatch, "query embedding length " + std::to_string(query_embedding.size()) +
                                                  " != bank dimension " + std::to_string(bank.embedding_dim));
  }
  RetrievalResult best;
  bool have = false;
  for (std::size_t rank = 0; rank < candidates.items.size(); ++rank) {
    const auto& c = candidates.items[rank];
    const auto& entry = bank.entries.at(c.index);
    const double sim = cosine_similarity(query_embedding, entry.embedding);
    if (!have || sim > best.embedding_similarity || (sim == best.embedding_similarity && c.id < best.entry_id)) {
      best = {c.index, c.id, c.similarity, sim, static_cast<int>(rank) + 1, candidates.truncated};
      have = true;
    }
  }
  return best;
}

inline RetrievalResult retrieve(const HandKeypoints& query_gesture, const std::vector<double>& query_embedding,
                                const MemoryBank& bank, int k = kDefaultTopK) {
  return select_entry(retrieve_topk_gestures(query_gesture, bank, k), bank, query_embedding);
}

}  // namespace gatgrasp
