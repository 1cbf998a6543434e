#pragma once

// Synthetic fixtures shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "mrag/contrastive.hpp"
#include "mrag/core.hpp"
#include "mrag/datagen.hpp"
#include "mrag/gateway.hpp"
#include "mrag/index.hpp"
#include "mrag/retriever.hpp"
#include "mrag/rng.hpp"

namespace mrag::test {

// ---------------------------------------------------------------------------
// Feedback windows: four retrieved documents d1..d4, each carrying a marker
// sentence, and an open QA item whose answer is "Paris".

struct WindowFixture {
  std::vector<Chunk> chunks;
  CorpusStore store;
  std::vector<SearchHit> hits;
  QAItem item;

  Retriever retriever() const {
    return [hits = hits](const Payload&, std::size_t k) {
      return std::vector<SearchHit>(hits.begin(), hits.begin() + std::min(k, hits.size()));
    };
  }
};

inline std::string window_marker(std::size_t i) { return "marker sentence for d" + std::to_string(i); }

inline WindowFixture window_fixture(std::size_t n_docs = 4) {
  WindowFixture f;
  for (std::size_t i = 1; i <= n_docs; ++i) {
    f.chunks.push_back(make_chunk("d" + std::to_string(i), 0, {TextSegment{window_marker(i) + "."}}));
  }
  f.store = chunk_store(f.chunks);
  for (std::size_t i = 0; i < n_docs; ++i) f.hits.push_back({f.chunks[i].id, 1.0 - 0.1 * i, i + 1});
  f.item.qid = "q1";
  f.item.question_elements = {TextSegment{"Which city hosts the archive?"}};
  f.item.gold_doc_id = f.chunks[1].id;
  f.item.answer = "Paris";
  return f;
}

/// Answers "Paris" only when every listed document is in the prompt.
inline ScriptedGenerator correct_when_shown(const std::vector<std::vector<std::size_t>>& doc_sets) {
  ScriptedGenerator gen("London");
  for (const auto& set : doc_sets) {
    std::vector<std::string> needles;
    for (std::size_t d : set) needles.push_back(window_marker(d));
    gen.add_rule(needles, "Paris");
  }
  return gen;
}

// ---------------------------------------------------------------------------
// Three-cluster base features for the projection head. Each item has a
// latent position in the first kSignal coordinates; the remaining
// coordinates are per-view nuisance noise the head has to learn to ignore.

struct ClusterData {
  static constexpr std::size_t kInDim = 32;
  static constexpr std::size_t kSignal = 8;
  double item_spread = 1.0;
  double view_noise = 0.15;
  double nuisance = 1.0;

  std::vector<std::vector<double>> centers;

  explicit ClusterData(Rng& rng) {
    centers.assign(3, std::vector<double>(kInDim, 0.0));
    for (auto& c : centers) {
      for (std::size_t d = 0; d < kSignal; ++d) c[d] = 2.0 * rng.normal();
    }
  }

  std::vector<std::vector<double>> items(Rng& rng, std::size_t n) const {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < n; ++i) {
      auto v = centers[i % 3];
      for (std::size_t d = 0; d < kSignal; ++d) v[d] += item_spread * rng.normal();
      out.push_back(std::move(v));
    }
    return out;
  }

  std::vector<double> view(Rng& rng, const std::vector<double>& item) const {
    auto v = item;
    for (std::size_t d = 0; d < kSignal; ++d) v[d] += view_noise * rng.normal();
    for (std::size_t d = kSignal; d < kInDim; ++d) v[d] = nuisance * rng.normal();
    return v;
  }

  /// Query and positive are two views of one item; negatives are views of
  /// same-cluster neighbours.
  std::vector<TripletFeatures> triplets(Rng& rng, const std::vector<std::vector<double>>& items,
                                        std::size_t negatives = 5) const {
    std::vector<TripletFeatures> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      TripletFeatures t{view(rng, items[i]), view(rng, items[i]), {}};
      for (std::size_t n = 1; n <= negatives; ++n) t.negatives.push_back(view(rng, items[(i + 3 * n) % items.size()]));
      out.push_back(std::move(t));
    }
    return out;
  }
};

/// Recall@1 of a head at a prefix: every item contributes one document view
/// and one query view; a hit is the query ranking its own document first.
inline double head_recall_at_1(const ProjectionHead& head, const ClusterData& data,
                               const std::vector<std::vector<double>>& items, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EmbeddingVector> docs;
  for (const auto& it : items) docs.push_back(head.project(data.view(rng, it)));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto q = head.project(data.view(rng, items[i]));
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t j = 0; j < docs.size(); ++j) {
      const double s = prefix_cosine(q.values(), docs[j].values(), dim);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    hits += best == i;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

// ---------------------------------------------------------------------------
// Clustered embeddings for coarse-to-fine recall. Per-coordinate scale
// (1 + i)^-decay puts slightly more variance in leading coordinates, the
// shape a Matryoshka-trained embedder produces; decay 0 is isotropic.

class ClusteredCorpus {
 public:
  ClusteredCorpus(std::uint64_t seed, std::size_t clusters, std::size_t dim, double decay, double noise)
      : rng_(seed), dim_(dim), noise_(noise), scale_(dim), centers_(clusters, std::vector<double>(dim)) {
    for (std::size_t i = 0; i < dim; ++i) scale_[i] = std::pow(1.0 + static_cast<double>(i), -decay);
    for (auto& c : centers_) {
      for (std::size_t i = 0; i < dim; ++i) c[i] = rng_.normal() * scale_[i];
    }
  }

  EmbeddingVector draw() {
    const auto& c = centers_[rng_.below(centers_.size())];
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = c[i] + noise_ * rng_.normal() * scale_[i];
    return EmbeddingVector(std::move(v));
  }

  std::vector<std::pair<std::string, EmbeddingVector>> rows(std::size_t n) {
    std::vector<std::pair<std::string, EmbeddingVector>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "c%05zu", i);
      out.emplace_back(id, draw());
    }
    return out;
  }

 private:
  Rng rng_;
  std::size_t dim_;
  double noise_;
  std::vector<double> scale_;
  std::vector<std::vector<double>> centers_;
};

/// Mean fraction of the exact top-k recovered by coarse-to-fine search.
inline double coarse_recall(const DenseIndex& index, ClusteredCorpus& queries, std::size_t n_queries, std::size_t k,
                            std::size_t coarse_dim, std::size_t m) {
  double found = 0.0;
  for (std::size_t q = 0; q < n_queries; ++q) {
    const auto v = queries.draw();
    const auto exact = index.search(v, k, index.full_dim());
    const auto approx = index.coarse_to_fine(v, k, coarse_dim, m);
    for (const auto& a : approx) {
      for (const auto& e : exact) found += a.chunk_id == e.chunk_id;
    }
  }
  return found / static_cast<double>(k * n_queries);
}

}  // namespace mrag::test
