#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrag/contrastive.hpp"
#include "mrag/core.hpp"
#include "mrag/error.hpp"
#include "mrag/gateway.hpp"
#include "mrag/triplet.hpp"

namespace mrag {

/// Document embeddings for every chunk, in chunk order.
inline std::vector<std::pair<std::string, EmbeddingVector>> embed_chunks(const std::vector<Chunk>& chunks,
                                                                        const Embedder& embedder,
                                                                        const DimensionLadder& ladder) {
  require(!chunks.empty(), Errc::empty_input, "no chunks to embed");
  std::vector<Payload> items;
  items.reserve(chunks.size());
  for (const auto& c : chunks) items.push_back(c.elements);
  auto vecs = embed(embedder, items, EmbedRole::document, std::nullopt, ladder);
  std::vector<std::pair<std::string, EmbeddingVector>> rows;
  rows.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) rows.emplace_back(chunks[i].id, std::move(vecs[i]));
  return rows;
}

/// Base features for training: queries are embedded with their instruction,
/// chunks as documents, all at `dim`. Each referenced chunk is embedded once.
inline std::vector<TripletFeatures> triplet_features(const std::vector<ContrastiveTriplet>& triplets,
                                                     const CorpusStore& store, const Embedder& embedder,
                                                     std::size_t dim) {
  require(!triplets.empty(), Errc::empty_input, "no triplets");
  const DimensionLadder ladder{dim};

  std::map<std::string, std::size_t> slot;
  std::vector<Payload> docs;
  auto need = [&](const std::string& id) {
    if (slot.contains(id)) return;
    const Chunk* c = store.find_chunk(id);
    if (!c) fail(Errc::not_found, "triplet refers to unknown chunk " + id);
    slot.emplace(id, docs.size());
    docs.push_back(c->elements);
  };
  for (const auto& t : triplets) {
    t.validate();
    need(t.positive_id);
    for (const auto& n : t.negative_ids) need(n);
  }
  const auto doc_vecs = embed(embedder, docs, EmbedRole::document, std::nullopt, ladder);

  // Queries grouped by instruction so each call carries a single one.
  std::map<std::string, std::vector<std::size_t>> by_instruction;
  for (std::size_t i = 0; i < triplets.size(); ++i) by_instruction[triplets[i].instruction].push_back(i);
  std::vector<std::vector<double>> query_vecs(triplets.size());
  for (const auto& [instruction, members] : by_instruction) {
    std::vector<Payload> qs;
    for (std::size_t i : members) qs.push_back(triplets[i].query);
    auto vecs = embed(embedder, qs, EmbedRole::query, instruction, ladder);
    for (std::size_t j = 0; j < members.size(); ++j) query_vecs[members[j]] = vecs[j].values();
  }

  std::vector<TripletFeatures> out;
  out.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    TripletFeatures f;
    f.query = std::move(query_vecs[i]);
    f.positive = doc_vecs[slot.at(triplets[i].positive_id)].values();
    for (const auto& n : triplets[i].negative_ids) f.negatives.push_back(doc_vecs[slot.at(n)].values());
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace mrag
