#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrag/contrastive.hpp"
#include "mrag/core.hpp"
#include "mrag/gateway.hpp"
#include "mrag/index.hpp"

namespace mrag {

/// Embeds with a base backend at the head's input width, then applies the
/// projection head. Requested dimensions must equal the head's output width.
class ProjectedEmbedder final : public Embedder {
 public:
  ProjectedEmbedder(const Embedder& base, ProjectionHead head) : base_(base), head_(std::move(head)) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<Payload>& items, EmbedRole role,
                                           const std::optional<std::string>& instruction,
                                           std::size_t dim) const override {
    require(dim == head_.out_dim(), Errc::dimension_mismatch,
            "head produces " + std::to_string(head_.out_dim()) + " dims, asked for " + std::to_string(dim));
    auto base = base_.embed_batch(items, role, instruction, head_.in_dim());
    std::vector<EmbeddingVector> out;
    out.reserve(base.size());
    for (const auto& v : base) out.push_back(head_.project(v.values()));
    return out;
  }

  std::string identity() const override {
    return base_.identity() + "+head:" + hex64(fnv1a64(std::string_view(
                                              reinterpret_cast<const char*>(head_.weights().data()),
                                              head_.weights().size() * sizeof(double))));
  }

  const ProjectionHead& head() const noexcept { return head_; }

 private:
  const Embedder& base_;
  ProjectionHead head_;
};

/// Top-k retrieval for a query payload, best first.
using Retriever = std::function<std::vector<SearchHit>(const Payload& query, std::size_t k)>;

/// Embeds the query with the instruction and runs exact search at `dim`
/// (the full dimension when unset). The index and embedder must outlive the
/// returned closure.
inline Retriever make_dense_retriever(const DenseIndex& index, const Embedder& embedder, std::string instruction,
                                      std::optional<std::size_t> dim = std::nullopt) {
  const std::size_t d = dim.value_or(index.full_dim());
  return [&index, &embedder, instruction = std::move(instruction), d](const Payload& query, std::size_t k) {
    auto vecs = embed(embedder, {query}, EmbedRole::query, instruction, index.ladder());
    return index.search(vecs.front(), k, d);
  };
}

}  // namespace mrag
