#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/error.hpp"
#include "mrag/parallel.hpp"
#include "mrag/rng.hpp"
#include "mrag/text.hpp"

namespace mrag {

struct ChunkerConfig {
  std::size_t max_text_tokens = 200;
  std::uint64_t seed = 0;
};

/// Greedy segmentation. Text fills the current chunk token by token until the
/// next token would exceed the cap; a text segment is cut at a token boundary
/// (the whitespace before the cut stays with the prefix). Images cost nothing
/// and join whatever chunk is currently being filled.
inline std::vector<Chunk> segment_document(const MixedModalDoc& doc, const ChunkerConfig& cfg) {
  require(!doc.elements.empty(), Errc::invalid_input, "document " + doc.id + " has no elements");
  require(cfg.max_text_tokens >= 1, Errc::invalid_input, "max_text_tokens must be >= 1");

  std::vector<Chunk> chunks;
  Payload current;
  std::size_t count = 0;
  bool continued = false;

  auto flush = [&] {
    chunks.push_back(make_chunk(doc.id, chunks.size(), std::move(current), continued));
    current.clear();
    count = 0;
    continued = false;
  };

  for (const auto& element : doc.elements) {
    if (is_image(element)) {
      current.push_back(element);
      continue;
    }
    const std::string& text = std::get<TextSegment>(element).text;
    const auto spans = token_spans(text);
    std::size_t next_token = 0;
    std::size_t byte_pos = 0;
    while (next_token < spans.size()) {
      if (count == cfg.max_text_tokens) {
        const bool mid_segment = byte_pos > 0;
        flush();
        continued = mid_segment;
      }
      const std::size_t take = std::min(cfg.max_text_tokens - count, spans.size() - next_token);
      const std::size_t end = next_token + take == spans.size() ? text.size() : spans[next_token + take].begin;
      current.push_back(TextSegment{text.substr(byte_pos, end - byte_pos)});
      count += take;
      next_token += take;
      byte_pos = end;
    }
  }
  if (!current.empty()) flush();
  return chunks;
}

/// Segments every document, in parallel, keeping document order.
inline std::vector<Chunk> segment_corpus(const std::vector<MixedModalDoc>& docs, const ChunkerConfig& cfg,
                                         std::size_t jobs = 1) {
  std::vector<std::vector<Chunk>> per_doc(docs.size());
  parallel_for(docs.size(), jobs, [&](std::size_t i) { per_doc[i] = segment_document(docs[i], cfg); });
  std::vector<Chunk> out;
  for (auto& v : per_doc) {
    for (auto& c : v) out.push_back(std::move(c));
  }
  return out;
}

/// Allots n across strata in proportion to their sizes: floor of each exact
/// quota, then the leftover units go to the largest remainders (ties to the
/// earlier stratum). Returned allotments align with `sizes` and sum to n.
inline std::vector<std::size_t> largest_remainder_allotment(const std::vector<std::size_t>& sizes, std::size_t n) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  require(total > 0, Errc::invalid_input, "empty population");
  require(n <= total, Errc::invalid_input, "sample size exceeds population");

  std::vector<std::size_t> allot(sizes.size());
  std::vector<std::size_t> remainder(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto quota = static_cast<unsigned __int128>(n) * sizes[i];
    allot[i] = static_cast<std::size_t>(quota / total);
    remainder[i] = static_cast<std::size_t>(quota % total);
    assigned += allot[i];
  }
  std::vector<std::size_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++allot[order[k]];
  return allot;
}

/// Modality-stratified sample without replacement. Strata are visited in
/// ModalityProfile order and each draws its allotment by a partial
/// Fisher-Yates shuffle from one seeded stream. Output keeps input order.
inline std::vector<Chunk> stratified_sample(const std::vector<Chunk>& chunks, std::size_t n, std::uint64_t seed) {
  require(!chunks.empty(), Errc::invalid_input, "empty population");
  require(n >= 1, Errc::invalid_input, "sample size must be positive");
  require(n <= chunks.size(), Errc::invalid_input,
          "sample size " + std::to_string(n) + " exceeds population " + std::to_string(chunks.size()));

  std::map<ModalityProfile, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < chunks.size(); ++i) strata[modality_profile(chunks[i])].push_back(i);

  std::vector<std::size_t> sizes;
  for (const auto& [profile, members] : strata) sizes.push_back(members.size());
  const auto allot = largest_remainder_allotment(sizes, n);

  Rng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::size_t s = 0;
  for (auto& [profile, members] : strata) {
    const std::size_t want = allot[s++];
    for (std::size_t j = 0; j < want; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(rng.below(members.size() - j));
      std::swap(members[j], members[r]);
      picked.push_back(members[j]);
    }
  }
  std::sort(picked.begin(), picked.end());
  std::vector<Chunk> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(chunks[i]);
  return out;
}

}  // namespace mrag
