#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/error.hpp"
#include "mrag/gateway.hpp"
#include "mrag/hash.hpp"
#include "mrag/parallel.hpp"
#include "mrag/prompts.hpp"
#include "mrag/retriever.hpp"
#include "mrag/rng.hpp"
#include "mrag/text.hpp"
#include "mrag/triplet.hpp"

namespace mrag {

struct RawQAPair {
  std::string chunk_id;
  std::string question;
  std::string answer;
  friend bool operator==(const RawQAPair&, const RawQAPair&) = default;
};

/// A QA record. Multiple-choice items carry four options and a gold index;
/// open-domain items carry `answer` and no options.
struct QAItem {
  std::string qid;
  Payload question_elements;
  std::vector<std::string> options;
  std::size_t gold_index = 0;
  std::string gold_doc_id;
  std::optional<std::string> answer;

  bool is_multiple_choice() const noexcept { return !options.empty(); }
  std::string gold_answer() const { return is_multiple_choice() ? options.at(gold_index) : answer.value_or(""); }

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

struct MinedTriplet {
  std::string qid;
  std::string positive_id;
  std::vector<std::string> negative_ids;
  friend bool operator==(const MinedTriplet&, const MinedTriplet&) = default;
};

inline Json qa_to_json(const QAItem& item) {
  Json j;
  j["qid"] = item.qid;
  j["question_elements"] = payload_to_json(item.question_elements);
  if (item.is_multiple_choice()) {
    j["options"] = item.options;
    j["gold_index"] = item.gold_index;
  }
  if (item.answer) j["answer"] = *item.answer;
  if (!item.gold_doc_id.empty()) j["gold_doc"] = item.gold_doc_id;
  return j;
}

inline QAItem qa_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "record must be an object");
  QAItem item;
  item.qid = json_string(j, "qid");
  item.question_elements = payload_from_json(json_field(j, "question_elements"));
  if (item.question_elements.empty()) fail(Errc::parse_error, "question has no elements");
  if (auto it = j.find("options"); it != j.end()) {
    item.options = it->get<std::vector<std::string>>();
    if (item.options.size() != 4) fail(Errc::parse_error, "multiple-choice items need exactly 4 options");
    item.gold_index = json_uint(j, "gold_index");
    if (item.gold_index >= 4) fail(Errc::parse_error, "gold_index out of range");
  }
  item.answer = json_opt_string(j, "answer");
  if (!item.is_multiple_choice() && !item.answer) fail(Errc::parse_error, "item has neither options nor answer");
  item.gold_doc_id = json_opt_string(j, "gold_doc").value_or("");
  return item;
}

inline std::vector<QAItem> read_qa(const std::string& path) { return read_jsonl(path, qa_from_json).records; }

// ---------------------------------------------------------------------------
// Output parsing

namespace detail {

inline bool is_ws(char c) noexcept { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

/// Matches `<letter><digits><ws>*:` at pos; returns the position after ':'.
inline std::optional<std::size_t> match_label(std::string_view s, std::size_t pos, char letter) {
  if (pos >= s.size() || (s[pos] != letter && s[pos] != letter + ('a' - 'A'))) return std::nullopt;
  std::size_t i = pos + 1;
  const std::size_t digits = i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == digits) return std::nullopt;
  while (i < s.size() && is_ws(s[i])) ++i;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  return i + 1;
}

/// Start positions and label ends of every `[ <letter>n :` opener.
inline std::vector<std::pair<std::size_t, std::size_t>> find_openers(std::string_view s, char letter) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < s.size() && is_ws(s[j])) ++j;
    if (auto end = match_label(s, j, letter)) out.emplace_back(i, *end);
  }
  return out;
}

/// Text of an opener's body: up to the last ']' before the next opener.
inline std::string_view opener_body(std::string_view s, const std::vector<std::pair<std::size_t, std::size_t>>& openers,
                                    std::size_t k) {
  const std::size_t begin = openers[k].second;
  const std::size_t limit = k + 1 < openers.size() ? openers[k + 1].first : s.size();
  std::string_view body = s.substr(begin, limit - begin);
  if (auto close = body.rfind(']'); close != std::string_view::npos) body = body.substr(0, close);
  return body;
}

}  // namespace detail

/// Parses "[Q1: ... ,A1: ... ], [Q2: ... ,A2: ... ]". Whitespace around the
/// labels is free and the comma before "An:" is optional. Pairs with an empty
/// side are dropped; nothing is invented.
inline std::vector<std::pair<std::string, std::string>> parse_qa_pairs(std::string_view text, std::size_t max_pairs) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto openers = detail::find_openers(text, 'Q');
  for (std::size_t k = 0; k < openers.size() && out.size() < max_pairs; ++k) {
    const std::string_view body = detail::opener_body(text, openers, k);
    std::optional<std::size_t> split;
    std::size_t answer_begin = 0;
    for (std::size_t i = 0; i < body.size() && !split; ++i) {
      if (i > 0 && (body[i - 1] == ',' || detail::is_ws(body[i - 1]))) {
        if (auto end = detail::match_label(body, i, 'A')) {
          split = i;
          answer_begin = *end;
        }
      }
    }
    if (!split) continue;
    std::string_view q = trim(body.substr(0, *split));
    while (!q.empty() && q.back() == ',') q = trim(q.substr(0, q.size() - 1));
    const std::string_view a = trim(body.substr(answer_begin));
    if (q.empty() || a.empty()) continue;
    out.emplace_back(std::string(q), std::string(a));
  }
  return out;
}

/// Parses "[D1: ... ], [D2: ... ], [D3: ... ]" into trimmed, non-empty texts.
inline std::vector<std::string> parse_distractors(std::string_view text) {
  std::vector<std::string> out;
  const auto openers = detail::find_openers(text, 'D');
  for (std::size_t k = 0; k < openers.size(); ++k) {
    std::string_view body = trim(detail::opener_body(text, openers, k));
    while (!body.empty() && body.back() == ',') body = trim(body.substr(0, body.size() - 1));
    if (!body.empty()) out.emplace_back(body);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Image tags

struct ImageTag {
  std::size_t begin;
  std::size_t end;
  std::size_t index;  // 1-based as written
};

/// Finds "<image k>" / "<imagek>" tags (case-insensitive, spaces allowed).
inline std::vector<ImageTag> find_image_tags(std::string_view s) {
  std::vector<ImageTag> out;
  const std::string lower = ascii_lower(s);
  for (std::size_t pos = lower.find('<'); pos != std::string::npos; pos = lower.find('<', pos + 1)) {
    std::size_t i = pos + 1;
    while (i < lower.size() && lower[i] == ' ') ++i;
    if (lower.compare(i, 5, "image") != 0) continue;
    i += 5;
    while (i < lower.size() && lower[i] == ' ') ++i;
    const std::size_t digits = i;
    std::size_t k = 0;
    while (i < lower.size() && lower[i] >= '0' && lower[i] <= '9' && i - digits < 9) k = k * 10 + (lower[i++] - '0');
    if (i == digits) continue;
    while (i < lower.size() && lower[i] == ' ') ++i;
    if (i >= lower.size() || lower[i] != '>') continue;
    out.push_back({pos, i + 1, k});
  }
  return out;
}

/// Keep iff every tagged image index is between 1 and the chunk's image count.
inline bool check_image_tags(const RawQAPair& pair, const Chunk& chunk) {
  const std::size_t images = image_count(chunk.elements);
  for (const auto& tag : find_image_tags(pair.question)) {
    if (tag.index < 1 || tag.index > images) return false;
  }
  return true;
}

/// Replaces each image tag with the chunk's matching ImageRef. Whitespace-only
/// text between tags is dropped.
inline Payload resolve_question(std::string_view question, const Chunk& chunk) {
  std::vector<const ImageRef*> images;
  for (const auto& e : chunk.elements) {
    if (const auto* img = std::get_if<ImageRef>(&e)) images.push_back(img);
  }
  Payload out;
  auto push_text = [&](std::string_view t) {
    if (!trim(t).empty()) out.push_back(TextSegment{std::string(t)});
  };
  std::size_t cursor = 0;
  for (const auto& tag : find_image_tags(question)) {
    require(tag.index >= 1 && tag.index <= images.size(), Errc::invalid_input,
            "image tag <image " + std::to_string(tag.index) + "> has no image in " + chunk.id);
    push_text(question.substr(cursor, tag.begin - cursor));
    out.push_back(*images[tag.index - 1]);
    cursor = tag.end;
  }
  push_text(question.substr(cursor));
  return out;
}

// ---------------------------------------------------------------------------
// Stages

inline std::vector<std::string> default_context_blocklist() {
  return {"this document", "in the document", "this passage",   "this text",
          "the above",     "mentioned above", "in this context"};
}

/// Keep unless the lower-cased question contains a blocklisted phrase.
/// Only literal phrase matches count; empty questions are rejected.
inline bool filter_contextual(const RawQAPair& pair,
                              const std::vector<std::string>& blocklist = default_context_blocklist()) {
  if (trim(pair.question).empty()) return false;
  const std::string q = ascii_lower(pair.question);
  for (const auto& phrase : blocklist) {
    if (q.find(ascii_lower(phrase)) != std::string::npos) return false;
  }
  return true;
}

/// QA generation request: the modality-specific instruction block followed
/// by the chunk itself, images in place.
inline Payload render_qa_prompt(const Chunk& chunk, const PromptSet& prompts) {
  const bool multimodal = image_count(chunk.elements) > 0;
  Payload p;
  p.push_back(TextSegment{(multimodal ? prompts.qa_multimodal : prompts.qa_text) +
                          (multimodal ? "\nDocument:" : "\nText:")});
  p.insert(p.end(), chunk.elements.begin(), chunk.elements.end());
  return p;
}

struct RawQAResult {
  std::vector<RawQAPair> pairs;
  bool parse_failure = false;
};

inline RawQAResult generate_raw_qa(const Chunk& chunk, const Generator& gen, const PromptSet& prompts = {},
                                   std::size_t max_pairs = 5, const GenerationParams& params = {}) {
  const auto reply = generate(gen, render_qa_prompt(chunk, prompts), params);
  if (reply.finish_reason == FinishReason::error) fail(Errc::backend_error, gen.identity() + " reported an error");
  RawQAResult out;
  for (auto& [q, a] : parse_qa_pairs(reply.text, max_pairs)) out.pairs.push_back({chunk.id, std::move(q), std::move(a)});
  out.parse_failure = out.pairs.empty();
  return out;
}

struct RefineResult {
  RawQAPair pair;
  bool fell_back = false;
  std::string reason;
};

/// Asks the generator for a compressed rewrite. Any failure (backend error,
/// unparseable reply, empty side) returns the input pair unchanged.
inline RefineResult refine_qa(const RawQAPair& pair, const Generator& gen, const PromptSet& prompts = {},
                              const GenerationParams& params = {}) {
  const std::string prompt = fill_slot(fill_slot(prompts.refine, "question", pair.question), "answer", pair.answer);
  try {
    const auto reply = generate(gen, Payload{TextSegment{prompt}}, params);
    if (reply.finish_reason == FinishReason::error) return {pair, true, "generator-error"};
    auto parsed = parse_qa_pairs(reply.text, 1);
    if (parsed.empty()) return {pair, true, "unparseable"};
    auto& [q, a] = parsed.front();
    if (trim(a).empty() || trim(q).empty()) return {pair, true, "empty"};
    return {{pair.chunk_id, std::move(q), std::move(a)}, false, {}};
  } catch (const Error& e) {
    return {pair, true, std::string("generator-error: ") + e.what()};
  }
}

inline std::string option_key(std::string_view s) { return ascii_lower(trim(s)); }

inline std::uint64_t item_seed(std::string_view qid, std::uint64_t global_seed) noexcept {
  return Fnv1a64{}.update(qid).update_byte(0).update_u64le(global_seed).digest();
}

/// Collects three distractors distinct from the gold answer and each other
/// (trimmed, case-folded), re-prompting at most twice, then shuffles the four
/// options with the per-item seed. Returns nullopt when distractors run short.
inline std::optional<QAItem> generate_options(const RawQAPair& pair, const Chunk& gold_chunk, std::string qid,
                                              const Generator& gen, std::uint64_t global_seed,
                                              const PromptSet& prompts = {}) {
  const std::string prompt = fill_slot(fill_slot(prompts.options, "question", pair.question), "answer", pair.answer);
  const std::uint64_t seed = item_seed(qid, global_seed);
  std::vector<std::string> distractors;
  std::vector<std::string> seen{option_key(pair.answer)};
  constexpr std::size_t kAttempts = 3;
  for (std::size_t attempt = 0; attempt < kAttempts && distractors.size() < 3; ++attempt) {
    GenerationParams params;
    params.seed = seed + attempt;
    GeneratorReply reply;
    try {
      reply = generate(gen, Payload{TextSegment{prompt}}, params);
    } catch (const Error&) {
      continue;
    }
    if (reply.finish_reason == FinishReason::error) continue;
    for (auto& d : parse_distractors(reply.text)) {
      const std::string key = option_key(d);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);
      distractors.push_back(std::move(d));
      if (distractors.size() == 3) break;
    }
  }
  if (distractors.size() < 3) return std::nullopt;

  std::vector<std::size_t> order{0, 1, 2, 3};
  Rng(seed).shuffle(order);
  QAItem item;
  item.qid = std::move(qid);
  item.question_elements = resolve_question(pair.question, gold_chunk);
  item.gold_doc_id = gold_chunk.id;
  item.options.resize(4);
  for (std::size_t slot = 0; slot < 4; ++slot) {
    const std::size_t src = order[slot];
    item.options[slot] = src == 0 ? pair.answer : distractors[src - 1];
    if (src == 0) item.gold_index = slot;
  }
  return item;
}

/// Top-`top` retrieval for the question, gold removed, first `n_neg` kept in
/// rank order. With fewer than `n_neg` candidates left, all of them are kept
/// provided at least one remains; otherwise nullopt.
inline std::optional<MinedTriplet> mine_hard_negatives(const QAItem& item, const Retriever& retriever,
                                                       std::size_t top = 10, std::size_t n_neg = 5) {
  require(top >= 1 && n_neg >= 1, Errc::invalid_input, "top and n must be >= 1");
  MinedTriplet t{item.qid, item.gold_doc_id, {}};
  for (const auto& hit : retriever(item.question_elements, top)) {
    if (hit.chunk_id == item.gold_doc_id) continue;
    if (t.negative_ids.size() == n_neg) break;
    t.negative_ids.push_back(hit.chunk_id);
  }
  if (t.negative_ids.empty()) return std::nullopt;
  return t;
}

inline ContrastiveTriplet to_contrastive(const MinedTriplet& m, const QAItem& item, const std::string& instruction) {
  return {m.qid, item.question_elements, instruction, m.positive_id, m.negative_ids};
}

// ---------------------------------------------------------------------------
// Pipeline

enum class DropReason { contextual, image_tag, option_fail, negative_shortage };

inline std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::contextual: return "contextual";
    case DropReason::image_tag: return "image-tag";
    case DropReason::option_fail: return "option-fail";
    case DropReason::negative_shortage: return "negative-shortage";
  }
  return "unknown";
}

struct DropRecord {
  std::string reason;
  std::string id;
  std::string detail;
};

/// Stage counters. Balance: raw_pairs == items_out + drops(contextual,
/// image-tag, option-fail); items_in_mining == triplets_out +
/// drops(negative-shortage). Refinement fallbacks keep their pair and are
/// counted separately.
struct DatagenReport {
  std::size_t chunks_in = 0;
  std::size_t parse_failures = 0;
  std::size_t raw_pairs = 0;
  std::size_t refine_fallbacks = 0;
  std::size_t items_out = 0;
  std::size_t items_in_mining = 0;
  std::size_t triplets_out = 0;
  std::map<std::string, std::size_t> drops;
  std::vector<DropRecord> log;

  std::size_t dropped(DropReason r) const {
    auto it = drops.find(to_string(r));
    return it == drops.end() ? 0 : it->second;
  }

  void record(DropReason r, std::string id, std::string detail = {}) {
    ++drops[to_string(r)];
    log.push_back({to_string(r), std::move(id), std::move(detail)});
  }

  bool synthesis_balanced() const {
    return raw_pairs ==
           items_out + dropped(DropReason::contextual) + dropped(DropReason::image_tag) + dropped(DropReason::option_fail);
  }

  bool mining_balanced() const { return items_in_mining == triplets_out + dropped(DropReason::negative_shortage); }

  Json to_json() const {
    Json j;
    j["chunks_in"] = chunks_in;
    j["parse_failures"] = parse_failures;
    j["raw_pairs"] = raw_pairs;
    j["refine_fallbacks"] = refine_fallbacks;
    j["items_out"] = items_out;
    j["items_in_mining"] = items_in_mining;
    j["triplets_out"] = triplets_out;
    j["drops"] = Json::object();
    for (const auto& [k, v] : drops) j["drops"][k] = v;
    j["log"] = Json::array();
    for (const auto& d : log) j["log"].push_back({{"reason", d.reason}, {"id", d.id}, {"detail", d.detail}});
    return j;
  }
};

struct DatagenConfig {
  std::size_t max_pairs = 5;
  std::vector<std::string> blocklist = default_context_blocklist();
  std::uint64_t seed = 0;
  GenerationParams params;
  PromptSet prompts;
  std::size_t jobs = 1;
};

struct SynthesisResult {
  std::vector<QAItem> items;
  DatagenReport report;
};

inline std::string make_qid(std::string_view chunk_id, std::size_t pair_index) {
  return std::string(chunk_id) + ":q" + std::to_string(pair_index);
}

/// Generation, error filtering, refinement and option generation for every
/// chunk. Chunks run in parallel; output and drop log are ordered by
/// (chunk id, pair index) regardless of scheduling.
inline SynthesisResult synthesize_qa(const std::vector<Chunk>& chunks, const Generator& gen, const DatagenConfig& cfg) {
  struct PerChunk {
    std::vector<std::pair<std::size_t, QAItem>> items;
    std::vector<std::pair<std::size_t, DropRecord>> drops;
    std::size_t raw = 0;
    std::size_t fallbacks = 0;
    bool parse_failure = false;
  };
  std::vector<std::size_t> order(chunks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return chunks[a].id < chunks[b].id; });

  std::vector<PerChunk> results(chunks.size());
  parallel_for(order.size(), cfg.jobs, [&](std::size_t slot) {
    const Chunk& chunk = chunks[order[slot]];
    PerChunk& r = results[slot];
    auto raw = generate_raw_qa(chunk, gen, cfg.prompts, cfg.max_pairs, cfg.params);
    r.parse_failure = raw.parse_failure;
    r.raw = raw.pairs.size();
    for (std::size_t j = 0; j < raw.pairs.size(); ++j) {
      const std::string qid = make_qid(chunk.id, j);
      const auto& pair = raw.pairs[j];
      if (!filter_contextual(pair, cfg.blocklist)) {
        r.drops.push_back({j, {to_string(DropReason::contextual), qid, pair.question}});
        continue;
      }
      if (!check_image_tags(pair, chunk)) {
        r.drops.push_back({j, {to_string(DropReason::image_tag), qid, pair.question}});
        continue;
      }
      auto refined = refine_qa(pair, gen, cfg.prompts, cfg.params);
      if (refined.fell_back) ++r.fallbacks;
      // A rewrite that breaks the image tags is not trusted.
      if (!refined.fell_back && !check_image_tags(refined.pair, chunk)) {
        refined = {pair, true, "refined tags invalid"};
        ++r.fallbacks;
      }
      auto item = generate_options(refined.pair, chunk, qid, gen, cfg.seed, cfg.prompts);
      if (!item) {
        r.drops.push_back({j, {to_string(DropReason::option_fail), qid, refined.pair.question}});
        continue;
      }
      r.items.push_back({j, std::move(*item)});
    }
  });

  SynthesisResult out;
  auto& rep = out.report;
  rep.chunks_in = chunks.size();
  for (auto& r : results) {
    rep.raw_pairs += r.raw;
    rep.refine_fallbacks += r.fallbacks;
    rep.parse_failures += r.parse_failure ? 1 : 0;
    for (auto& [j, d] : r.drops) {
      ++rep.drops[d.reason];
      rep.log.push_back(std::move(d));
    }
    for (auto& [j, item] : r.items) out.items.push_back(std::move(item));
  }
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    if (results[slot].parse_failure) rep.log.push_back({"parse-failure", chunks[order[slot]].id, {}});
  }
  rep.items_out = out.items.size();
  return out;
}

struct MiningResult {
  std::vector<MinedTriplet> triplets;
};

/// Hard-negative mining over all items; shortages are recorded in `report`.
inline MiningResult mine_negatives(const std::vector<QAItem>& items, const Retriever& retriever, std::size_t top,
                                   std::size_t n_neg, DatagenReport& report, std::size_t jobs = 1) {
  std::vector<std::optional<MinedTriplet>> slots(items.size());
  parallel_for(items.size(), jobs,
               [&](std::size_t i) { slots[i] = mine_hard_negatives(items[i], retriever, top, n_neg); });
  MiningResult out;
  report.items_in_mining += items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      out.triplets.push_back(std::move(*slots[i]));
    } else {
      report.record(DropReason::negative_shortage, items[i].qid);
    }
  }
  report.triplets_out += out.triplets.size();
  return out;
}

}  // namespace mrag
