#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/datagen.hpp"
#include "mrag/error.hpp"
#include "mrag/gateway.hpp"
#include "mrag/metrics.hpp"
#include "mrag/parallel.hpp"
#include "mrag/prompts.hpp"
#include "mrag/retriever.hpp"
#include "mrag/text.hpp"

namespace mrag {

enum class Metric { exact_match, token_f1, mc_accuracy };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::exact_match: return "exact_match";
    case Metric::token_f1: return "token_f1";
    case Metric::mc_accuracy: return "mc_accuracy";
  }
  return "unknown";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "em" || s == "exact_match") return Metric::exact_match;
  if (s == "f1" || s == "token_f1") return Metric::token_f1;
  if (s == "acc" || s == "mc_accuracy") return Metric::mc_accuracy;
  fail(Errc::invalid_input, "unknown metric \"" + std::string(s) + "\" (expected em, f1 or acc)");
}

/// Scores a generated answer against an item. mc_accuracy needs options;
/// the text metrics compare with the gold answer (the gold option text for
/// multiple-choice items).
inline double score_answer(Metric m, std::string_view pred, const QAItem& item, const NormalizeOptions& norm = {}) {
  switch (m) {
    case Metric::exact_match: return exact_match(pred, item.gold_answer(), norm);
    case Metric::token_f1: return token_f1(pred, item.gold_answer(), norm);
    case Metric::mc_accuracy:
      require(item.is_multiple_choice(), Errc::invalid_input, "mc_accuracy needs options on item " + item.qid);
      return mc_accuracy(pred, item.options, item.gold_index, norm);
  }
  return 0.0;
}

/// The question as shown to the generator: its elements, followed for
/// multiple-choice items by the lettered options.
inline Payload question_payload(const QAItem& item) {
  Payload p = item.question_elements;
  if (item.is_multiple_choice()) {
    std::string opts = "Options:";
    for (std::size_t i = 0; i < item.options.size(); ++i) {
      opts += "\n";
      opts += static_cast<char>('A' + i);
      opts += ". " + item.options[i];
    }
    opts += "\nReply with the letter of the correct option.";
    p.push_back(TextSegment{std::move(opts)});
  }
  return p;
}

/// Expands a template with "{documents}" and "{question}" slots into a
/// payload. Each document is introduced by "Document i:" (1-based) and its
/// elements follow in order, images included. Whitespace-only template text
/// between slots is dropped.
inline Payload render_context_prompt(const Payload& question, const std::vector<Payload>& documents,
                                     const std::string& tmpl) {
  require(!documents.empty(), Errc::precondition, "context window is empty");
  Payload out;
  auto push_text = [&](std::string_view t) {
    if (!trim(t).empty()) out.push_back(TextSegment{std::string(t)});
  };
  static const std::string kDocs = "{documents}";
  static const std::string kQuestion = "{question}";
  std::size_t cursor = 0;
  while (cursor <= tmpl.size()) {
    const std::size_t d = tmpl.find(kDocs, cursor);
    const std::size_t q = tmpl.find(kQuestion, cursor);
    const std::size_t next = std::min(d, q);
    if (next == std::string::npos) {
      push_text(std::string_view(tmpl).substr(cursor));
      break;
    }
    push_text(std::string_view(tmpl).substr(cursor, next - cursor));
    if (next == d) {
      for (std::size_t i = 0; i < documents.size(); ++i) {
        out.push_back(TextSegment{"Document " + std::to_string(i + 1) + ":"});
        out.insert(out.end(), documents[i].begin(), documents[i].end());
      }
      cursor = d + kDocs.size();
    } else {
      out.insert(out.end(), question.begin(), question.end());
      cursor = q + kQuestion.size();
    }
  }
  return out;
}

/// Template without documents, used for the closed-book baseline.
inline Payload render_direct_prompt(const Payload& question, const std::string& tmpl) {
  Payload out;
  const std::size_t q = tmpl.find("{question}");
  auto push_text = [&](std::string_view t) {
    if (!trim(t).empty()) out.push_back(TextSegment{std::string(t)});
  };
  if (q == std::string::npos) {
    push_text(tmpl);
    out.insert(out.end(), question.begin(), question.end());
    return out;
  }
  push_text(std::string_view(tmpl).substr(0, q));
  out.insert(out.end(), question.begin(), question.end());
  push_text(std::string_view(tmpl).substr(q + 10));
  return out;
}

struct FeedbackConfig {
  std::size_t K = 8;
  std::size_t L = 2;
  std::size_t stride = 1;
  Metric metric = Metric::exact_match;
  double threshold = 1.0;
  std::string prompt_template = kContextPrompt;
  GenerationParams params;
  std::size_t jobs = 1;

  void validate() const {
    require(K >= 1, Errc::invalid_input, "K must be >= 1");
    require(L >= 1 && L <= K, Errc::invalid_input, "L must satisfy 1 <= L <= K");
    require(stride >= 1, Errc::invalid_input, "stride must be >= 1");
    require(threshold >= 0.0 && threshold <= 1.0, Errc::invalid_input, "threshold must lie in [0, 1]");
  }
};

struct PreferenceRecord {
  std::string qid;
  std::string positive_id;
  std::vector<std::string> negative_ids;
  std::size_t window_start = 0;
  Metric metric = Metric::exact_match;
  double metric_value = 0.0;
  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

inline Json preference_to_json(const PreferenceRecord& r) {
  Json j;
  j["qid"] = r.qid;
  j["positive"] = r.positive_id;
  j["negatives"] = r.negative_ids;
  j["window_start"] = r.window_start;
  j["metric"] = to_string(r.metric);
  j["metric_value"] = r.metric_value;
  return j;
}

inline PreferenceRecord preference_from_json(const Json& j) {
  PreferenceRecord r;
  r.qid = json_string(j, "qid");
  r.positive_id = json_string(j, "positive");
  r.negative_ids = json_field(j, "negatives").get<std::vector<std::string>>();
  r.window_start = json_uint(j, "window_start");
  r.metric = parse_metric(json_string(j, "metric"));
  r.metric_value = json_field(j, "metric_value").get<double>();
  return r;
}

struct FeedbackEvent {
  std::string qid;
  std::string kind;  // "short-retrieval", "window-error", "no-window"
  std::string detail;
};

struct FeedbackResult {
  std::vector<PreferenceRecord> records;
  std::vector<FeedbackEvent> log;
  std::size_t queries = 0;
  std::size_t generator_calls = 0;
};

/// Probes windows of retrieved documents in order and keeps the first one
/// whose answer meets the threshold. Returns nothing when no window does.
inline std::optional<PreferenceRecord> probe_windows(const QAItem& item, const std::vector<SearchHit>& hits,
                                                     const CorpusStore& store, const Generator& gen,
                                                     const FeedbackConfig& cfg, std::vector<FeedbackEvent>& log,
                                                     std::size_t& calls) {
  const Payload question = question_payload(item);
  for (std::size_t start = 0; start + cfg.L <= cfg.K; start += cfg.stride) {
    std::vector<Payload> docs;
    for (std::size_t i = start; i < start + cfg.L; ++i) {
      const Chunk* c = store.find_chunk(hits[i].chunk_id);
      if (!c) fail(Errc::not_found, "retrieved chunk " + hits[i].chunk_id + " is not in the chunk store");
      docs.push_back(c->elements);
    }
    double score = 0.0;
    ++calls;
    try {
      const auto reply = generate(gen, render_context_prompt(question, docs, cfg.prompt_template), cfg.params);
      if (reply.finish_reason == FinishReason::error) {
        log.push_back({item.qid, "window-error", "window " + std::to_string(start) + ": generator reported error"});
      } else {
        score = score_answer(cfg.metric, reply.text, item);
      }
    } catch (const Error& e) {
      if (e.is_validation()) throw;
      log.push_back({item.qid, "window-error", "window " + std::to_string(start) + ": " + e.what()});
    }
    if (score >= cfg.threshold) {
      PreferenceRecord r{item.qid, hits[start].chunk_id, {}, start, cfg.metric, score};
      for (std::size_t i = 0; i < cfg.K; ++i) {
        if (i != start) r.negative_ids.push_back(hits[i].chunk_id);
      }
      return r;
    }
  }
  return std::nullopt;
}

/// Builds preference records for every item. Queries run in parallel;
/// windows of one query run in order. Output follows input order.
inline FeedbackResult build_preference_dataset(const std::vector<QAItem>& dataset, const Retriever& retriever,
                                               const CorpusStore& store, const Generator& gen,
                                               const FeedbackConfig& cfg) {
  cfg.validate();
  struct Slot {
    std::optional<PreferenceRecord> record;
    std::vector<FeedbackEvent> log;
    std::size_t calls = 0;
  };
  std::vector<Slot> slots(dataset.size());
  parallel_for(dataset.size(), cfg.jobs, [&](std::size_t q) {
    const QAItem& item = dataset[q];
    Slot& s = slots[q];
    const auto hits = retriever(item.question_elements, cfg.K);
    if (hits.size() < cfg.K) {
      s.log.push_back({item.qid, "short-retrieval",
                       std::to_string(hits.size()) + " hits for K=" + std::to_string(cfg.K)});
      return;
    }
    s.record = probe_windows(item, hits, store, gen, cfg, s.log, s.calls);
    if (!s.record) s.log.push_back({item.qid, "no-window", {}});
  });
  FeedbackResult out;
  out.queries = dataset.size();
  for (auto& s : slots) {
    if (s.record) out.records.push_back(std::move(*s.record));
    for (auto& e : s.log) out.log.push_back(std::move(e));
    out.generator_calls += s.calls;
  }
  return out;
}

}  // namespace mrag
