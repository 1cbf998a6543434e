#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/datagen.hpp"
#include "mrag/feedback.hpp"
#include "mrag/gateway.hpp"
#include "mrag/metrics.hpp"
#include "mrag/parallel.hpp"
#include "mrag/prompts.hpp"
#include "mrag/retriever.hpp"

namespace mrag {

struct EvalConfig {
  std::string context_template = kContextPrompt;
  std::string direct_template = kDirectPrompt;
  NormalizeOptions normalize;
  GenerationParams params;
  std::size_t jobs = 1;
};

struct QueryResult {
  std::string qid;
  std::vector<std::string> retrieved;
  std::string generated;
  int em = 0;
  double f1 = 0.0;
  int correct = 0;
  bool error = false;
  std::string error_message;
};

struct EvalAggregates {
  double em = 0.0;
  double f1 = 0.0;
  double acc = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::size_t k = 0;
  std::vector<QueryResult> queries;
  EvalAggregates aggregates;
  Json manifest = Json::object();

  static EvalAggregates aggregate(const std::vector<QueryResult>& rows) {
    EvalAggregates a;
    if (rows.empty()) return a;
    for (const auto& r : rows) {
      a.em += r.em;
      a.f1 += r.f1;
      a.acc += r.correct;
    }
    const double n = static_cast<double>(rows.size());
    a.em /= n;
    a.f1 /= n;
    a.acc /= n;
    return a;
  }

  std::vector<bool> correctness() const {
    std::vector<bool> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(q.correct != 0);
    return out;
  }

  Json to_json() const {
    Json j;
    j["dataset"] = dataset;
    j["k"] = k;
    j["aggregates"] = {{"em", aggregates.em}, {"f1", aggregates.f1}, {"acc", aggregates.acc}};
    j["queries"] = Json::array();
    for (const auto& q : queries) {
      Json r;
      r["qid"] = q.qid;
      r["retrieved"] = q.retrieved;
      r["generated"] = q.generated;
      r["em"] = q.em;
      r["f1"] = q.f1;
      r["correct"] = q.correct;
      if (q.error) r["error"] = q.error_message;
      j["queries"].push_back(std::move(r));
    }
    j["manifest"] = manifest;
    return j;
  }

  static EvalReport from_json(const Json& j) {
    EvalReport rep;
    rep.dataset = json_string(j, "dataset");
    rep.k = json_uint(j, "k");
    for (const auto& r : json_field(j, "queries")) {
      QueryResult q;
      q.qid = json_string(r, "qid");
      q.retrieved = json_field(r, "retrieved").get<std::vector<std::string>>();
      q.generated = json_string(r, "generated");
      q.em = json_field(r, "em").get<int>();
      q.f1 = json_field(r, "f1").get<double>();
      q.correct = json_field(r, "correct").get<int>();
      if (auto e = json_opt_string(r, "error")) {
        q.error = true;
        q.error_message = *e;
      }
      rep.queries.push_back(std::move(q));
    }
    rep.aggregates = aggregate(rep.queries);
    if (auto it = j.find("manifest"); it != j.end()) rep.manifest = *it;
    return rep;
  }
};

/// Retrieves top-k chunks per item, asks the generator and scores the reply.
/// k = 0 answers without context. Open QA items are correct on exact match;
/// multiple-choice items on the option letter. Generator failures count as
/// wrong and are flagged.
inline EvalReport run_rag_eval(const std::string& dataset_name, const std::vector<QAItem>& dataset,
                               const Retriever& retriever, const CorpusStore& store, const Generator& gen,
                               std::size_t k, const EvalConfig& cfg = {}) {
  EvalReport rep;
  rep.dataset = dataset_name;
  rep.k = k;
  rep.queries.resize(dataset.size());
  parallel_for(dataset.size(), cfg.jobs, [&](std::size_t i) {
    const QAItem& item = dataset[i];
    QueryResult& r = rep.queries[i];
    r.qid = item.qid;
    const Payload question = question_payload(item);
    Payload prompt;
    if (k == 0) {
      prompt = render_direct_prompt(question, cfg.direct_template);
    } else {
      std::vector<Payload> docs;
      for (const auto& hit : retriever(item.question_elements, k)) {
        const Chunk* c = store.find_chunk(hit.chunk_id);
        if (!c) fail(Errc::not_found, "retrieved chunk " + hit.chunk_id + " is not in the chunk store");
        r.retrieved.push_back(hit.chunk_id);
        docs.push_back(c->elements);
      }
      prompt = render_context_prompt(question, docs, cfg.context_template);
    }
    try {
      const auto reply = generate(gen, prompt, cfg.params);
      if (reply.finish_reason == FinishReason::error) {
        r.error = true;
        r.error_message = "generator reported error";
        return;
      }
      r.generated = reply.text;
    } catch (const Error& e) {
      if (e.is_validation()) throw;
      r.error = true;
      r.error_message = e.what();
      return;
    }
    r.em = exact_match(r.generated, item.gold_answer(), cfg.normalize);
    r.f1 = token_f1(r.generated, item.gold_answer(), cfg.normalize);
    r.correct = item.is_multiple_choice() ? mc_accuracy(r.generated, item.options, item.gold_index, cfg.normalize)
                                          : r.em;
  });
  rep.aggregates = EvalReport::aggregate(rep.queries);
  return rep;
}

}  // namespace mrag
