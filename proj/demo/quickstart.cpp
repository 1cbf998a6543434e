// In-process walk through the pipeline on the synthetic demo corpus:
// chunk, embed, index, synthesize QA, mine negatives, probe feedback, evaluate.

#include <cstdio>
#include <iostream>

#include "mrag/demo.hpp"
#include "mrag/mrag.hpp"
#include "mrag/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace mrag;
  const std::size_t docs = argc > 1 ? std::stoul(argv[1]) : 200;

  auto corpus = demo::make_corpus(docs);
  auto gen = demo::make_generator(corpus);
  const auto chunks = segment_corpus(corpus.docs, ChunkerConfig{}, default_jobs());
  const CorpusStore store = chunk_store(chunks);
  std::printf("%zu documents -> %zu chunks\n", corpus.docs.size(), chunks.size());

  const ReferenceEmbedder embedder;
  const DimensionLadder ladder;
  const auto index = DenseIndex::build(embed_chunks(chunks, embedder, ladder), ladder);
  const auto retriever = make_dense_retriever(index, embedder, kDefaultQueryInstruction);

  DatagenConfig dcfg;
  dcfg.jobs = default_jobs();
  auto synth = synthesize_qa(chunks, gen, dcfg);
  auto mined = mine_negatives(synth.items, retriever, 10, 5, synth.report, dcfg.jobs);
  std::printf("qa items %zu (raw %zu), triplets %zu, drops:", synth.items.size(), synth.report.raw_pairs,
              mined.triplets.size());
  for (const auto& [reason, n] : synth.report.drops) std::printf(" %s=%zu", reason.c_str(), n);
  std::printf("\n");

  FeedbackConfig fcfg;
  fcfg.K = 4;
  fcfg.L = 1;
  fcfg.jobs = dcfg.jobs;
  fcfg.metric = Metric::mc_accuracy;
  const auto pref = build_preference_dataset(synth.items, retriever, store, gen, fcfg);
  std::printf("preference records %zu of %zu queries\n", pref.records.size(), pref.queries);

  EvalConfig ecfg;
  ecfg.jobs = dcfg.jobs;
  for (std::size_t k : {0, 1, 3}) {
    const auto rep = run_rag_eval("demo", synth.items, retriever, store, gen, k, ecfg);
    std::printf("k=%zu acc=%.4f em=%.4f f1=%.4f\n", k, rep.aggregates.acc, rep.aggregates.em, rep.aggregates.f1);
  }
  return 0;
}
