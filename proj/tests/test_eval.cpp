#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mrag/chunker.hpp"
#include "mrag/demo.hpp"
#include "mrag/eval.hpp"
#include "mrag/pipeline.hpp"
#include "support.hpp"

namespace mrag {
namespace {

struct Planted {
  demo::Corpus corpus = demo::make_corpus(40);
  std::vector<Chunk> chunks = segment_corpus(corpus.docs, ChunkerConfig{}, 1);
  CorpusStore store = chunk_store(chunks);
  ScriptedGenerator gen = demo::make_generator(corpus);
  ReferenceEmbedder embedder;
  DenseIndex index = DenseIndex::build(embed_chunks(chunks, embedder, DimensionLadder{}), DimensionLadder{});
  Retriever retriever = make_dense_retriever(index, embedder, kDefaultQueryInstruction);
  std::vector<QAItem> items = synthesize_qa(chunks, gen, DatagenConfig{}).items;
};

TEST(Eval, PlantedAnswersScorePerfectlyWithContext) {
  const Planted p;
  ASSERT_FALSE(p.items.empty());
  const auto rep = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 1);
  EXPECT_EQ(rep.queries.size(), p.items.size());
  EXPECT_GT(rep.aggregates.acc, 0.9);
  const auto rep3 = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 3);
  EXPECT_EQ(rep3.aggregates.acc, 1.0);
  EXPECT_EQ(rep3.aggregates.em, 1.0);
  for (const auto& q : rep3.queries) EXPECT_EQ(q.retrieved.size(), 3u);
}

TEST(Eval, ClosedBookBaselineAnswersUnknown) {
  const Planted p;
  const auto rep = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 0);
  EXPECT_EQ(rep.aggregates.em, 0.0);
  EXPECT_EQ(rep.aggregates.f1, 0.0);
  EXPECT_EQ(rep.aggregates.acc, 0.0);
  for (const auto& q : rep.queries) {
    EXPECT_TRUE(q.retrieved.empty());
    EXPECT_EQ(q.generated, "UNKNOWN");
  }
}

TEST(Eval, AggregatesRecomputeFromRows) {
  const Planted p;
  const auto rep = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 1);
  double em = 0.0, f1 = 0.0, acc = 0.0;
  for (const auto& q : rep.queries) {
    em += q.em;
    f1 += q.f1;
    acc += q.correct;
  }
  const double n = static_cast<double>(rep.queries.size());
  EXPECT_NEAR(rep.aggregates.em, em / n, 1e-12);
  EXPECT_NEAR(rep.aggregates.f1, f1 / n, 1e-12);
  EXPECT_NEAR(rep.aggregates.acc, acc / n, 1e-12);
}

TEST(Eval, GeneratorFailureIsFlaggedNotFatal) {
  class Down final : public Generator {
   public:
    GeneratorReply generate(const Payload&, const GenerationParams&) const override {
      fail(Errc::backend_unreachable, "no route");
    }
    std::string identity() const override { return "down"; }
  };
  const Planted p;
  const auto rep = run_rag_eval("demo", p.items, p.retriever, p.store, Down{}, 1);
  for (const auto& q : rep.queries) {
    EXPECT_TRUE(q.error);
    EXPECT_EQ(q.correct, 0);
  }
  EXPECT_EQ(rep.aggregates.acc, 0.0);
}

TEST(Eval, DeterministicAcrossJobCounts) {
  const Planted p;
  EvalConfig cfg;
  const auto a = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 2, cfg);
  cfg.jobs = 4;
  const auto b = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 2, cfg);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Eval, ReportJsonRoundTrip) {
  const Planted p;
  auto rep = run_rag_eval("demo", p.items, p.retriever, p.store, p.gen, 1);
  rep.queries[0].error = true;
  rep.queries[0].error_message = "boom";
  rep.manifest = {{"seed", 3}};
  const auto back = EvalReport::from_json(rep.to_json());
  EXPECT_EQ(back.to_json(), rep.to_json());
}

TEST(Eval, OpenQaUsesExactMatch) {
  const auto f = test::window_fixture();
  const auto gen = test::correct_when_shown({{1}});
  const auto rep = run_rag_eval("open", {f.item}, f.retriever(), f.store, gen, 1);
  EXPECT_EQ(rep.queries[0].generated, "Paris");
  EXPECT_EQ(rep.aggregates.em, 1.0);
  EXPECT_EQ(rep.aggregates.acc, 1.0);
}

}  // namespace
}  // namespace mrag
