#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mrag/feedback.hpp"
#include "support.hpp"

namespace mrag {
namespace {

FeedbackConfig windows(std::size_t k, std::size_t l) {
  FeedbackConfig cfg;
  cfg.K = k;
  cfg.L = l;
  return cfg;
}

TEST(Feedback, CorrectOnlyOnMiddleWindow) {
  const auto f = test::window_fixture();
  const auto gen = test::correct_when_shown({{2, 3}});
  const auto res = build_preference_dataset({f.item}, f.retriever(), f.store, gen, windows(4, 2));
  ASSERT_EQ(res.records.size(), 1u);
  const auto& r = res.records[0];
  EXPECT_EQ(r.qid, "q1");
  EXPECT_EQ(r.positive_id, "d2#0");
  EXPECT_EQ(r.negative_ids, (std::vector<std::string>{"d1#0", "d3#0", "d4#0"}));
  EXPECT_EQ(r.window_start, 1u);
  EXPECT_EQ(r.metric_value, 1.0);
  EXPECT_EQ(res.generator_calls, 2u);
}

TEST(Feedback, FirstWindowWins) {
  const auto f = test::window_fixture();
  const auto gen = test::correct_when_shown({{1, 2}, {3, 4}});
  const auto res = build_preference_dataset({f.item}, f.retriever(), f.store, gen, windows(4, 2));
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].window_start, 0u);
  EXPECT_EQ(res.records[0].positive_id, "d1#0");
  EXPECT_EQ(res.generator_calls, 1u);
}

TEST(Feedback, NoPassingWindowEmitsNothing) {
  const auto f = test::window_fixture();
  const auto res =
      build_preference_dataset({f.item}, f.retriever(), f.store, test::correct_when_shown({}), windows(4, 2));
  EXPECT_TRUE(res.records.empty());
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].kind, "no-window");
  EXPECT_EQ(res.generator_calls, 3u);
}

TEST(Feedback, ThresholdZeroTakesFirstWindow) {
  const auto f = test::window_fixture();
  auto cfg = windows(4, 2);
  cfg.threshold = 0.0;
  cfg.metric = Metric::token_f1;
  const auto res = build_preference_dataset({f.item, f.item}, f.retriever(), f.store, test::correct_when_shown({}), cfg);
  ASSERT_EQ(res.records.size(), 2u);
  for (const auto& r : res.records) EXPECT_EQ(r.window_start, 0u);
}

TEST(Feedback, StrideSkipsWindows) {
  const auto f = test::window_fixture(6);
  auto cfg = windows(6, 2);
  cfg.stride = 2;
  // Windows start at 0, 2, 4; the pair {2, 3} (start 1) is never shown alone.
  const auto res = build_preference_dataset({f.item}, f.retriever(), f.store, test::correct_when_shown({{5, 6}}), cfg);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].window_start, 4u);
  EXPECT_EQ(res.records[0].negative_ids.size(), 5u);
}

TEST(Feedback, ShortRetrievalIsLoggedAndSkipped) {
  const auto f = test::window_fixture(3);
  const auto res =
      build_preference_dataset({f.item}, f.retriever(), f.store, test::correct_when_shown({{1, 2}}), windows(4, 2));
  EXPECT_TRUE(res.records.empty());
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].kind, "short-retrieval");
  EXPECT_EQ(res.generator_calls, 0u);
}

TEST(Feedback, GeneratorErrorScoresZeroAndContinues) {
  class Flaky final : public Generator {
   public:
    GeneratorReply generate(const Payload& p, const GenerationParams&) const override {
      const std::string text = flatten_text(p);
      if (text.find(test::window_marker(1)) != std::string::npos) fail(Errc::backend_unreachable, "down");
      return {"Paris", FinishReason::stop};
    }
    std::string identity() const override { return "flaky"; }
  };
  const auto f = test::window_fixture();
  const auto res = build_preference_dataset({f.item}, f.retriever(), f.store, Flaky{}, windows(4, 2));
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].window_start, 1u);
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].kind, "window-error");
}

TEST(Feedback, RejectsBadConfig) {
  const auto f = test::window_fixture();
  const auto gen = test::correct_when_shown({});
  EXPECT_EQ(test::errc_of([&] { build_preference_dataset({f.item}, f.retriever(), f.store, gen, windows(2, 3)); }),
            Errc::invalid_input);
  auto cfg = windows(4, 2);
  cfg.threshold = 1.5;
  EXPECT_EQ(test::errc_of([&] { build_preference_dataset({f.item}, f.retriever(), f.store, gen, cfg); }),
            Errc::invalid_input);
}

TEST(Feedback, SameRecordsForAnyJobCount) {
  const auto f = test::window_fixture();
  std::vector<QAItem> items;
  for (int i = 0; i < 20; ++i) {
    items.push_back(f.item);
    items.back().qid = "q" + std::to_string(i);
  }
  const auto gen = test::correct_when_shown({{3, 4}});
  auto cfg = windows(4, 2);
  const auto a = build_preference_dataset(items, f.retriever(), f.store, gen, cfg);
  cfg.jobs = 4;
  const auto b = build_preference_dataset(items, f.retriever(), f.store, gen, cfg);
  EXPECT_EQ(a.records, b.records);
}

TEST(ContextPrompt, DocumentsInOrderWithImages) {
  const Payload q{TextSegment{"Q?"}};
  const std::vector<Payload> docs{{TextSegment{"first"}}, {test::image("pic.png"), TextSegment{"second"}}};
  const auto p = render_context_prompt(q, docs, "Use these:\n{documents}\nQuestion: {question}\nAnswer:");
  ASSERT_EQ(p.size(), 9u);
  EXPECT_EQ(std::get<TextSegment>(p[0]).text, "Use these:\n");
  EXPECT_EQ(std::get<TextSegment>(p[1]).text, "Document 1:");
  EXPECT_EQ(std::get<TextSegment>(p[2]).text, "first");
  EXPECT_EQ(std::get<TextSegment>(p[3]).text, "Document 2:");
  EXPECT_EQ(std::get<ImageRef>(p[4]).uri, "pic.png");
  EXPECT_EQ(std::get<TextSegment>(p[5]).text, "second");
  EXPECT_EQ(std::get<TextSegment>(p[6]).text, "\nQuestion: ");
  EXPECT_EQ(std::get<TextSegment>(p[7]).text, "Q?");
  EXPECT_EQ(std::get<TextSegment>(p[8]).text, "\nAnswer:");
}

TEST(ContextPrompt, EmptyWindowIsRejected) {
  EXPECT_EQ(test::errc_of([] { render_context_prompt({TextSegment{"Q"}}, {}, kContextPrompt); }), Errc::precondition);
}

TEST(QuestionPayload, ListsOptionsForMultipleChoice) {
  QAItem item;
  item.question_elements = {TextSegment{"Which?"}};
  item.options = {"w", "x", "y", "z"};
  const auto p = question_payload(item);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NE(std::get<TextSegment>(p[1]).text.find("\nB. x\n"), std::string::npos);
}

TEST(PreferenceJson, RoundTrip) {
  const PreferenceRecord r{"q", "d2#0", {"d1#0", "d3#0"}, 1, Metric::mc_accuracy, 1.0};
  const auto j = preference_to_json(r);
  EXPECT_EQ(j.at("positive"), "d2#0");
  EXPECT_EQ(preference_from_json(j), r);
}

TEST(MetricNames, ParseAndPrint) {
  for (auto m : {Metric::exact_match, Metric::token_f1, Metric::mc_accuracy}) EXPECT_EQ(parse_metric(to_string(m)), m);
  EXPECT_EQ(test::errc_of([] { parse_metric("bleu"); }), Errc::invalid_input);
}

}  // namespace
}  // namespace mrag
