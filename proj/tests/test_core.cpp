#include <gtest/gtest.h>

#include "mrag/chunker.hpp"
#include "mrag/core.hpp"
#include "support.hpp"

using namespace mrag;
using test::TempDir;

namespace {

const char* kDoc1 = R"({"id":"d1","elements":[{"type":"text","text":"alpha beta"}]})";
const char* kDoc2 =
    R"({"id":"d2","source":"web","elements":[{"type":"image","uri":"img/a.png","sha256":"00ff"},{"type":"text","text":"gamma"}]})";
const char* kDoc3 = R"({"id":"d3","elements":[{"type":"image","uri":"img/b.png","alt":"a cat"}]})";

}  // namespace

TEST(Ingest, ThreeValidLines) {
  TempDir dir;
  test::spit(dir.file("c.jsonl"), std::string(kDoc1) + "\n" + kDoc2 + "\n" + kDoc3 + "\n");
  IngestReport rep;
  const auto store = ingest_corpus(dir.file("c.jsonl"), Strictness::strict, &rep);
  ASSERT_EQ(store.document_count(), 3u);
  EXPECT_EQ(rep.loaded, 3u);
  EXPECT_EQ(store.documents()[0].id, "d1");
  EXPECT_EQ(store.documents()[2].id, "d3");
  EXPECT_EQ(*store.documents()[1].source, "web");
}

TEST(Ingest, LenientSkipsMalformedLine) {
  TempDir dir;
  test::spit(dir.file("c.jsonl"), std::string(kDoc1) + "\n{not json\n" + kDoc2 + "\n" + kDoc3 + "\n");
  IngestReport rep;
  const auto store = ingest_corpus(dir.file("c.jsonl"), Strictness::lenient, &rep);
  EXPECT_EQ(store.document_count(), 3u);
  ASSERT_EQ(rep.skipped.size(), 1u);
  EXPECT_EQ(rep.skipped[0].line, 2u);
}

TEST(Ingest, StrictAbortsWithLineNumber) {
  TempDir dir;
  test::spit(dir.file("c.jsonl"), std::string(kDoc1) + "\n{not json\n");
  try {
    ingest_corpus(dir.file("c.jsonl"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Ingest, EmptyFile) {
  TempDir dir;
  test::spit(dir.file("c.jsonl"), "");
  EXPECT_EQ(ingest_corpus(dir.file("c.jsonl")).document_count(), 0u);
}

TEST(Ingest, MissingFileIsIoError) {
  EXPECT_EQ(test::errc_of([] { ingest_corpus("/nonexistent/corpus.jsonl"); }), Errc::io_error);
}

TEST(Ingest, RejectsSchemaViolations) {
  for (const char* bad : {R"({"id":"x","elements":[]})", R"({"id":"x","elements":[{"type":"video","uri":"v"}]})",
                          R"({"elements":[{"type":"text","text":"a"}]})",
                          R"({"id":"x","elements":[{"type":"image","uri":"u","sha256":"zz"}]})"}) {
    EXPECT_EQ(test::errc_of([&] { doc_from_json(Json::parse(bad)); }), Errc::parse_error) << bad;
  }
}

TEST(Ingest, DuplicateDocumentId) {
  TempDir dir;
  test::spit(dir.file("c.jsonl"), std::string(kDoc1) + "\n" + kDoc1 + "\n");
  EXPECT_EQ(test::errc_of([&] { ingest_corpus(dir.file("c.jsonl")); }), Errc::duplicate_id);
}

TEST(Ingest, RoundTripIsByteEquivalent) {
  TempDir dir;
  const std::string body = std::string(kDoc1) + "\n" + kDoc2 + "\n" + kDoc3 + "\n";
  test::spit(dir.file("in.jsonl"), body);
  const auto store = ingest_corpus(dir.file("in.jsonl"));
  write_corpus(dir.file("out.jsonl"), store.documents());
  EXPECT_EQ(test::slurp(dir.file("out.jsonl")), body);
}

TEST(Store, GetChunkByIdAndNamespaces) {
  CorpusStore store;
  MixedModalDoc doc{"d1", test::text("one two three"), std::nullopt};
  store.add_document(doc);
  for (auto& c : segment_document(doc, {})) store.add_chunk(c);
  const auto c = get_chunk(store, "d1#0");
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->elements, doc.elements);
  EXPECT_FALSE(get_chunk(store, "d1#7").has_value());
  EXPECT_FALSE(get_chunk(store, "d1").has_value());
  EXPECT_NE(store.find_document("d1"), nullptr);
}

TEST(Store, ChunkMustResolveToDocument) {
  CorpusStore store;
  store.add_document({"d1", test::text("a"), std::nullopt});
  EXPECT_EQ(test::errc_of([&] { store.add_chunk(make_chunk("d9", 0, test::text("a"))); }), Errc::not_found);
}

TEST(Profile, TextOnly) {
  const auto p = modality_profile(make_chunk("d", 0, test::text("hello")));
  EXPECT_TRUE(p.has_text);
  EXPECT_EQ(p.image_count_bucket, ImageBucket::none);
}

TEST(Profile, ImagesOnly) {
  const auto p = modality_profile(make_chunk("d", 0, {test::image("a"), test::image("b")}));
  EXPECT_FALSE(p.has_text);
  EXPECT_EQ(p.image_count_bucket, ImageBucket::many);
  EXPECT_EQ(to_string(p), "notext/img2+");
}

TEST(Profile, TextAndOneImage) {
  const auto p = modality_profile(make_chunk("d", 0, {TextSegment{"x"}, test::image("a")}));
  EXPECT_TRUE(p.has_text);
  EXPECT_EQ(p.image_count_bucket, ImageBucket::one);
}

TEST(ChunkJson, RoundTripAndCountCheck) {
  const Chunk c = make_chunk("d1", 2, {TextSegment{"a b c"}, test::image("x.png")});
  const Json j = chunk_to_json(c);
  EXPECT_EQ(chunk_from_json(j), c);
  Json bad = j;
  bad["text_token_count"] = 5;
  EXPECT_EQ(test::errc_of([&] { chunk_from_json(bad); }), Errc::parse_error);
}
