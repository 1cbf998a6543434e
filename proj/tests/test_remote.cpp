#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "httplib.h"
#include "mrag/remote.hpp"
#include "support.hpp"

using namespace mrag;
using namespace std::chrono_literals;

namespace {

/// Minimal in-process backend speaking the wire protocol.
class StubServer {
 public:
  explicit StubServer(ScriptedGenerator gen = ScriptedGenerator{}) : gen_(std::move(gen)) {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++embed_calls;
      if (flaky.load() > 0) {
        --flaky;
        res.status = 503;
        return;
      }
      if (delay.load() > 0ms) std::this_thread::sleep_for(delay.load());
      try {
        const auto r = decode_embed_request(Json::parse(req.body));
        if (r.dim < 8) return reject(res, 422, "dim outside ladder");
        auto vecs = ReferenceEmbedder{}.embed_batch(r.items, r.role, r.instruction, r.dim);
        res.set_content(encode_embed_response(vecs, r.dim).dump(), "application/json");
      } catch (const std::exception& e) {
        reject(res, 400, e.what());
      }
    });
    server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto [elements, params] = decode_generate_request(Json::parse(req.body));
        res.set_content(encode_generate_response(gen_.generate(elements, params)).dump(), "application/json");
      } catch (const std::exception& e) {
        reject(res, 400, e.what());
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> embed_calls{0};
  std::atomic<int> flaky{0};
  std::atomic<std::chrono::milliseconds> delay{0ms};

 private:
  static void reject(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(Json{{"error", message}}.dump(), "application/json");
  }

  ScriptedGenerator gen_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteOptions fast_options() {
  RemoteOptions o;
  o.initial_backoff = 1ms;
  o.timeout = 5s;
  return o;
}

std::vector<Payload> numbered_items(std::size_t n) {
  std::vector<Payload> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back(test::text("item number " + std::to_string(i)));
  return items;
}

}  // namespace

TEST(Remote, EmbeddingsMatchReferenceInOrder) {
  StubServer server;
  RemoteOptions opt = fast_options();
  opt.batch_size = 8;
  opt.max_in_flight = 4;
  const RemoteEmbedder remote(server.endpoint(), opt);
  const auto items = numbered_items(70);
  const auto got = embed(remote, items, EmbedRole::query, std::string("find"), DimensionLadder{256, 128});
  const auto want = embed(ReferenceEmbedder{}, items, EmbedRole::query, std::string("find"), DimensionLadder{256, 128});
  EXPECT_EQ(got, want);
  EXPECT_EQ(server.embed_calls.load(), 9);
}

TEST(Remote, RetriesServerErrors) {
  StubServer server;
  server.flaky = 2;
  const RemoteEmbedder remote(server.endpoint(), fast_options());
  const auto got = embed(remote, numbered_items(3), EmbedRole::document, std::nullopt, DimensionLadder{64});
  EXPECT_EQ(got.size(), 3u);
  EXPECT_EQ(server.embed_calls.load(), 3);
}

TEST(Remote, GivesUpAfterConfiguredAttempts) {
  StubServer server;
  server.flaky = 5;
  const RemoteEmbedder remote(server.endpoint(), fast_options());
  EXPECT_EQ(test::errc_of([&] { remote.embed_batch(numbered_items(1), EmbedRole::document, std::nullopt, 64); }),
            Errc::backend_unreachable);
  EXPECT_EQ(server.embed_calls.load(), 3);
}

TEST(Remote, ClientErrorsAreNotRetried) {
  StubServer server;
  const RemoteEmbedder remote(server.endpoint(), fast_options());
  try {
    remote.embed_batch(numbered_items(1), EmbedRole::document, std::nullopt, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::backend_error);
    EXPECT_NE(std::string(e.what()).find("422"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("dim outside ladder"), std::string::npos);
  }
  EXPECT_EQ(server.embed_calls.load(), 1);
}

TEST(Remote, MalformedBodyGets400) {
  StubServer server;
  httplib::Client client(server.endpoint());
  auto res = client.Post("/v1/embed", "{\"role\":\"query\"", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_TRUE(Json::parse(res->body).contains("error"));
}

TEST(Remote, UnreachableNamesEndpoint) {
  RemoteOptions opt = fast_options();
  opt.attempts = 2;
  const RemoteGenerator gen("http://127.0.0.1:1", opt);
  try {
    generate(gen, test::text("hello"), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::backend_unreachable);
    EXPECT_NE(std::string(e.what()).find("127.0.0.1:1"), std::string::npos) << e.what();
  }
}

TEST(Remote, SlowBackendTimesOut) {
  StubServer server;
  server.delay = 1500ms;
  RemoteOptions opt = fast_options();
  opt.timeout = 1s;
  opt.attempts = 1;
  const RemoteEmbedder remote(server.endpoint(), opt);
  EXPECT_EQ(test::errc_of([&] { remote.embed_batch(numbered_items(1), EmbedRole::document, std::nullopt, 64); }),
            Errc::timeout);
}

TEST(Remote, GeneratorEchoesFixtures) {
  ScriptedGenerator gen;
  gen.add_reply_for(test::text("ping"), "pong");
  StubServer server(gen);
  const RemoteGenerator remote(server.endpoint(), fast_options());
  EXPECT_EQ(generate(remote, test::text("ping"), {}).text, "pong");
  EXPECT_EQ(generate(remote, test::text("other"), {}).text, "UNKNOWN");
  EXPECT_EQ(remote.identity(), "remote:" + server.endpoint());
}
