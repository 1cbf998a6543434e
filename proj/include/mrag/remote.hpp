#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "mrag/error.hpp"
#include "mrag/gateway.hpp"
#include "mrag/parallel.hpp"

namespace mrag {

struct RemoteOptions {
  std::size_t batch_size = 32;
  std::size_t attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{60};
  std::size_t max_in_flight = 4;
};

namespace detail {

/// POSTs a JSON body with sequential retries and exponential backoff.
/// Connection failures are retried; HTTP 4xx answers are not.
inline Json post_json(const std::string& endpoint, const std::string& path, const Json& body,
                      const RemoteOptions& opt) {
  httplib::Client client(endpoint);
  client.set_connection_timeout(opt.timeout);
  client.set_read_timeout(opt.timeout);
  client.set_write_timeout(opt.timeout);
  const std::string payload = body.dump();
  auto backoff = opt.initial_backoff;
  std::string last_error = "no attempt made";
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(opt.attempts, 1); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
        last_error = "timeout or transport failure (" + httplib::to_string(res.error()) + ")";
        if (attempt + 1 == opt.attempts) fail(Errc::timeout, endpoint + path + ": " + last_error);
      } else {
        last_error = httplib::to_string(res.error());
      }
      continue;
    }
    if (res->status >= 400 && res->status < 500) {
      std::string message = res->body;
      try {
        message = Json::parse(res->body).at("error").get<std::string>();
      } catch (...) {
      }
      fail(Errc::backend_error, endpoint + path + " answered HTTP " + std::to_string(res->status) + ": " + message);
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return Json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::backend_error, endpoint + path + " sent malformed JSON: " + e.what());
    }
  }
  fail(Errc::backend_unreachable, endpoint + path + ": " + last_error);
}

}  // namespace detail

/// Embedding client for POST /v1/embed. Items are split into batches that are
/// sent concurrently (bounded by max_in_flight) and reassembled in order.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(std::string endpoint, RemoteOptions opt = {})
      : endpoint_(std::move(endpoint)), opt_(opt) {}

  std::vector<EmbeddingVector> embed_batch(const std::vector<Payload>& items, EmbedRole role,
                                           const std::optional<std::string>& instruction,
                                           std::size_t dim) const override {
    const std::size_t batch = std::max<std::size_t>(opt_.batch_size, 1);
    const std::size_t batches = (items.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> parts(batches);
    parallel_for(batches, opt_.max_in_flight, [&](std::size_t b) {
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(items.size(), lo + batch);
      std::vector<Payload> slice(items.begin() + static_cast<std::ptrdiff_t>(lo),
                                 items.begin() + static_cast<std::ptrdiff_t>(hi));
      auto reply = detail::post_json(endpoint_, "/v1/embed", encode_embed_request(slice, role, instruction, dim), opt_);
      parts[b] = decode_embed_response(reply, dim);
      if (parts[b].size() != slice.size()) {
        fail(Errc::backend_error, endpoint_ + " returned " + std::to_string(parts[b].size()) + " embeddings for " +
                                      std::to_string(slice.size()) + " items");
      }
    });
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (auto& p : parts) {
      for (auto& v : p) out.push_back(std::move(v));
    }
    return out;
  }

  std::string identity() const override { return "remote:" + endpoint_; }

 private:
  std::string endpoint_;
  RemoteOptions opt_;
};

class RemoteGenerator final : public Generator {
 public:
  explicit RemoteGenerator(std::string endpoint, RemoteOptions opt = {})
      : endpoint_(std::move(endpoint)), opt_(opt) {}

  GeneratorReply generate(const Payload& elements, const GenerationParams& params) const override {
    return decode_generate_response(
        detail::post_json(endpoint_, "/v1/generate", encode_generate_request(elements, params), opt_));
  }

  std::string identity() const override { return "remote:" + endpoint_; }

 private:
  std::string endpoint_;
  RemoteOptions opt_;
};

}  // namespace mrag
