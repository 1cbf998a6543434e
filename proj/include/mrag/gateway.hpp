#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrag/core.hpp"
#include "mrag/embedding.hpp"
#include "mrag/error.hpp"
#include "mrag/hash.hpp"
#include "mrag/text.hpp"

namespace mrag {

inline constexpr const char* kDefaultQueryInstruction = "Represent this question for retrieving relevant documents.";

enum class EmbedRole { query, document };

inline std::string to_string(EmbedRole r) { return r == EmbedRole::query ? "query" : "document"; }

inline EmbedRole parse_role(std::string_view s) {
  if (s == "query") return EmbedRole::query;
  if (s == "document") return EmbedRole::document;
  fail(Errc::invalid_input, "role must be \"query\" or \"document\"");
}

/// Backend contract for embedding. Implementations return one vector per item
/// in input order; validation of the result happens in embed().
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<Payload>& items, EmbedRole role,
                                                   const std::optional<std::string>& instruction,
                                                   std::size_t dim) const = 0;
  virtual std::string identity() const = 0;
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

inline FinishReason parse_finish_reason(std::string_view s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  fail(Errc::parse_error, "unknown finish_reason \"" + std::string(s) + "\"");
}

struct GeneratorReply {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
};

struct GenerationParams {
  std::size_t max_tokens = 256;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

class Generator {
 public:
  virtual ~Generator() = default;
  /// Throws Error(backend_unreachable | timeout | backend_error) on failure.
  virtual GeneratorReply generate(const Payload& elements, const GenerationParams& params) const = 0;
  virtual std::string identity() const = 0;
};

/// Validating front door for every embedding backend.
inline std::vector<EmbeddingVector> embed(const Embedder& backend, const std::vector<Payload>& items, EmbedRole role,
                                          const std::optional<std::string>& instruction,
                                          const DimensionLadder& ladder) {
  require(!items.empty(), Errc::precondition, "no items to embed");
  for (const auto& item : items) require(!item.empty(), Errc::invalid_input, "empty item");
  if (role == EmbedRole::query) {
    require(instruction.has_value(), Errc::precondition, "query embedding requires an instruction");
  } else {
    require(!instruction.has_value(), Errc::precondition, "document embedding takes no instruction");
  }
  auto out = backend.embed_batch(items, role, instruction, ladder.full());
  if (out.size() != items.size()) {
    fail(Errc::backend_error, backend.identity() + " returned " + std::to_string(out.size()) + " vectors for " +
                                  std::to_string(items.size()) + " items");
  }
  for (const auto& v : out) v.check_ladder(ladder);
  return out;
}

inline GeneratorReply generate(const Generator& backend, const Payload& elements, const GenerationParams& params) {
  require(!elements.empty(), Errc::precondition, "generation payload is empty");
  return backend.generate(elements, params);
}

// ---------------------------------------------------------------------------
// Reference embedder

/// Bucket hash for one text token: FNV-1a over the token bytes, a 0xFF
/// separator, then the element index as u32 little-endian.
inline std::uint64_t token_hash(std::string_view token, std::uint32_t element_index) noexcept {
  return Fnv1a64{}.update(token).update_byte(0xFF).update_u32le(element_index).digest();
}

inline constexpr std::uint32_t kInstructionElementIndex = 0xFFFFFFFFu;

/// Deterministic signed feature-hashing embedder. Text tokens add +-1, images
/// +-4, instruction tokens +-0.5; the sign is bit 63 of the hash and the bucket
/// is the hash mod dim. If the leading dim/8 buckets are all zero (which
/// includes the all-zero vector) bucket 0 is bumped by +1, so every prefix of
/// at least dim/8 is non-zero. The result is L2-normalised.
inline EmbeddingVector reference_embed(const Payload& item, EmbedRole role,
                                       const std::optional<std::string>& instruction, std::size_t dim) {
  require(dim >= 8, Errc::precondition, "reference embedder needs dim >= 8");
  std::vector<double> acc(dim, 0.0);
  auto add = [&](std::uint64_t h, double weight) {
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    acc[h % dim] += sign * weight;
  };
  for (std::size_t i = 0; i < item.size(); ++i) {
    if (const auto* t = std::get_if<TextSegment>(&item[i])) {
      for (const auto& span : token_spans(t->text)) {
        add(token_hash(std::string_view(t->text).substr(span.begin, span.end - span.begin),
                       static_cast<std::uint32_t>(i)),
            1.0);
      }
    } else {
      add(fnv1a64(std::get<ImageRef>(item[i]).uri), 4.0);
    }
  }
  if (role == EmbedRole::query && instruction) {
    for (const auto& span : token_spans(*instruction)) {
      add(token_hash(std::string_view(*instruction).substr(span.begin, span.end - span.begin),
                     kInstructionElementIndex),
          0.5);
    }
  }
  if (prefix_norm(acc, dim / 8) == 0.0) acc[0] += 1.0;
  const double norm = prefix_norm(acc, dim);
  for (auto& v : acc) v /= norm;
  return EmbeddingVector(std::move(acc));
}

class ReferenceEmbedder final : public Embedder {
 public:
  std::vector<EmbeddingVector> embed_batch(const std::vector<Payload>& items, EmbedRole role,
                                           const std::optional<std::string>& instruction,
                                           std::size_t dim) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(reference_embed(item, role, instruction, dim));
    return out;
  }
  std::string identity() const override { return "reference:fnv1a-feature-hash"; }
};

// ---------------------------------------------------------------------------
// Scripted generator

/// Lookup key for a generation payload: FNV-1a of its canonical element JSON.
inline std::string fixture_key(const Payload& elements) { return hex64(fnv1a64(payload_to_json(elements).dump())); }

/// Replies from a fixture table. Lookup order: exact payload key, then
/// substring rules in insertion order (a rule fires when all of its needles
/// occur in the flattened payload text), then the fallback text.
class ScriptedGenerator final : public Generator {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string reply;
  };

  explicit ScriptedGenerator(std::string fallback = "UNKNOWN") : fallback_(std::move(fallback)) {}

  ScriptedGenerator& add_reply(std::string key, std::string text) {
    replies_[std::move(key)] = std::move(text);
    return *this;
  }

  ScriptedGenerator& add_reply_for(const Payload& elements, std::string text) {
    return add_reply(fixture_key(elements), std::move(text));
  }

  ScriptedGenerator& add_rule(std::vector<std::string> contains, std::string reply) {
    rules_.push_back({std::move(contains), std::move(reply)});
    return *this;
  }

  GeneratorReply generate(const Payload& elements, const GenerationParams&) const override {
    if (auto it = replies_.find(fixture_key(elements)); it != replies_.end()) return {it->second, FinishReason::stop};
    if (!rules_.empty()) {
      const std::string text = flatten_text(elements);
      for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& needle : rule.contains) {
          if (text.find(needle) == std::string::npos) {
            all = false;
            break;
          }
        }
        if (all) return {rule.reply, FinishReason::stop};
      }
    }
    return {fallback_, FinishReason::stop};
  }

  std::string identity() const override { return "scripted:" + hex64(fnv1a64(to_json().dump())); }

  /// {"fallback": str, "replies": {key: text}, "rules": [{"contains": [str...], "reply": str}]}
  Json to_json() const {
    Json j;
    j["fallback"] = fallback_;
    j["replies"] = Json::object();
    for (const auto& [k, v] : replies_) j["replies"][k] = v;
    j["rules"] = Json::array();
    for (const auto& r : rules_) j["rules"].push_back({{"contains", r.contains}, {"reply", r.reply}});
    return j;
  }

  static ScriptedGenerator from_json(const Json& j) {
    if (!j.is_object()) fail(Errc::parse_error, "fixture file must hold an object");
    ScriptedGenerator g(json_opt_string(j, "fallback").value_or("UNKNOWN"));
    if (auto it = j.find("replies"); it != j.end()) {
      if (!it->is_object()) fail(Errc::parse_error, "\"replies\" must be an object");
      for (const auto& [k, v] : it->items()) g.add_reply(k, v.get<std::string>());
    }
    if (auto it = j.find("rules"); it != j.end()) {
      if (!it->is_array()) fail(Errc::parse_error, "\"rules\" must be an array");
      for (const auto& r : *it) {
        std::vector<std::string> needles;
        const Json& c = json_field(r, "contains");
        if (c.is_string()) {
          needles.push_back(c.get<std::string>());
        } else {
          needles = c.get<std::vector<std::string>>();
        }
        g.add_rule(std::move(needles), json_string(r, "reply"));
      }
    }
    return g;
  }

  static ScriptedGenerator load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot read fixtures " + path);
    try {
      return from_json(Json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse_error, path + ": " + e.what());
    }
  }

 private:
  std::string fallback_;
  std::map<std::string, std::string> replies_;
  std::vector<Rule> rules_;
};

// ---------------------------------------------------------------------------
// Wire protocol codec (shared by the HTTP client and any server)

inline Json encode_embed_request(const std::vector<Payload>& items, EmbedRole role,
                                 const std::optional<std::string>& instruction, std::size_t dim) {
  Json j;
  j["role"] = to_string(role);
  j["instruction"] = instruction ? Json(*instruction) : Json(nullptr);
  j["dim"] = dim;
  Json arr = Json::array();
  for (const auto& item : items) arr.push_back({{"elements", payload_to_json(item)}});
  j["items"] = std::move(arr);
  return j;
}

struct EmbedRequest {
  EmbedRole role = EmbedRole::document;
  std::optional<std::string> instruction;
  std::size_t dim = 0;
  std::vector<Payload> items;
};

inline EmbedRequest decode_embed_request(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "request must be an object");
  EmbedRequest r;
  r.role = parse_role(json_string(j, "role"));
  r.instruction = json_opt_string(j, "instruction");
  r.dim = json_uint(j, "dim");
  const Json& items = json_field(j, "items");
  if (!items.is_array()) fail(Errc::parse_error, "\"items\" must be an array");
  for (const auto& it : items) r.items.push_back(payload_from_json(json_field(it, "elements")));
  return r;
}

inline Json encode_embed_response(const std::vector<EmbeddingVector>& vectors, std::size_t dim) {
  Json j;
  j["dim"] = dim;
  Json arr = Json::array();
  for (const auto& v : vectors) arr.push_back(v.values());
  j["embeddings"] = std::move(arr);
  return j;
}

inline std::vector<EmbeddingVector> decode_embed_response(const Json& j, std::size_t expected_dim) {
  if (!j.is_object()) fail(Errc::parse_error, "response must be an object");
  const std::size_t dim = json_uint(j, "dim");
  if (dim != expected_dim) {
    fail(Errc::dimension_mismatch,
         "backend answered dim " + std::to_string(dim) + ", expected " + std::to_string(expected_dim));
  }
  std::vector<EmbeddingVector> out;
  for (const auto& row : json_field(j, "embeddings")) {
    auto values = row.get<std::vector<double>>();
    if (values.size() != dim) fail(Errc::dimension_mismatch, "embedding row length differs from dim");
    out.emplace_back(std::move(values));
  }
  return out;
}

inline Json encode_generate_request(const Payload& elements, const GenerationParams& params) {
  Json j;
  j["elements"] = payload_to_json(elements);
  j["max_tokens"] = params.max_tokens;
  j["temperature"] = params.temperature;
  j["seed"] = params.seed ? Json(*params.seed) : Json(nullptr);
  return j;
}

inline std::pair<Payload, GenerationParams> decode_generate_request(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "request must be an object");
  GenerationParams p;
  p.max_tokens = json_uint(j, "max_tokens");
  const Json& t = json_field(j, "temperature");
  if (!t.is_number()) fail(Errc::parse_error, "\"temperature\" must be a number");
  p.temperature = t.get<double>();
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) p.seed = it->get<std::uint64_t>();
  return {payload_from_json(json_field(j, "elements")), p};
}

inline Json encode_generate_response(const GeneratorReply& r) {
  return Json{{"text", r.text}, {"finish_reason", to_string(r.finish_reason)}};
}

inline GeneratorReply decode_generate_response(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "response must be an object");
  GeneratorReply r;
  r.finish_reason = parse_finish_reason(json_string(j, "finish_reason"));
  if (r.finish_reason != FinishReason::error) r.text = json_string(j, "text");
  return r;
}

}  // namespace mrag
