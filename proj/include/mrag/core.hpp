#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mrag/error.hpp"
#include "mrag/text.hpp"

namespace mrag {

using Json = nlohmann::ordered_json;

struct TextSegment {
  std::string text;
  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

/// Images are carried by reference only; bytes never enter the library.
struct ImageRef {
  std::string uri;
  std::optional<std::string> content_hash;
  std::optional<std::string> alt;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

using Element = std::variant<TextSegment, ImageRef>;

/// An ordered mixed-modal sequence: a query, a document body, a prompt.
using Payload = std::vector<Element>;

inline bool is_text(const Element& e) noexcept { return std::holds_alternative<TextSegment>(e); }
inline bool is_image(const Element& e) noexcept { return std::holds_alternative<ImageRef>(e); }

inline std::size_t image_count(const Payload& p) noexcept {
  std::size_t n = 0;
  for (const auto& e : p) n += is_image(e) ? 1 : 0;
  return n;
}

inline std::size_t text_token_count(const Payload& p) {
  std::size_t n = 0;
  for (const auto& e : p) {
    if (const auto* t = std::get_if<TextSegment>(&e)) n += count_tokens(t->text);
  }
  return n;
}

/// Text elements joined by newlines; images rendered as "<image>".
inline std::string flatten_text(const Payload& p) {
  std::string out;
  for (const auto& e : p) {
    if (!out.empty()) out += '\n';
    if (const auto* t = std::get_if<TextSegment>(&e)) {
      out += t->text;
    } else {
      out += "<image>";
    }
  }
  return out;
}

struct MixedModalDoc {
  std::string id;
  Payload elements;
  std::optional<std::string> source;
  friend bool operator==(const MixedModalDoc&, const MixedModalDoc&) = default;
};

enum class ImageBucket : std::uint8_t { none = 0, one = 1, many = 2 };

struct ModalityProfile {
  bool has_text = false;
  ImageBucket image_count_bucket = ImageBucket::none;

  friend bool operator==(const ModalityProfile&, const ModalityProfile&) = default;
  friend auto operator<=>(const ModalityProfile&, const ModalityProfile&) = default;
};

inline ModalityProfile modality_profile(const Payload& elements) noexcept {
  ModalityProfile p;
  std::size_t images = 0;
  for (const auto& e : elements) {
    if (is_text(e)) {
      p.has_text = true;
    } else {
      ++images;
    }
  }
  p.image_count_bucket = images == 0 ? ImageBucket::none : images == 1 ? ImageBucket::one : ImageBucket::many;
  return p;
}

inline std::string to_string(const ModalityProfile& p) {
  static constexpr const char* kBuckets[] = {"0", "1", "2+"};
  return std::string(p.has_text ? "text" : "notext") + "/img" + kBuckets[static_cast<int>(p.image_count_bucket)];
}

struct Chunk {
  std::string id;
  std::string doc_id;
  std::size_t seq = 0;
  Payload elements;
  std::size_t text_token_count = 0;
  ModalityProfile modality_profile;
  /// First element is the tail of a text segment split across the previous chunk.
  bool continued = false;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

inline ModalityProfile modality_profile(const Chunk& chunk) noexcept { return modality_profile(chunk.elements); }

inline std::string chunk_id(std::string_view doc_id, std::size_t seq) {
  return std::string(doc_id) + "#" + std::to_string(seq);
}

/// Builds a chunk with its derived fields filled in.
inline Chunk make_chunk(std::string doc_id, std::size_t seq, Payload elements, bool continued = false) {
  Chunk c;
  c.id = chunk_id(doc_id, seq);
  c.doc_id = std::move(doc_id);
  c.seq = seq;
  c.elements = std::move(elements);
  c.text_token_count = text_token_count(c.elements);
  c.modality_profile = modality_profile(c.elements);
  c.continued = continued;
  return c;
}

/// Concatenates chunks in the given order back into one element sequence,
/// re-joining text segments that were split at a chunk boundary.
inline Payload reassemble(const std::vector<const Chunk*>& ordered) {
  Payload out;
  for (const Chunk* c : ordered) {
    for (std::size_t i = 0; i < c->elements.size(); ++i) {
      const auto& e = c->elements[i];
      if (i == 0 && c->continued && !out.empty() && is_text(out.back()) && is_text(e)) {
        std::get<TextSegment>(out.back()).text += std::get<TextSegment>(e).text;
      } else {
        out.push_back(e);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON mapping

inline bool is_hex(std::string_view s) noexcept {
  for (char c : s) {
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    if (!ok) return false;
  }
  return !s.empty();
}

inline Json element_to_json(const Element& e) {
  Json j;
  if (const auto* t = std::get_if<TextSegment>(&e)) {
    j["type"] = "text";
    j["text"] = t->text;
  } else {
    const auto& img = std::get<ImageRef>(e);
    j["type"] = "image";
    j["uri"] = img.uri;
    if (img.content_hash) j["sha256"] = *img.content_hash;
    if (img.alt) j["alt"] = *img.alt;
  }
  return j;
}

inline Json payload_to_json(const Payload& p) {
  Json arr = Json::array();
  for (const auto& e : p) arr.push_back(element_to_json(e));
  return arr;
}

inline const Json& json_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(Errc::parse_error, std::string("missing field \"") + key + "\"");
  return *it;
}

inline std::string json_string(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_string()) fail(Errc::parse_error, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> json_opt_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(Errc::parse_error, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

inline std::uint64_t json_uint(const Json& j, const char* key) {
  const Json& v = json_field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    fail(Errc::parse_error, std::string("field \"") + key + "\" must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline Element element_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "element must be an object");
  const std::string type = json_string(j, "type");
  if (type == "text") {
    std::string text = json_string(j, "text");
    if (trim(text).empty()) fail(Errc::parse_error, "text element is empty");
    return TextSegment{std::move(text)};
  }
  if (type == "image") {
    ImageRef img{json_string(j, "uri"), json_opt_string(j, "sha256"), json_opt_string(j, "alt")};
    if (img.uri.empty()) fail(Errc::parse_error, "image element has empty uri");
    if (img.content_hash && !is_hex(*img.content_hash)) fail(Errc::parse_error, "sha256 is not hex");
    return img;
  }
  fail(Errc::parse_error, "unknown element type \"" + type + "\"");
}

inline Payload payload_from_json(const Json& arr) {
  if (!arr.is_array()) fail(Errc::parse_error, "elements must be an array");
  Payload p;
  p.reserve(arr.size());
  for (const auto& e : arr) p.push_back(element_from_json(e));
  return p;
}

inline Json doc_to_json(const MixedModalDoc& d) {
  Json j;
  j["id"] = d.id;
  if (d.source) j["source"] = *d.source;
  j["elements"] = payload_to_json(d.elements);
  return j;
}

inline MixedModalDoc doc_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "record must be an object");
  MixedModalDoc d{json_string(j, "id"), payload_from_json(json_field(j, "elements")), json_opt_string(j, "source")};
  if (d.id.empty()) fail(Errc::parse_error, "empty document id");
  if (d.elements.empty()) fail(Errc::parse_error, "document has no elements");
  return d;
}

inline Json chunk_to_json(const Chunk& c) {
  Json j;
  j["id"] = c.id;
  j["doc_id"] = c.doc_id;
  j["seq"] = c.seq;
  j["text_token_count"] = c.text_token_count;
  if (c.continued) j["continued"] = true;
  j["elements"] = payload_to_json(c.elements);
  return j;
}

inline Chunk chunk_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::parse_error, "record must be an object");
  Chunk c;
  c.id = json_string(j, "id");
  c.doc_id = json_string(j, "doc_id");
  c.seq = json_uint(j, "seq");
  c.elements = payload_from_json(json_field(j, "elements"));
  if (c.elements.empty()) fail(Errc::parse_error, "chunk has no elements");
  c.text_token_count = json_uint(j, "text_token_count");
  if (auto it = j.find("continued"); it != j.end()) c.continued = it->is_boolean() && it->get<bool>();
  if (c.text_token_count != text_token_count(c.elements)) {
    fail(Errc::parse_error, "text_token_count " + std::to_string(c.text_token_count) +
                                " does not match recomputed count " + std::to_string(text_token_count(c.elements)));
  }
  c.modality_profile = modality_profile(c.elements);
  return c;
}

// ---------------------------------------------------------------------------
// JSONL reading

struct LineError {
  std::size_t line;
  std::string message;
};

enum class Strictness { strict, lenient };

template <typename T>
struct JsonlResult {
  std::vector<T> records;
  std::vector<LineError> skipped;
};

/// Reads a JSONL file record by record. In strict mode the first malformed
/// line aborts with its line number; in lenient mode it is skipped and
/// recorded. Blank lines are ignored.
template <typename Parse>
auto read_jsonl(const std::string& path, Parse&& parse, Strictness mode = Strictness::strict)
    -> JsonlResult<decltype(parse(std::declval<const Json&>()))> {
  using T = decltype(parse(std::declval<const Json&>()));
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot read " + path);
  JsonlResult<T> result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      result.records.push_back(parse(Json::parse(line)));
    } catch (const std::exception& e) {
      if (mode == Strictness::strict) {
        fail(Errc::parse_error, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      result.skipped.push_back({lineno, e.what()});
    }
  }
  if (in.bad()) fail(Errc::io_error, "read failure on " + path);
  return result;
}

/// Writes one compact JSON object per line, LF terminated.
template <typename Range, typename ToJson>
void write_jsonl(const std::string& path, const Range& records, ToJson&& to_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) fail(Errc::io_error, "write failure on " + path);
}

// ---------------------------------------------------------------------------
// Corpus store

/// Documents and chunks in separate id namespaces, insertion order preserved.
/// Built by a single writer, then shared read-only.
class CorpusStore {
 public:
  void add_document(MixedModalDoc doc) {
    if (doc.elements.empty()) fail(Errc::invalid_input, "document " + doc.id + " has no elements");
    if (doc_index_.contains(doc.id)) fail(Errc::duplicate_id, "document " + doc.id);
    doc_index_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
  }

  /// Chunks must point at a stored document unless the store holds chunks only
  /// (e.g. loaded from a chunk file, where parents are not available).
  void add_chunk(Chunk chunk) {
    if (!docs_.empty() && !doc_index_.contains(chunk.doc_id)) {
      fail(Errc::not_found, "chunk " + chunk.id + " refers to unknown document " + chunk.doc_id);
    }
    if (chunk_index_.contains(chunk.id)) fail(Errc::duplicate_id, "chunk " + chunk.id);
    chunk_index_.emplace(chunk.id, chunks_.size());
    chunks_.push_back(std::move(chunk));
  }

  const std::vector<MixedModalDoc>& documents() const noexcept { return docs_; }
  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }

  const MixedModalDoc* find_document(std::string_view id) const {
    auto it = doc_index_.find(std::string(id));
    return it == doc_index_.end() ? nullptr : &docs_[it->second];
  }

  const Chunk* find_chunk(std::string_view id) const {
    auto it = chunk_index_.find(std::string(id));
    return it == chunk_index_.end() ? nullptr : &chunks_[it->second];
  }

  /// Chunks of one document in seq order.
  std::vector<const Chunk*> chunks_of(std::string_view doc_id) const {
    std::vector<const Chunk*> out;
    for (const auto& c : chunks_) {
      if (c.doc_id == doc_id) out.push_back(&c);
    }
    std::sort(out.begin(), out.end(), [](const Chunk* a, const Chunk* b) { return a->seq < b->seq; });
    return out;
  }

  std::size_t document_count() const noexcept { return docs_.size(); }
  std::size_t chunk_count() const noexcept { return chunks_.size(); }

 private:
  std::vector<MixedModalDoc> docs_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::unordered_map<std::string, std::size_t> chunk_index_;
};

inline std::optional<Chunk> get_chunk(const CorpusStore& store, std::string_view id) {
  if (const Chunk* c = store.find_chunk(id)) return *c;
  return std::nullopt;
}

struct IngestReport {
  std::size_t loaded = 0;
  std::vector<LineError> skipped;
};

inline CorpusStore ingest_corpus(const std::string& path, Strictness mode = Strictness::strict,
                                 IngestReport* report = nullptr) {
  auto result = read_jsonl(path, doc_from_json, mode);
  CorpusStore store;
  for (auto& d : result.records) store.add_document(std::move(d));
  if (report) {
    report->loaded = store.document_count();
    report->skipped = std::move(result.skipped);
  }
  return store;
}

inline std::vector<Chunk> read_chunks(const std::string& path, Strictness mode = Strictness::strict,
                                      IngestReport* report = nullptr) {
  auto result = read_jsonl(path, chunk_from_json, mode);
  if (report) {
    report->loaded = result.records.size();
    report->skipped = std::move(result.skipped);
  }
  return std::move(result.records);
}

inline CorpusStore chunk_store(std::vector<Chunk> chunks) {
  CorpusStore store;
  for (auto& c : chunks) store.add_chunk(std::move(c));
  return store;
}

inline void write_corpus(const std::string& path, const std::vector<MixedModalDoc>& docs) {
  write_jsonl(path, docs, doc_to_json);
}

inline void write_chunks(const std::string& path, const std::vector<Chunk>& chunks) {
  write_jsonl(path, chunks, chunk_to_json);
}

}  // namespace mrag
