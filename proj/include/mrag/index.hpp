#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "mrag/embedding.hpp"
#include "mrag/error.hpp"

namespace mrag {

struct SearchHit {
  std::string chunk_id;
  double score = 0.0;
  std::size_t rank = 0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

namespace detail {

// Little-endian byte packing for the on-disk formats.

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes(raw, sizeof(T));
  }
  void str(const std::string& s) {
    le<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& data() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) fail(Errc::truncated, "file ends inside a record");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename T>
  T le() {
    auto raw = take(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, raw.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = le<std::uint32_t>();
    return std::string(take(n));
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(Errc::io_error, "write failure on " + path);
}

/// Descending score, ascending row (row order is ascending id order).
struct HitOrder {
  const std::vector<double>* scores;
  bool operator()(std::size_t a, std::size_t b) const noexcept {
    const double sa = (*scores)[a];
    const double sb = (*scores)[b];
    if (sa != sb) return sa > sb;
    return a < b;
  }
};

}  // namespace detail

/// Exact dense index over float32 rows with per-rung cached prefix norms.
/// Immutable after build; concurrent searches are safe.
class DenseIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  static DenseIndex build(std::vector<std::pair<std::string, EmbeddingVector>> entries, const DimensionLadder& ladder) {
    require(!entries.empty(), Errc::empty_input, "no embeddings to index");
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      require(entries[i].first != entries[i - 1].first, Errc::duplicate_id, "id " + entries[i].first);
    }
    DenseIndex ix(ladder);
    const std::size_t full = ladder.full();
    ix.ids_.reserve(entries.size());
    ix.matrix_.reserve(entries.size() * full);
    for (const auto& [id, vec] : entries) {
      if (vec.dim() != full) {
        fail(Errc::dimension_mismatch,
             "embedding " + id + " has dim " + std::to_string(vec.dim()) + ", ladder expects " + std::to_string(full));
      }
      ix.ids_.push_back(id);
      for (double v : vec.values()) ix.matrix_.push_back(static_cast<float>(v));
    }
    ix.cache_norms();
    return ix;
  }

  static DenseIndex build(const std::map<std::string, EmbeddingVector>& embeddings, const DimensionLadder& ladder) {
    return build(std::vector<std::pair<std::string, EmbeddingVector>>(embeddings.begin(), embeddings.end()), ladder);
  }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const DimensionLadder& ladder() const noexcept { return ladder_; }
  std::size_t full_dim() const noexcept { return ladder_.full(); }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(matrix_).subspan(i * full_dim(), full_dim());
  }

  /// Cached L2 norm of row i's prefix at ladder rung `rung`.
  double cached_norm(std::size_t i, std::size_t rung) const noexcept { return norms_[i * ladder_.size() + rung]; }

  /// Exact top-k by prefix cosine at `dim`, full scan.
  std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k, std::size_t dim) const {
    require(k >= 1, Errc::invalid_input, "k must be >= 1");
    const std::size_t rung = ladder_.position(dim);
    require(query.dim() == full_dim(), Errc::dimension_mismatch,
            "query dim " + std::to_string(query.dim()) + " != index dim " + std::to_string(full_dim()));
    const double qn = prefix_norm(query.values(), dim);
    require(qn > 0.0, Errc::invalid_input, "query prefix is all zero");

    std::vector<double> scores(size());
    for (std::size_t i = 0; i < size(); ++i) scores[i] = row_dot(i, query, dim) / (qn * cached_norm(i, rung));
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      detail::HitOrder{&scores});
    return to_hits(order, scores, take);
  }

  /// Two-stage search: m*k candidates at coarse_dim, reranked at full dim.
  std::vector<SearchHit> coarse_to_fine(const EmbeddingVector& query, std::size_t k, std::size_t coarse_dim,
                                        std::size_t multiplier) const {
    require(k >= 1, Errc::invalid_input, "k must be >= 1");
    require(multiplier >= 1, Errc::invalid_input, "multiplier must be >= 1");
    require(ladder_.contains(coarse_dim), Errc::invalid_input,
            "dimension " + std::to_string(coarse_dim) + " is not in the ladder");
    require(coarse_dim < full_dim(), Errc::invalid_input, "coarse dimension must be below the full dimension");

    const auto pool = search(query, multiplier * k, coarse_dim);
    const double qn = prefix_norm(query.values(), full_dim());
    std::vector<std::size_t> rows;
    rows.reserve(pool.size());
    for (const auto& hit : pool) rows.push_back(row_of(hit.chunk_id));

    std::vector<double> scores(size(), 0.0);
    for (auto r : rows) scores[r] = row_dot(r, query, full_dim()) / (qn * cached_norm(r, 0));
    const std::size_t take = std::min(k, rows.size());
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end(),
                      detail::HitOrder{&scores});
    return to_hits(rows, scores, take);
  }

  void save(const std::string& path) const {
    detail::ByteWriter w;
    w.bytes("MRLX", 4);
    w.le<std::uint32_t>(kFormatVersion);
    w.le<std::uint64_t>(size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(full_dim()));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(ladder_.size()));
    for (auto d : ladder_.dims()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (const auto& id : ids_) w.str(id);
    for (float v : matrix_) w.le<float>(v);
    detail::write_file(path, w.data());
  }

  static DenseIndex load(const std::string& path) {
    const std::string data = detail::read_file(path);
    detail::ByteReader r(data);
    if (data.size() < 4 || data.compare(0, 4, "MRLX") != 0) fail(Errc::bad_magic, path + " is not an MRLX index");
    r.take(4);
    const auto version = r.le<std::uint32_t>();
    if (version != kFormatVersion) {
      fail(Errc::version_mismatch, path + " has format version " + std::to_string(version) + ", expected " +
                                       std::to_string(kFormatVersion));
    }
    const auto count = r.le<std::uint64_t>();
    const auto full = r.le<std::uint32_t>();
    const auto rungs = r.le<std::uint8_t>();
    std::vector<std::size_t> dims;
    for (std::uint8_t i = 0; i < rungs; ++i) dims.push_back(r.le<std::uint32_t>());
    DenseIndex ix{DimensionLadder(std::move(dims))};
    require(ix.full_dim() == full, Errc::parse_error, "ladder head does not match full_dim");
    for (std::uint64_t i = 0; i < count; ++i) ix.ids_.push_back(r.str());
    const std::string_view raw = r.take(count * full * sizeof(float));
    detail::ByteReader mr(raw);
    ix.matrix_.resize(count * full);
    for (auto& v : ix.matrix_) v = mr.le<float>();
    require(r.done(), Errc::parse_error, path + " has trailing bytes");
    for (std::size_t i = 1; i < ix.ids_.size(); ++i) {
      require(ix.ids_[i - 1] < ix.ids_[i], Errc::parse_error, "ids are not strictly ascending");
    }
    ix.cache_norms();
    return ix;
  }

 private:
  explicit DenseIndex(DimensionLadder ladder) : ladder_(std::move(ladder)) {}

  double row_dot(std::size_t i, const EmbeddingVector& q, std::size_t dim) const noexcept {
    const auto r = row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dot += static_cast<double>(r[j]) * q[j];
    return dot;
  }

  /// One pass per row; the running sum of squares is sampled at each rung, so
  /// cached values equal a fresh sequential recomputation bit for bit.
  void cache_norms() {
    const std::size_t rungs = ladder_.size();
    norms_.assign(size() * rungs, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      const auto r = row(i);
      double s = 0.0;
      std::size_t j = 0;
      for (std::size_t k = rungs; k-- > 0;) {
        for (; j < ladder_[k]; ++j) s += static_cast<double>(r[j]) * static_cast<double>(r[j]);
        norms_[i * rungs + k] = std::sqrt(s);
        require(s > 0.0, Errc::invalid_input,
                "row " + ids_[i] + " has an all-zero prefix of length " + std::to_string(ladder_[k]));
      }
    }
  }

  std::size_t row_of(const std::string& id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::vector<SearchHit> to_hits(const std::vector<std::size_t>& order, const std::vector<double>& scores,
                                 std::size_t take) const {
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) hits.push_back({ids_[order[r]], scores[order[r]], r + 1});
    return hits;
  }

  std::vector<std::string> ids_;
  std::vector<float> matrix_;
  DimensionLadder ladder_;
  std::vector<double> norms_;
};

/// Reference top-k: recomputes every norm and dot product from scratch on the
/// float32-quantised vectors (the index's storage precision) and fully sorts.
/// Uses the same ordering rule as DenseIndex::search.
inline std::vector<SearchHit> brute_force_oracle(const std::map<std::string, EmbeddingVector>& vectors,
                                                 const EmbeddingVector& query, std::size_t k, std::size_t dim) {
  require(k >= 1, Errc::invalid_input, "k must be >= 1");
  require(dim >= 1 && dim <= query.dim(), Errc::invalid_input, "dimension out of range");
  struct Scored {
    const std::string* id;
    double score;
  };
  std::vector<Scored> all;
  all.reserve(vectors.size());
  double qq = 0.0;
  for (std::size_t j = 0; j < dim; ++j) qq += query[j] * query[j];
  for (const auto& [id, v] : vectors) {
    require(v.dim() >= dim, Errc::dimension_mismatch, "vector " + id + " shorter than dim");
    double dot = 0.0;
    double vv = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = static_cast<double>(static_cast<float>(v[j]));
      dot += x * query[j];
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = static_cast<double>(static_cast<float>(v[j]));
      vv += x * x;
    }
    all.push_back({&id, dot / (std::sqrt(qq) * std::sqrt(vv))});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.id < *b.id;
  });
  std::vector<SearchHit> out;
  for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out.push_back({*all[r].id, all[r].score, r + 1});
  return out;
}

// ---------------------------------------------------------------------------
// Embedding matrix file ("MRLE"): magic, version u32, count u64, dim u32,
// length-prefixed ids, then row-major float64 values, all little-endian.

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

inline void save_embeddings(const std::string& path, const std::vector<std::pair<std::string, EmbeddingVector>>& rows) {
  require(!rows.empty(), Errc::empty_input, "no embeddings to write");
  const std::size_t dim = rows.front().second.dim();
  detail::ByteWriter w;
  w.bytes("MRLE", 4);
  w.le<std::uint32_t>(kEmbeddingFileVersion);
  w.le<std::uint64_t>(rows.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(dim));
  for (const auto& [id, v] : rows) w.str(id);
  for (const auto& [id, v] : rows) {
    require(v.dim() == dim, Errc::dimension_mismatch, "embedding " + id + " has a different dim");
    for (double x : v.values()) w.le<double>(x);
  }
  detail::write_file(path, w.data());
}

inline std::vector<std::pair<std::string, EmbeddingVector>> load_embeddings(const std::string& path) {
  const std::string data = detail::read_file(path);
  if (data.size() < 4 || data.compare(0, 4, "MRLE") != 0) fail(Errc::bad_magic, path + " is not an MRLE file");
  detail::ByteReader r(data);
  r.take(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kEmbeddingFileVersion) fail(Errc::version_mismatch, path + ": unsupported version");
  const auto count = r.le<std::uint64_t>();
  const auto dim = r.le<std::uint32_t>();
  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(r.str());
  std::vector<std::pair<std::string, EmbeddingVector>> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::vector<double> values(dim);
    for (auto& v : values) v = r.le<double>();
    out.emplace_back(std::move(ids[i]), EmbeddingVector(std::move(values)));
  }
  require(r.done(), Errc::parse_error, path + " has trailing bytes");
  return out;
}

}  // namespace mrag
