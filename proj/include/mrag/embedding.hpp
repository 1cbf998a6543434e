#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrag/error.hpp"

namespace mrag {

/// Matryoshka dimension ladder: strictly decreasing prefix lengths, the first
/// one being the full embedding dimension.
class DimensionLadder {
 public:
  DimensionLadder() : DimensionLadder({2048, 1024, 512, 256}) {}

  DimensionLadder(std::initializer_list<std::size_t> dims) : DimensionLadder(std::vector<std::size_t>(dims)) {}

  explicit DimensionLadder(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    require(!dims_.empty(), Errc::invalid_input, "dimension ladder is empty");
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      require(dims_[i] > 0, Errc::invalid_input, "ladder dimensions must be positive");
      if (i > 0) require(dims_[i] < dims_[i - 1], Errc::invalid_input, "ladder must be strictly decreasing");
    }
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t full() const noexcept { return dims_.front(); }
  std::size_t smallest() const noexcept { return dims_.back(); }
  std::size_t size() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t i) const noexcept { return dims_[i]; }

  bool contains(std::size_t dim) const noexcept {
    for (auto d : dims_) {
      if (d == dim) return true;
    }
    return false;
  }

  std::size_t position(std::size_t dim) const {
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == dim) return i;
    }
    fail(Errc::invalid_input, "dimension " + std::to_string(dim) + " is not in the ladder");
  }

  friend bool operator==(const DimensionLadder&, const DimensionLadder&) = default;

 private:
  std::vector<std::size_t> dims_;
};

inline double prefix_norm(std::span<const double> v, std::size_t dim) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

/// A finite, non-zero, fixed-length embedding.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    require(!values_.empty(), Errc::invalid_input, "embedding has zero length");
    for (double v : values_) require(std::isfinite(v), Errc::invalid_input, "embedding has a non-finite value");
    require(prefix_norm(values_, values_.size()) > 0.0, Errc::invalid_input, "embedding is all zero");
  }

  /// Also rejects vectors whose prefix at any ladder rung is all zero.
  EmbeddingVector(std::vector<double> values, const DimensionLadder& ladder) : EmbeddingVector(std::move(values)) {
    check_ladder(ladder);
  }

  void check_ladder(const DimensionLadder& ladder) const {
    if (dim() != ladder.full()) {
      fail(Errc::dimension_mismatch,
           "embedding dim " + std::to_string(dim()) + " != ladder full dim " + std::to_string(ladder.full()));
    }
    for (auto d : ladder.dims()) {
      require(prefix_norm(values_, d) > 0.0, Errc::invalid_input,
              "embedding prefix of length " + std::to_string(d) + " is all zero");
    }
  }

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> prefix(std::size_t d) const noexcept { return std::span<const double>(values_).first(d); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

/// Cosine of the independently renormalised length-`dim` prefixes.
inline double prefix_cosine(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  require(dim >= 1 && dim <= a.size() && dim <= b.size(), Errc::invalid_input, "prefix length out of range");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, Errc::invalid_input, "zero-norm prefix");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double prefix_similarity(const EmbeddingVector& a, const EmbeddingVector& b, std::size_t dim) {
  return prefix_cosine(a.values(), b.values(), dim);
}

}  // namespace mrag
