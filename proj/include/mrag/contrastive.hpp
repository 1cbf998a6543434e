#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrag/embedding.hpp"
#include "mrag/error.hpp"
#include "mrag/index.hpp"
#include "mrag/parallel.hpp"
#include "mrag/rng.hpp"

namespace mrag {

struct LossConfig {
  double temperature = 0.02;
  DimensionLadder ladder;
  std::vector<double> raw_weights{1.0, 1.0, 0.2, 0.2};

  void validate() const {
    require(temperature > 0.0 && std::isfinite(temperature), Errc::invalid_input, "temperature must be > 0");
    require(raw_weights.size() == ladder.size(), Errc::invalid_input,
            "need one weight per ladder rung (" + std::to_string(ladder.size()) + "), got " +
                std::to_string(raw_weights.size()));
    for (double w : raw_weights) require(w > 0.0 && std::isfinite(w), Errc::invalid_input, "weights must be > 0");
  }

  /// raw_weights / sum(raw_weights).
  std::vector<double> normalized_weights() const {
    validate();
    const double total = std::accumulate(raw_weights.begin(), raw_weights.end(), 0.0);
    std::vector<double> w(raw_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = raw_weights[i] / total;
    return w;
  }

  /// Single-rung configuration at the full dimension.
  static LossConfig full_only(std::size_t full_dim, double temperature = 0.02) {
    return LossConfig{temperature, DimensionLadder{full_dim}, {1.0}};
  }
};

namespace detail {

/// -log softmax(z)[0] with a max shift. The off-maximum terms go through
/// log1p so losses near zero keep their relative precision.
inline double positive_xent(std::span<const double> z) {
  std::size_t top = 0;
  for (std::size_t j = 1; j < z.size(); ++j) {
    if (z[j] > z[top]) top = j;
  }
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (j != top) rest += std::exp(z[j] - z[top]);
  }
  return (z[top] - z[0]) + std::log1p(rest);
}

}  // namespace detail

/// -log softmax of the positive logit among {pos, negs...}, logits = sim / tau,
/// evaluated with a max shift so exponents of +-1/tau never overflow.
inline double infonce_from_similarities(double sim_pos, std::span<const double> sim_negs, double temperature) {
  require(temperature > 0.0, Errc::invalid_input, "temperature must be > 0");
  require(!sim_negs.empty(), Errc::invalid_input, "need at least one negative");
  std::vector<double> z{sim_pos / temperature};
  for (double s : sim_negs) z.push_back(s / temperature);
  return detail::positive_xent(z);
}

inline double infonce_at_dim(const EmbeddingVector& q, const EmbeddingVector& pos,
                             const std::vector<EmbeddingVector>& negs, std::size_t dim, double temperature) {
  require(!negs.empty(), Errc::invalid_input, "need at least one negative");
  require(pos.dim() == q.dim(), Errc::dimension_mismatch, "positive dim differs from query dim");
  std::vector<double> sims;
  sims.reserve(negs.size());
  for (const auto& n : negs) {
    require(n.dim() == q.dim(), Errc::dimension_mismatch, "negative dim differs from query dim");
    sims.push_back(prefix_similarity(q, n, dim));
  }
  return infonce_from_similarities(prefix_similarity(q, pos, dim), sims, temperature);
}

inline double mrl_loss(const EmbeddingVector& q, const EmbeddingVector& pos, const std::vector<EmbeddingVector>& negs,
                       const LossConfig& cfg) {
  const auto w = cfg.normalized_weights();
  double total = 0.0;
  for (std::size_t k = 0; k < cfg.ladder.size(); ++k) {
    total += w[k] * infonce_at_dim(q, pos, negs, cfg.ladder[k], cfg.temperature);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Projection head

/// Trainable linear map from frozen base features to the full embedding:
/// h = normalize(W b), W stored row-major (out_dim x in_dim).
class ProjectionHead {
 public:
  ProjectionHead() = default;

  ProjectionHead(std::size_t out_dim, std::size_t in_dim, std::vector<double> weights)
      : out_(out_dim), in_(in_dim), w_(std::move(weights)) {
    require(out_ > 0 && in_ > 0, Errc::invalid_input, "head dimensions must be positive");
    require(w_.size() == out_ * in_, Errc::invalid_input, "weight count does not match head shape");
    for (double v : w_) require(std::isfinite(v), Errc::invalid_input, "head weight is not finite");
  }

  /// Gaussian init with standard deviation 1/sqrt(in_dim).
  static ProjectionHead random(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(out_dim * in_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : w) v = rng.normal() * scale;
    return ProjectionHead(out_dim, in_dim, std::move(w));
  }

  std::size_t out_dim() const noexcept { return out_; }
  std::size_t in_dim() const noexcept { return in_; }
  const std::vector<double>& weights() const noexcept { return w_; }
  std::vector<double>& weights() noexcept { return w_; }

  /// W b without normalisation.
  std::vector<double> apply(std::span<const double> base) const {
    require(base.size() == in_, Errc::dimension_mismatch,
            "base feature dim " + std::to_string(base.size()) + " != head input dim " + std::to_string(in_));
    std::vector<double> h(out_, 0.0);
    for (std::size_t r = 0; r < out_; ++r) {
      const double* row = &w_[r * in_];
      double s = 0.0;
      for (std::size_t c = 0; c < in_; ++c) s += row[c] * base[c];
      h[r] = s;
    }
    return h;
  }

  EmbeddingVector project(std::span<const double> base) const {
    auto h = apply(base);
    const double n = prefix_norm(h, h.size());
    require(n > 0.0, Errc::invalid_input, "degenerate zero projection");
    for (auto& v : h) v /= n;
    return EmbeddingVector(std::move(h));
  }

  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;

  static constexpr std::uint32_t kFormatVersion = 1;

  void save(const std::string& path) const {
    detail::ByteWriter w;
    w.bytes("MRLH", 4);
    w.le<std::uint32_t>(kFormatVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(out_));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(in_));
    for (double v : w_) w.le<double>(v);
    detail::write_file(path, w.data());
  }

  static ProjectionHead load(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 4 || data.compare(0, 4, "MRLH") != 0) fail(Errc::bad_magic, path + " is not an MRLH head");
    detail::ByteReader r(data);
    r.take(4);
    if (r.le<std::uint32_t>() != kFormatVersion) fail(Errc::version_mismatch, path + ": unsupported head version");
    const std::size_t out = r.le<std::uint32_t>();
    const std::size_t in = r.le<std::uint32_t>();
    std::vector<double> w(out * in);
    for (auto& v : w) v = r.le<double>();
    require(r.done(), Errc::parse_error, path + " has trailing bytes");
    return ProjectionHead(out, in, std::move(w));
  }

 private:
  std::size_t out_ = 0;
  std::size_t in_ = 0;
  std::vector<double> w_;
};

/// Base features of one training triplet.
struct TripletFeatures {
  std::vector<double> query;
  std::vector<double> positive;
  std::vector<std::vector<double>> negatives;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as the head weights
};

namespace detail {

/// Loss over the ladder for projected (unnormalised) vectors; row 0 is the
/// query, row 1 the positive, the rest negatives. When `dh` is non-null it
/// receives dL/dh for each row. Cosine is scale-invariant, so the head's
/// output normalisation does not enter the derivative.
inline double mrl_loss_projected(const std::vector<std::vector<double>>& h, const LossConfig& cfg,
                                 const std::vector<double>& weights, std::vector<std::vector<double>>* dh) {
  const std::size_t m = h.size();  // 1 + 1 + N
  const double tau = cfg.temperature;
  if (dh) {
    dh->assign(m, std::vector<double>(h[0].size(), 0.0));
  }
  double total = 0.0;
  std::vector<double> norm(m);
  std::vector<double> cos(m);
  std::vector<double> z(m);
  for (std::size_t k = 0; k < cfg.ladder.size(); ++k) {
    const std::size_t d = cfg.ladder[k];
    for (std::size_t v = 0; v < m; ++v) {
      norm[v] = prefix_norm(h[v], d);
      require(norm[v] > 0.0, Errc::invalid_input, "degenerate zero projection");
    }
    for (std::size_t j = 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += h[0][i] * h[j][i];
      cos[j] = dot / (norm[0] * norm[j]);
      z[j] = cos[j] / tau;
    }
    const std::span<const double> logits(z.data() + 1, m - 1);
    total += weights[k] * positive_xent(logits);
    if (!dh) continue;

    // Softmax over the logits; 1 - p(pos) is summed from the negatives so it
    // stays accurate when the positive dominates.
    const double z_max = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - z_max);
    double neg_mass = 0.0;
    for (std::size_t j = 2; j < m; ++j) neg_mass += std::exp(z[j] - z_max) / sum;

    auto& gq = (*dh)[0];
    for (std::size_t j = 1; j < m; ++j) {
      const double p = std::exp(z[j] - z_max) / sum;
      const double g = weights[k] * (j == 1 ? -neg_mass : p) / tau;  // dL/dcos_j
      if (g == 0.0) continue;
      const double inv_qj = 1.0 / (norm[0] * norm[j]);
      const double cq = cos[j] / (norm[0] * norm[0]);
      const double cj = cos[j] / (norm[j] * norm[j]);
      auto& gj = (*dh)[j];
      for (std::size_t i = 0; i < d; ++i) {
        gq[i] += g * (h[j][i] * inv_qj - cq * h[0][i]);
        gj[i] += g * (h[0][i] * inv_qj - cj * h[j][i]);
      }
    }
  }
  return total;
}

inline std::vector<const std::vector<double>*> triplet_rows(const TripletFeatures& t) {
  std::vector<const std::vector<double>*> rows{&t.query, &t.positive};
  for (const auto& n : t.negatives) rows.push_back(&n);
  return rows;
}

}  // namespace detail

inline double mrl_loss(const ProjectionHead& head, const TripletFeatures& t, const LossConfig& cfg) {
  require(!t.negatives.empty(), Errc::invalid_input, "need at least one negative");
  require(head.out_dim() == cfg.ladder.full(), Errc::dimension_mismatch, "head output dim != ladder full dim");
  const auto w = cfg.normalized_weights();
  std::vector<std::vector<double>> h;
  for (const auto* b : detail::triplet_rows(t)) h.push_back(head.apply(*b));
  return detail::mrl_loss_projected(h, cfg, w, nullptr);
}

/// Loss and analytic dL/dW through projection, prefix truncation,
/// renormalisation and the weighted InfoNCE sum.
inline LossAndGradient mrl_loss_gradient(const ProjectionHead& head, const TripletFeatures& t, const LossConfig& cfg) {
  require(!t.negatives.empty(), Errc::invalid_input, "need at least one negative");
  require(head.out_dim() == cfg.ladder.full(), Errc::dimension_mismatch, "head output dim != ladder full dim");
  const auto w = cfg.normalized_weights();
  const auto rows = detail::triplet_rows(t);
  std::vector<std::vector<double>> h;
  h.reserve(rows.size());
  for (const auto* b : rows) h.push_back(head.apply(*b));
  std::vector<std::vector<double>> dh;
  LossAndGradient out;
  out.loss = detail::mrl_loss_projected(h, cfg, w, &dh);
  out.grad.assign(head.weights().size(), 0.0);
  const std::size_t in = head.in_dim();
  for (std::size_t v = 0; v < rows.size(); ++v) {
    const auto& b = *rows[v];
    for (std::size_t r = 0; r < head.out_dim(); ++r) {
      const double g = dh[v][r];
      if (g == 0.0) continue;
      double* dst = &out.grad[r * in];
      for (std::size_t c = 0; c < in; ++c) dst[c] += g * b[c];
    }
  }
  for (double g : out.grad) require(std::isfinite(g), Errc::invalid_input, "non-finite gradient");
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

struct TrainOptions {
  double learning_rate = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), Errc::invalid_input,
            "learning rate must be finite and >= 0");
    require(epochs >= 1, Errc::invalid_input, "epochs must be >= 1");
    require(batch_size >= 1, Errc::invalid_input, "batch size must be >= 1");
  }
};

struct EpochLog {
  std::size_t epoch;
  double mean_loss;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  ProjectionHead head;
  /// Entry 0 evaluates the initial head; entry e >= 1 is the mean of the
  /// per-example losses seen during epoch e (each taken before its batch update).
  std::vector<EpochLog> log;
};

inline double mean_loss(const ProjectionHead& head, const std::vector<TripletFeatures>& data, const LossConfig& cfg) {
  double s = 0.0;
  for (const auto& t : data) s += mrl_loss(head, t, cfg);
  return s / static_cast<double>(data.size());
}

/// Mini-batch gradient descent on the MRL objective. Examples are reshuffled
/// each epoch from the seed; batch gradients are averaged and summed in
/// example order, so the run is deterministic for any job count.
inline TrainResult train_head(const std::vector<TripletFeatures>& data, ProjectionHead initial, const LossConfig& cfg,
                              const TrainOptions& opt) {
  require(!data.empty(), Errc::invalid_input, "no training triplets");
  cfg.validate();
  opt.validate();

  TrainResult result{std::move(initial), {}};
  auto& head = result.head;
  result.log.push_back({0, mean_loss(head, data, cfg)});

  Rng rng(opt.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LossAndGradient> slots;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += opt.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + opt.batch_size);
      slots.assign(hi - lo, {});
      parallel_for(hi - lo, opt.jobs, [&](std::size_t i) { slots[i] = mrl_loss_gradient(head, data[order[lo + i]], cfg); });
      const double scale = opt.learning_rate / static_cast<double>(hi - lo);
      auto& w = head.weights();
      for (const auto& s : slots) {
        epoch_loss += s.loss;
        if (opt.learning_rate == 0.0) continue;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * s.grad[i];
      }
    }
    result.log.push_back({epoch, epoch_loss / static_cast<double>(data.size())});
  }
  return result;
}

}  // namespace mrag
