#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mrag/contrastive.hpp"
#include "support.hpp"

namespace mrag {
namespace {

TEST(InfoNce, EqualSimilaritiesGiveLogOfCandidates) {
  Rng rng(1);
  const auto v = test::random_unit(rng, 2048);
  for (std::size_t n : {1, 2, 5, 9}) {
    const std::vector<EmbeddingVector> negs(n, v);
    for (std::size_t d : {2048, 1024, 512, 256}) {
      EXPECT_NEAR(infonce_at_dim(v, v, negs, d, 0.02), std::log(n + 1.0), 1e-9) << n << " " << d;
    }
  }
}

TEST(InfoNce, SaturatedPositiveKeepsRelativePrecision) {
  // Positive at cosine 1, one negative at 0: loss = log(1 + e^-50).
  const double l = infonce_from_similarities(1.0, std::vector<double>{0.0}, 0.02);
  EXPECT_GT(l, 0.0);
  EXPECT_LT(l, 1e-15);
  EXPECT_NEAR(l / std::exp(-50.0), 1.0, 1e-12);
}

TEST(InfoNce, NeverNegativeAndDecreasesInPositiveSimilarity) {
  const std::vector<double> negs{0.3, -0.2, 0.5};
  double prev = INFINITY;
  for (double s = -1.0; s <= 1.0; s += 0.05) {
    const double l = infonce_from_similarities(s, negs, 0.02);
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(InfoNce, LargeLogitsStayFinite) {
  const double l = infonce_from_similarities(-1.0, std::vector<double>{1.0, 1.0}, 1e-4);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 2.0 / 1e-4 + std::log(2.0), 1e-6);
}

TEST(LossConfig, NormalizesRawWeights) {
  const auto w = LossConfig{}.normalized_weights();
  ASSERT_EQ(w.size(), 4u);
  EXPECT_NEAR(w[0], 5.0 / 12.0, 1e-15);
  EXPECT_NEAR(w[1], 5.0 / 12.0, 1e-15);
  EXPECT_NEAR(w[2], 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(w[3], 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(w[0] + w[1] + w[2] + w[3], 1.0, 1e-12);
}

TEST(LossConfig, RejectsBadSettings) {
  LossConfig c;
  c.temperature = 0.0;
  EXPECT_EQ(test::errc_of([&] { c.validate(); }), Errc::invalid_input);
  c = LossConfig{};
  c.raw_weights = {1.0, 1.0};
  EXPECT_EQ(test::errc_of([&] { c.validate(); }), Errc::invalid_input);
  c.raw_weights = {1.0, 1.0, 0.0, 0.2};
  EXPECT_EQ(test::errc_of([&] { c.validate(); }), Errc::invalid_input);
}

TEST(MrlLoss, SingleRungEqualsInfoNce) {
  Rng rng(2);
  const auto q = test::random_unit(rng, 64), p = test::random_unit(rng, 64), n = test::random_unit(rng, 64);
  const auto cfg = LossConfig::full_only(64);
  EXPECT_DOUBLE_EQ(mrl_loss(q, p, {n}, cfg), infonce_at_dim(q, p, {n}, 64, cfg.temperature));
}

TEST(MrlLoss, RecomposesFromPerDimensionLosses) {
  Rng rng(3);
  const LossConfig cfg;
  const auto w = cfg.normalized_weights();
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = test::random_unit(rng, 2048), p = test::random_unit(rng, 2048);
    std::vector<EmbeddingVector> negs{test::random_unit(rng, 2048), test::random_unit(rng, 2048)};
    double parts = 0.0;
    for (std::size_t k = 0; k < 4; ++k) parts += w[k] * infonce_at_dim(q, p, negs, cfg.ladder[k], cfg.temperature);
    EXPECT_NEAR(mrl_loss(q, p, negs, cfg), parts, 1e-12);
  }
}

TEST(MrlLoss, RejectsMissingNegativesAndMismatchedDims) {
  Rng rng(4);
  const auto q = test::random_unit(rng, 2048), p = test::random_unit(rng, 2048);
  EXPECT_EQ(test::errc_of([&] { mrl_loss(q, p, {}, LossConfig{}); }), Errc::invalid_input);
  const auto small = test::random_unit(rng, 256);
  EXPECT_TRUE(test::errc_of([&] { mrl_loss(q, small, {p}, LossConfig{}); }).has_value());
}

// ---------------------------------------------------------------------------
// Projection head

TripletFeatures random_triplet(Rng& rng, std::size_t in, std::size_t negs) {
  TripletFeatures t{test::gaussian(rng, in), test::gaussian(rng, in), {}};
  for (std::size_t i = 0; i < negs; ++i) t.negatives.push_back(test::gaussian(rng, in));
  return t;
}

const LossConfig kSmallLadder{0.02, DimensionLadder{16, 8, 4, 2}, {1.0, 1.0, 0.2, 0.2}};

TEST(Head, ProjectIsUnitNorm) {
  Rng rng(5);
  const auto head = ProjectionHead::random(64, 8, 1);
  const auto v = head.project(test::gaussian(rng, 8));
  EXPECT_NEAR(prefix_norm(v.values(), 64), 1.0, 1e-12);
  EXPECT_EQ(test::errc_of([&] { head.apply(test::gaussian(rng, 7)); }), Errc::dimension_mismatch);
}

TEST(Head, GradientMatchesCentralDifferences) {
  for (int s = 0; s < 5; ++s) {
    Rng rng(200 + s);
    const auto head = ProjectionHead::random(16, 12, 300 + s);
    const auto t = random_triplet(rng, 12, 1 + rng.below(3));
    const auto lg = mrl_loss_gradient(head, t, kSmallLadder);
    EXPECT_NEAR(lg.loss, mrl_loss(head, t, kSmallLadder), 1e-12);
    for (std::size_t i = 0; i < lg.grad.size(); ++i) {
      auto hp = head, hm = head;
      hp.weights()[i] += 1e-5;
      hm.weights()[i] -= 1e-5;
      const double fd = (mrl_loss(hp, t, kSmallLadder) - mrl_loss(hm, t, kSmallLadder)) / 2e-5;
      const double scale = std::max({std::fabs(fd), std::fabs(lg.grad[i]), 1e-6});
      EXPECT_LE(std::fabs(fd - lg.grad[i]) / scale, 1e-4) << "seed " << s << " entry " << i;
    }
  }
}

TEST(Head, GradientIsOrthogonalToWeights) {
  Rng rng(6);
  const auto head = ProjectionHead::random(16, 16, 7);
  const auto lg = mrl_loss_gradient(head, random_triplet(rng, 16, 3), kSmallLadder);
  double dot = 0.0, gn = 0.0, wn = 0.0;
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    dot += lg.grad[i] * head.weights()[i];
    gn += lg.grad[i] * lg.grad[i];
    wn += head.weights()[i] * head.weights()[i];
  }
  EXPECT_LE(std::fabs(dot), 1e-6 * std::sqrt(gn * wn));
}

TEST(Head, ScalingWeightsLeavesLossUnchanged) {
  Rng rng(7);
  const auto head = ProjectionHead::random(16, 10, 8);
  const auto t = random_triplet(rng, 10, 2);
  auto w = head.weights();
  for (auto& x : w) x *= 3.5;
  const ProjectionHead scaled(16, 10, w);
  EXPECT_NEAR(mrl_loss(scaled, t, kSmallLadder), mrl_loss(head, t, kSmallLadder), 1e-10);
}

TEST(Head, SmallStepAgainstGradientLowersLoss) {
  Rng rng(8);
  const auto head = ProjectionHead::random(16, 10, 9);
  const auto t = random_triplet(rng, 10, 2);
  const auto lg = mrl_loss_gradient(head, t, kSmallLadder);
  auto w = head.weights();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 1e-4 * lg.grad[i];
  EXPECT_LT(mrl_loss(ProjectionHead(16, 10, w), t, kSmallLadder), lg.loss);
}

TEST(Head, SaveLoadRoundTrip) {
  test::TempDir dir;
  const auto head = ProjectionHead::random(32, 6, 10);
  head.save(dir.file("h.bin"));
  EXPECT_EQ(ProjectionHead::load(dir.file("h.bin")), head);
}

TEST(Head, LoadRejectsForeignOrDamagedFiles) {
  test::TempDir dir;
  ProjectionHead::random(8, 4, 1).save(dir.file("h.bin"));
  std::string bytes = test::slurp(dir.file("h.bin"));

  auto damaged = bytes;
  damaged[0] = 'X';
  test::spit(dir.file("magic.bin"), damaged);
  EXPECT_EQ(test::errc_of([&] { ProjectionHead::load(dir.file("magic.bin")); }), Errc::bad_magic);

  damaged = bytes;
  damaged[4] = 9;
  test::spit(dir.file("version.bin"), damaged);
  EXPECT_EQ(test::errc_of([&] { ProjectionHead::load(dir.file("version.bin")); }), Errc::version_mismatch);

  test::spit(dir.file("short.bin"), bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(test::errc_of([&] { ProjectionHead::load(dir.file("short.bin")); }), Errc::truncated);

  EXPECT_EQ(test::errc_of([&] { ProjectionHead::load(dir.file("absent.bin")); }), Errc::io_error);
}

TEST(Head, RejectsBadShapes) {
  EXPECT_EQ(test::errc_of([] { ProjectionHead(2, 2, {1.0, 2.0, 3.0}); }), Errc::invalid_input);
  EXPECT_EQ(test::errc_of([] { ProjectionHead(0, 2, {}); }), Errc::invalid_input);
  EXPECT_EQ(test::errc_of([] { ProjectionHead(1, 1, {NAN}); }), Errc::invalid_input);
}

// ---------------------------------------------------------------------------
// Trainer

struct SmallTask {
  std::vector<TripletFeatures> data;
  ProjectionHead init;
};

SmallTask small_task() {
  Rng rng(11);
  test::ClusterData clusters(rng);
  const auto items = clusters.items(rng, 30);
  return {clusters.triplets(rng, items, 3), ProjectionHead::random(16, test::ClusterData::kInDim, 12)};
}

TEST(Trainer, LossDecreasesOnSeparableData) {
  const auto task = small_task();
  TrainOptions opt;
  opt.epochs = 5;
  const auto res = train_head(task.data, task.init, kSmallLadder, opt);
  ASSERT_EQ(res.log.size(), 6u);
  EXPECT_EQ(res.log.front().epoch, 0u);
  EXPECT_LT(mean_loss(res.head, task.data, kSmallLadder), res.log.front().mean_loss);
}

TEST(Trainer, ZeroLearningRateKeepsHeadBitForBit) {
  const auto task = small_task();
  TrainOptions opt;
  opt.learning_rate = 0.0;
  opt.epochs = 2;
  EXPECT_EQ(train_head(task.data, task.init, kSmallLadder, opt).head, task.init);
}

TEST(Trainer, DeterministicForSeedAndJobCount) {
  const auto task = small_task();
  TrainOptions opt;
  opt.epochs = 3;
  opt.seed = 4;
  const auto a = train_head(task.data, task.init, kSmallLadder, opt);
  opt.jobs = 3;
  const auto b = train_head(task.data, task.init, kSmallLadder, opt);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.head, b.head);
}

TEST(Trainer, RejectsBadOptions) {
  const auto task = small_task();
  TrainOptions opt;
  opt.epochs = 0;
  EXPECT_EQ(test::errc_of([&] { train_head(task.data, task.init, kSmallLadder, opt); }), Errc::invalid_input);
  opt = {};
  opt.learning_rate = -1.0;
  EXPECT_EQ(test::errc_of([&] { train_head(task.data, task.init, kSmallLadder, opt); }), Errc::invalid_input);
  EXPECT_EQ(test::errc_of([&] { train_head({}, task.init, kSmallLadder, {}); }), Errc::invalid_input);
}

}  // namespace
}  // namespace mrag
