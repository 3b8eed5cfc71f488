#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aquanet/loss.hpp"
#include "aquanet/training.hpp"
#include "oracles.hpp"

using namespace aquanet;

namespace {

constexpr int kIgnore = 255;

FeatureMap<double> random_logits(Index c, Index h, Index w, std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 3.0);
  FeatureMap<double> f(c, h, w);
  for (Index i = 0; i < f.matrix().size(); ++i) f.matrix().data()[i] = n(rng);
  return f;
}

IndexMask random_mask(Index h, Index w, int k, std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> cls(0, k - 1);
  std::bernoulli_distribution ignore(0.2);
  IndexMask m(h, w);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(ignore(rng) ? kIgnore : cls(rng));
  m.data()[0] = static_cast<std::uint8_t>(cls(rng));
  return m;
}

// Per-pixel softmax then negative log-likelihood, averaged over labelled pixels.
double oracle_ce(const oracle::Tensor &logits, const IndexMask &mask) {
  double total = 0.0;
  int n = 0;
  for (int y = 0; y < logits.h; ++y)
    for (int x = 0; x < logits.w; ++x) {
      const int label = mask(y, x);
      if (label == kIgnore) continue;
      double z = 0.0;
      for (int c = 0; c < logits.c; ++c) z += std::exp(logits.at(c, y, x));
      total += -std::log(std::exp(logits.at(label, y, x)) / z);
      ++n;
    }
  return total / n;
}

} // namespace

TEST(Loss, MatchesSoftmaxNllOracleOnRandomInstances) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> kd(2, 6), hd(1, 9);
  std::uniform_real_distribution<double> wd(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = kd(rng);
    const Index h = hd(rng), w = hd(rng);
    const Index ah = (h + 1) / 2, aw = (w + 1) / 2;
    const auto main = random_logits(k, h, w, rng);
    const auto aux = random_logits(k, ah, aw, rng);
    const IndexMask mask = random_mask(h, w, k, rng);
    const double weight = trial % 10 == 0 ? 0.4 : wd(rng);

    const auto got = total_loss(main, aux, mask, kIgnore, weight);
    const double want_main = oracle_ce(oracle::from(main), mask);
    const double want_aux = oracle_ce(oracle::bilinear(oracle::from(aux), static_cast<int>(h), static_cast<int>(w)), mask);
    ASSERT_NEAR(got.main, want_main, 1e-10) << "trial " << trial;
    ASSERT_NEAR(got.aux, want_aux, 1e-10) << "trial " << trial;
    ASSERT_NEAR(got.total, want_main + weight * want_aux, 1e-10) << "trial " << trial;
  }
}

TEST(Loss, UniformTwoClassLogitsGiveLn2) {
  FeatureMap<double> logits(2, 3, 3);
  logits.matrix().setConstant(1.5);
  IndexMask mask = IndexMask::Zero(3, 3);
  mask(1, 1) = 1;
  const auto ce = softmax_cross_entropy(logits, mask, kIgnore);
  EXPECT_NEAR(ce.loss, std::log(2.0), 1e-15);
  EXPECT_EQ(ce.counted, 9);
}

TEST(Loss, ZeroAuxWeightReducesToMainLoss) {
  std::mt19937_64 rng(1);
  const auto main = random_logits(3, 4, 4, rng);
  const auto aux = random_logits(3, 2, 2, rng);
  const IndexMask mask = random_mask(4, 4, 3, rng);
  const auto l = total_loss(main, aux, mask, kIgnore, 0.0);
  EXPECT_EQ(l.total, l.main);
  EXPECT_TRUE(l.grad_aux.empty());
}

TEST(Loss, IgnoredPixelsHaveZeroGradientAndDoNotCount) {
  std::mt19937_64 rng(2);
  const auto logits = random_logits(4, 3, 5, rng);
  IndexMask mask = random_mask(3, 5, 4, rng);
  mask(2, 4) = kIgnore;
  const auto ce = softmax_cross_entropy(logits, mask, kIgnore);
  for (Index c = 0; c < 4; ++c) EXPECT_EQ(ce.grad(c, 2, 4), 0.0);
  EXPECT_EQ(ce.counted, (mask.array() != std::uint8_t{kIgnore}).count());
}

TEST(Loss, GradientsMatchCentralDifferences) {
  std::mt19937_64 rng(3);
  auto main = random_logits(3, 4, 6, rng);
  auto aux = random_logits(3, 2, 3, rng);
  const IndexMask mask = random_mask(4, 6, 3, rng);
  const double w = 0.4, eps = 1e-6;
  const auto l = total_loss(main, aux, mask, kIgnore, w);
  for (auto *pair : {&main, &aux}) {
    const auto &grad = pair == &main ? l.grad_main : l.grad_aux;
    for (Index i = 0; i < pair->matrix().size(); ++i) {
      double &v = pair->matrix().data()[i];
      const double keep = v;
      v = keep + eps;
      const double up = total_loss(main, aux, mask, kIgnore, w).total;
      v = keep - eps;
      const double down = total_loss(main, aux, mask, kIgnore, w).total;
      v = keep;
      EXPECT_NEAR(grad.matrix().data()[i], (up - down) / (2 * eps), 1e-7);
    }
  }
}

TEST(Loss, Errors) {
  FeatureMap<double> logits(2, 2, 2);
  IndexMask all_ignored = IndexMask::Constant(2, 2, std::uint8_t{kIgnore});
  EXPECT_THROW(softmax_cross_entropy(logits, all_ignored, kIgnore), AllPixelsIgnored);
  IndexMask bad = IndexMask::Zero(2, 2);
  bad(0, 1) = 2;
  EXPECT_THROW(softmax_cross_entropy(logits, bad, kIgnore), IdOutOfRange);
  EXPECT_THROW(softmax_cross_entropy(logits, IndexMask::Zero(3, 2), kIgnore), ShapeMismatch);
}

TEST(Loss, AuxWeightDefaultIsEchoedInConfig) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.aux_weight, 0.4);
  EXPECT_EQ(to_json(cfg).at("aux_weight").get<double>(), 0.4);
}
