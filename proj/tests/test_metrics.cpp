#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aquanet/metrics.hpp"

using namespace aquanet;

namespace {

constexpr int kIgnore = 255;

ClassTaxonomy taxonomy_with(int k, const std::vector<int> &aquatic) {
  std::vector<ClassDef> classes;
  for (int i = 0; i < k; ++i) {
    const bool aq = std::find(aquatic.begin(), aquatic.end(), i) != aquatic.end();
    classes.push_back({i, "c" + std::to_string(i), aq ? ClassGroup::natural : ClassGroup::general, aq});
  }
  return ClassTaxonomy("t", classes, kIgnore);
}

IndexMask mask_of(std::initializer_list<std::initializer_list<int>> rows) {
  IndexMask m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index y = 0;
  for (const auto &r : rows) {
    Index x = 0;
    for (int v : r) m(y, x++) = static_cast<std::uint8_t>(v);
    ++y;
  }
  return m;
}

struct OracleMetrics {
  double acc = -1, miou = -1, a_acc = -1, a_miou = -1;
};

// Walks pixels directly; no confusion matrix.
OracleMetrics brute_force(const std::vector<std::pair<IndexMask, IndexMask>> &pairs, int k,
                          const std::vector<int> &aquatic) {
  auto in_aq = [&](int c) { return std::find(aquatic.begin(), aquatic.end(), c) != aquatic.end(); };
  long correct = 0, total = 0, a_correct = 0, a_total = 0;
  std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
  for (const auto &[pred, gt] : pairs) {
    for (Index y = 0; y < gt.rows(); ++y)
      for (Index x = 0; x < gt.cols(); ++x) {
        const int g = gt(y, x), p = pred(y, x);
        if (g == kIgnore) continue;
        ++total;
        if (in_aq(g)) ++a_total;
        if (g == p) {
          ++correct;
          ++tp[g];
          if (in_aq(g)) ++a_correct;
        } else {
          ++fn[g];
          ++fp[p];
        }
      }
  }
  OracleMetrics o;
  o.acc = static_cast<double>(correct) / total;
  if (a_total) o.a_acc = static_cast<double>(a_correct) / a_total;
  double s = 0, as = 0;
  int n = 0, an = 0;
  for (int c = 0; c < k; ++c) {
    const long u = tp[c] + fp[c] + fn[c];
    if (u == 0) continue;
    s += static_cast<double>(tp[c]) / u;
    ++n;
    if (in_aq(c)) {
      as += static_cast<double>(tp[c]) / u;
      ++an;
    }
  }
  o.miou = s / n;
  if (an) o.a_miou = as / an;
  return o;
}

Prf brute_force_prf(const std::vector<int> &truth, const std::vector<int> &pred, int k) {
  Prf w;
  for (int c = 0; c < k; ++c) {
    double tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c) ++predicted;
      if (truth[i] == c) ++actual;
      if (pred[i] == c && truth[i] == c) ++tp;
    }
    const double p = predicted ? tp / predicted : 0, r = actual ? tp / actual : 0;
    const double f = p + r ? 2 * p * r / (p + r) : 0;
    w.precision += p * actual / truth.size();
    w.recall += r * actual / truth.size();
    w.f1 += f * actual / truth.size();
  }
  return w;
}

} // namespace

TEST(Metrics, FuzzAgainstPerPixelOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 6)(rng);
    std::vector<int> aquatic;
    for (int c = 0; c < k; ++c)
      if (std::bernoulli_distribution(0.5)(rng)) aquatic.push_back(c);
    const auto tax = taxonomy_with(k, aquatic);
    std::uniform_int_distribution<int> cls(0, k - 1), side(1, 8);
    std::bernoulli_distribution ignore(0.15);
    const int n_pairs = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<std::pair<IndexMask, IndexMask>> pairs;
    ConfusionMatrix cm(k);
    std::vector<int> flat_truth, flat_pred;
    for (int i = 0; i < n_pairs; ++i) {
      const Index h = side(rng), w = side(rng);
      IndexMask gt(h, w), pred(h, w);
      for (Index p = 0; p < gt.size(); ++p) {
        gt.data()[p] = static_cast<std::uint8_t>(ignore(rng) ? kIgnore : cls(rng));
        pred.data()[p] = static_cast<std::uint8_t>(cls(rng));
      }
      gt.data()[0] = static_cast<std::uint8_t>(cls(rng));
      for (Index p = 0; p < gt.size(); ++p) {
        if (gt.data()[p] == kIgnore) continue;
        flat_truth.push_back(gt.data()[p]);
        flat_pred.push_back(pred.data()[p]);
      }
      cm.accumulate(pred, gt, kIgnore);
      pairs.emplace_back(pred, gt);
    }
    const auto want = brute_force(pairs, k, aquatic);
    const auto rep = make_report(cm, tax);
    ASSERT_NEAR(rep.acc, want.acc, 1e-12);
    ASSERT_NEAR(rep.miou, want.miou, 1e-12);
    ASSERT_EQ(rep.a_acc.has_value(), want.a_acc >= 0) << "trial " << trial;
    if (rep.a_acc) ASSERT_NEAR(*rep.a_acc, want.a_acc, 1e-12);
    ASSERT_EQ(rep.a_miou.has_value(), want.a_miou >= 0) << "trial " << trial;
    if (rep.a_miou) ASSERT_NEAR(*rep.a_miou, want.a_miou, 1e-12);

    const auto prf = weighted_prf(flat_truth, flat_pred, k);
    const Prf wp = brute_force_prf(flat_truth, flat_pred, k);
    ASSERT_NEAR(prf.weighted.precision, wp.precision, 1e-12);
    ASSERT_NEAR(prf.weighted.recall, wp.recall, 1e-12);
    ASSERT_NEAR(prf.weighted.f1, wp.f1, 1e-12);
    ASSERT_NEAR(prf.accuracy, want.acc, 1e-12);
  }
}

TEST(Metrics, HandCaseTwoByTwo) {
  ConfusionMatrix cm(2);
  cm.accumulate(mask_of({{0, 1}, {1, 1}}), mask_of({{0, 0}, {1, 1}}), kIgnore);
  EXPECT_EQ(pixel_acc(cm), 0.75);
  // IoU(0) = 1/2, IoU(1) = 2/3
  EXPECT_DOUBLE_EQ(miou(cm), 7.0 / 12.0);
  const auto rep = make_report(cm, taxonomy_with(2, {1}));
  EXPECT_EQ(*rep.a_acc, 1.0);
  EXPECT_DOUBLE_EQ(*rep.a_miou, 2.0 / 3.0);
}

TEST(Metrics, IgnorePixelsAreExcluded) {
  ConfusionMatrix cm(2);
  cm.accumulate(mask_of({{0, 1}, {1, 0}}), mask_of({{0, kIgnore}, {1, kIgnore}}), kIgnore);
  EXPECT_EQ(cm.counted_pixels(), 2);
  EXPECT_EQ(cm.ignored_pixels(), 2);
  EXPECT_EQ(pixel_acc(cm), 1.0);
}

TEST(Metrics, AbsentClassIsSkippedInMiou) {
  ConfusionMatrix cm(3);
  cm.accumulate(mask_of({{0, 0}, {1, 1}}), mask_of({{0, 0}, {1, 1}}), kIgnore);
  EXPECT_FALSE(class_iou(cm)[2].has_value());
  EXPECT_EQ(miou(cm), 1.0);
  const std::vector<int> only2{2};
  EXPECT_THROW(miou(cm, only2), EmptyScope);
  const std::vector<int> bad{3};
  EXPECT_THROW(miou(cm, bad), IdOutOfRange);
}

TEST(Metrics, MergeEqualsJointAccumulation) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> cls(0, 3);
  ConfusionMatrix a(4), b(4), joint(4);
  for (int i = 0; i < 20; ++i) {
    IndexMask gt(3, 3), pred(3, 3);
    for (Index p = 0; p < 9; ++p) {
      gt.data()[p] = static_cast<std::uint8_t>(cls(rng));
      pred.data()[p] = static_cast<std::uint8_t>(cls(rng));
    }
    (i % 2 ? a : b).accumulate(pred, gt, kIgnore);
    joint.accumulate(pred, gt, kIgnore);
  }
  ConfusionMatrix ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab, joint);
  EXPECT_EQ(ba, joint);
}

TEST(Metrics, MiouIsSymmetricAndAccIsNot) {
  // Swapping prediction and truth transposes the matrix; IoU is unchanged.
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int t = 0; t < 50; ++t) {
    IndexMask x(4, 4), y(4, 4);
    for (Index p = 0; p < 16; ++p) {
      x.data()[p] = static_cast<std::uint8_t>(cls(rng));
      y.data()[p] = static_cast<std::uint8_t>(cls(rng));
    }
    ConfusionMatrix f(5), r(5);
    f.accumulate(x, y, kIgnore);
    r.accumulate(y, x, kIgnore);
    EXPECT_NEAR(miou(f), miou(r), 1e-15);
    EXPECT_EQ(pixel_acc(f), pixel_acc(r));
  }
}

TEST(Metrics, InvariantUnderClassRelabelling) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cls(0, 3);
  const std::uint8_t perm[4] = {2, 0, 3, 1};
  IndexMask gt(5, 5), pred(5, 5), gp(5, 5), pp(5, 5);
  for (Index p = 0; p < 25; ++p) {
    gt.data()[p] = static_cast<std::uint8_t>(cls(rng));
    pred.data()[p] = static_cast<std::uint8_t>(cls(rng));
    gp.data()[p] = perm[gt.data()[p]];
    pp.data()[p] = perm[pred.data()[p]];
  }
  ConfusionMatrix a(4), b(4);
  a.accumulate(pred, gt, kIgnore);
  b.accumulate(pp, gp, kIgnore);
  EXPECT_NEAR(miou(a), miou(b), 1e-15);
  EXPECT_EQ(pixel_acc(a), pixel_acc(b));
}

TEST(Metrics, PerfectPredictionScoresOne) {
  ConfusionMatrix cm(3);
  const auto m = mask_of({{0, 1, 2}, {2, 1, kIgnore}});
  IndexMask pred = m;
  pred(1, 2) = 0;
  cm.accumulate(pred, m, kIgnore);
  EXPECT_EQ(pixel_acc(cm), 1.0);
  EXPECT_EQ(miou(cm), 1.0);
}

TEST(Metrics, AccumulateValidatesBeforeCounting) {
  ConfusionMatrix cm(2);
  EXPECT_THROW(cm.accumulate(mask_of({{0, 3}}), mask_of({{0, 1}}), kIgnore), IdOutOfRange);
  EXPECT_THROW(cm.accumulate(mask_of({{0, 1}}), mask_of({{0, 2}}), kIgnore), IdOutOfRange);
  EXPECT_THROW(cm.accumulate(mask_of({{0}}), mask_of({{0, 1}}), kIgnore), ShapeMismatch);
  EXPECT_EQ(cm, ConfusionMatrix(2));
}

TEST(Metrics, WeightedPrfHandCases) {
  // truth 0,0,1,1  pred 0,1,1,1: P=(1, 2/3) R=(1/2, 1) F1=(2/3, 4/5)
  const std::vector<int> t{0, 0, 1, 1}, p{0, 1, 1, 1};
  const auto r = weighted_prf(t, p, 2);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.per_class[1].f1, 0.8);
  EXPECT_DOUBLE_EQ(r.weighted.f1, 0.5 * (2.0 / 3.0) + 0.5 * 0.8);
  EXPECT_DOUBLE_EQ(r.weighted.recall, 0.75);

  // Always predicting class 0 on balanced data.
  const std::vector<int> t2{0, 1, 0, 1}, p2{0, 0, 0, 0};
  const auto r2 = weighted_prf(t2, p2, 2);
  EXPECT_DOUBLE_EQ(r2.weighted.recall, 0.5);
  EXPECT_DOUBLE_EQ(r2.weighted.precision, 0.25);
  EXPECT_EQ(r2.support, (std::vector<std::int64_t>{2, 2}));

  EXPECT_THROW(weighted_prf(t, std::vector<int>{0}, 2), LengthMismatch);
  EXPECT_THROW(weighted_prf(std::vector<int>{}, std::vector<int>{}, 2), LengthMismatch);
}

TEST(Metrics, TableListsAquaticColumnsAlphabetically) {
  std::vector<ClassDef> classes = {{0, "sea", ClassGroup::natural, true},
                                   {1, "sky", ClassGroup::general, false},
                                   {2, "lake", ClassGroup::natural, true}};
  const ClassTaxonomy tax("t", classes, kIgnore);
  ConfusionMatrix cm(3);
  cm.accumulate(mask_of({{0, 1, 2}}), mask_of({{0, 1, 2}}), kIgnore);
  const std::string table = render_table(make_report(cm, tax));
  const auto header = table.substr(0, table.find('\n'));
  EXPECT_LT(header.find("lake"), header.find("sea"));
  EXPECT_LT(header.find("sea"), header.find("A-acc"));
  EXPECT_EQ(header.find("sky"), std::string::npos);
  EXPECT_NE(table.find("100.00"), std::string::npos);
  const auto j = to_json(make_report(cm, tax));
  EXPECT_EQ(j.at("miou").get<double>(), 1.0);
}
