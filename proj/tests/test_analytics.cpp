#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>

#include "aquanet/analytics.hpp"
#include "aquanet/synthgen.hpp"

using namespace aquanet;
namespace fs = std::filesystem;

namespace {

constexpr int kIgnore = 255;

ClassTaxonomy four_classes() {
  return ClassTaxonomy("t4", {{0, "sea", ClassGroup::natural, true},
                              {1, "pool", ClassGroup::artificial, true},
                              {2, "sky", ClassGroup::general, false},
                              {3, "dock", ClassGroup::artificial, false}},
                       kIgnore);
}

IndexMask random_mask(Index h, Index w, int k, double p_ignore, std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> cls(0, k - 1);
  std::bernoulli_distribution ign(p_ignore);
  IndexMask m(h, w);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(ign(rng) ? kIgnore : cls(rng));
  return m;
}

IndexMask nearest(const IndexMask &m, Index size) {
  IndexMask out(size, size);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) out(y, x) = m(y * m.rows() / size, x * m.cols() / size);
  return out;
}

// Counts votes per cell with a map; lowest value wins a tie.
IndexMask vote_oracle(const std::vector<IndexMask> &masks, Index size) {
  std::vector<IndexMask> r;
  for (const auto &m : masks) r.push_back(nearest(m, size));
  IndexMask out(size, size);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      std::map<int, int> votes;
      for (const auto &m : r) ++votes[m(y, x)];
      int best = -1, best_n = 0;
      for (const auto &[v, n] : votes) {
        if (n > best_n) {
          best = v;
          best_n = n;
        }
      }
      out(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

fs::path temp_dir(const std::string &tag) {
  const fs::path p = fs::temp_directory_path() / ("aquanet_analytics_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

} // namespace

TEST(LabelStats, TallyMatchesDirectCount) {
  const auto tax = four_classes();
  std::mt19937_64 rng(1);
  std::vector<IndexMask> masks;
  for (int i = 0; i < 12; ++i) masks.push_back(random_mask(5 + i % 3, 7, i % 2 ? 4 : 2, 0.1, rng));
  const LabelStats s = label_frequency(masks, tax);

  std::vector<long> pixels(4, 0), images(4, 0);
  long total = 0, unlabeled = 0;
  for (const auto &m : masks) {
    std::vector<bool> seen(4, false);
    for (Index i = 0; i < m.size(); ++i) {
      ++total;
      if (m.data()[i] == kIgnore) {
        ++unlabeled;
        continue;
      }
      ++pixels[m.data()[i]];
      seen[m.data()[i]] = true;
    }
    for (int c = 0; c < 4; ++c) images[c] += seen[c];
  }
  EXPECT_EQ(s.num_images, 12u);
  EXPECT_EQ(s.total_pixels, total);
  EXPECT_EQ(s.unlabeled_pixels, unlabeled);
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(s.per_class[c].pixels, pixels[c]);
    EXPECT_EQ(s.per_class[c].image_count, images[c]);
    EXPECT_DOUBLE_EQ(s.per_class[c].pixel_fraction, static_cast<double>(pixels[c]) / total);
  }
  EXPECT_DOUBLE_EQ(s.waterbody_fraction, static_cast<double>(pixels[0] + pixels[1] + pixels[3]) / total);
  EXPECT_DOUBLE_EQ(s.aquatic_fraction, static_cast<double>(pixels[0] + pixels[1]) / total);
  EXPECT_DOUBLE_EQ(s.group_fraction.at(ClassGroup::general), static_cast<double>(pixels[2]) / total);
}

TEST(LabelStats, FractionsSumToOne) {
  const auto tax = four_classes();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<IndexMask> masks;
    for (int i = 0; i < 5; ++i) masks.push_back(random_mask(9, 11, 4, 0.3, rng));
    const LabelStats s = label_frequency(masks, tax);
    double sum = s.unlabeled_fraction;
    for (const auto &c : s.per_class) sum += c.pixel_fraction;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    double groups = s.unlabeled_fraction;
    for (const auto &[g, f] : s.group_fraction) groups += f;
    EXPECT_NEAR(groups, 1.0, 1e-9);
    EXPECT_NEAR(to_json(s, tax).at("fraction_sum").get<double>(), 1.0, 1e-9);
  }
}

TEST(LabelStats, MergeOfShardsEqualsOnePass) {
  const auto tax = four_classes();
  std::mt19937_64 rng(3);
  LabelTally a(tax), b(tax), all(tax);
  for (int i = 0; i < 10; ++i) {
    const auto m = random_mask(4, 4, 4, 0.2, rng);
    (i < 4 ? a : b).add(m);
    all.add(m);
  }
  a.merge(b);
  EXPECT_EQ(to_json(a.finish(), tax), to_json(all.finish(), tax));
}

TEST(LabelStats, Errors) {
  const auto tax = four_classes();
  EXPECT_THROW(label_frequency(std::vector<IndexMask>{}, tax), EmptyDataset);
  IndexMask bad = IndexMask::Zero(2, 2);
  bad(1, 1) = 9;
  LabelTally t(tax);
  EXPECT_THROW(t.add(bad), IdOutOfRange);
}

TEST(Pearson, PerfectLinearRelations) {
  const std::vector<double> x{1, 2, 3, 4, 5}, up{3, 5, 7, 9, 11}, down{10, 8, 6, 4, 2};
  EXPECT_NEAR(pearson(x, up), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, down), -1.0, 1e-15);
}

TEST(Pearson, MatchesTextbookFormula) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(20), y(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = n(rng);
      y[i] = 0.5 * x[i] + n(rng);
    }
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < 20; ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      syy += y[i] * y[i];
      sxy += x[i] * y[i];
    }
    const double want = (20 * sxy - sx * sy) / std::sqrt((20 * sxx - sx * sx) * (20 * syy - sy * sy));
    EXPECT_NEAR(pearson(x, y), want, 1e-12);
  }
  const std::vector<double> flat{2, 2, 2}, one{1};
  EXPECT_THROW(pearson(flat, std::vector<double>{1, 2, 3}), DegenerateVariance);
  EXPECT_THROW(pearson(one, one), DegenerateVariance);
  EXPECT_THROW(pearson(flat, one), LengthMismatch);
}

TEST(ModeMap, TieGoesToLowestId) {
  const auto tax = four_classes();
  std::vector<IndexMask> masks{IndexMask::Constant(4, 4, std::uint8_t{3}), IndexMask::Constant(4, 4, std::uint8_t{2})};
  const ModeMap m = spatial_mode_map(masks, 2, tax, 8);
  EXPECT_EQ(m.n_images, 2);
  EXPECT_TRUE((m.grid.array() == std::uint8_t{2}).all());

  // Ignore votes like any value but never wins a tie against a class.
  std::vector<IndexMask> with_ignore{IndexMask::Constant(2, 2, std::uint8_t{kIgnore}),
                                     IndexMask::Constant(2, 2, std::uint8_t{1})};
  EXPECT_TRUE((spatial_mode_map(with_ignore, 1, tax, 4).grid.array() == std::uint8_t{1}).all());
}

TEST(ModeMap, SingleImageIsItsNearestResize) {
  const auto tax = four_classes();
  std::mt19937_64 rng(5);
  const std::vector<IndexMask> one{random_mask(13, 9, 4, 0.1, rng)};
  const ModeMap m = spatial_mode_map(one, 0, tax, 32);
  EXPECT_EQ(m.grid, nearest(one[0], 32));
}

TEST(ModeMap, MatchesVoteOracleAndIgnoresOrder) {
  const auto tax = four_classes();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<IndexMask> masks;
    for (int i = 0; i < 5; ++i) masks.push_back(random_mask(6 + i, 10 - i, 3, 0.2, rng));
    const ModeMap m = spatial_mode_map(masks, 0, tax, 16);
    EXPECT_EQ(m.grid, vote_oracle(masks, 16));
    std::reverse(masks.begin(), masks.end());
    EXPECT_EQ(spatial_mode_map(masks, 0, tax, 16).grid, m.grid);
  }
}

TEST(ModeMap, Errors) {
  const auto tax = four_classes();
  EXPECT_THROW(spatial_mode_map(std::vector<IndexMask>{}, 0, tax, 8), NoImagesForLabel);
}

TEST(ModeMap, FixtureSelectsImagesByPrimaryLabel) {
  const fs::path root = temp_dir("c4") / "c4";
  generate_fixture("consistency4", root);
  const SegDataset ds = SegDataset::open(root);
  const ClassTaxonomy &tax = *ds.taxonomy();
  const int sea = tax.id_of("sea"), river = tax.id_of("river");
  std::vector<IndexMask> sea_masks;
  IndexMask river_mask;
  for (const auto &s : ds.samples()) {
    if (s.primary_label == sea) sea_masks.push_back(load_mask(s));
    if (s.primary_label == river) river_mask = load_mask(s);
  }
  ASSERT_EQ(sea_masks.size(), 3u);
  const ModeMap m = spatial_mode_map(ds, sea, tax, 48);
  EXPECT_EQ(m.n_images, 3);
  EXPECT_EQ(m.grid, vote_oracle(sea_masks, 48));
  const ModeMap r = spatial_mode_map(ds, river, tax, 96);
  EXPECT_EQ(r.n_images, 1);
  EXPECT_EQ(r.grid, nearest(river_mask, 96));
}

TEST(Consistency, IdenticalReannotationsScoreOneHundred) {
  const auto tax = four_classes();
  std::mt19937_64 rng(7);
  std::map<std::string, IndexMask> ref;
  std::map<std::string, std::string> owner;
  std::map<std::string, std::vector<AnnotatedMask>> re;
  for (int i = 0; i < 4; ++i) {
    const std::string name = "img" + std::to_string(i);
    ref[name] = random_mask(6, 6, 4, 0.1, rng);
    owner[name] = i < 2 ? "a" : "b";
    re["a"].push_back({name, ref[name]});
  }
  const auto rows = consistency_report(ref, re, owner, tax);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].total_images, 4);
  EXPECT_EQ(rows[0].individual_images, 2);
  EXPECT_EQ(rows[0].total_acc, 1.0);
  EXPECT_EQ(rows[0].total_miou, 1.0);
  EXPECT_EQ(*rows[0].individual_acc, 1.0);
  EXPECT_EQ(*rows[0].individual_miou, 1.0);
}

TEST(Consistency, IndividualEqualsTotalWhenAnnotatorOwnsEveryImage) {
  const auto tax = four_classes();
  std::mt19937_64 rng(8);
  std::map<std::string, IndexMask> ref;
  std::map<std::string, std::string> owner;
  std::map<std::string, std::vector<AnnotatedMask>> re;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "img" + std::to_string(i);
    ref[name] = random_mask(6, 6, 4, 0.0, rng);
    owner[name] = "a";
    re["a"].push_back({name, random_mask(6, 6, 4, 0.0, rng)});
  }
  const auto row = consistency_report(ref, re, owner, tax).at(0);
  EXPECT_EQ(*row.individual_acc, row.total_acc);
  EXPECT_EQ(*row.individual_miou, row.total_miou);
  EXPECT_LT(row.total_acc, 1.0);
}

TEST(Consistency, UnlabeledPixelsInEitherMaskAreNotScored) {
  const auto tax = four_classes();
  IndexMask ref = IndexMask::Zero(2, 2), re = IndexMask::Zero(2, 2);
  ref(0, 0) = kIgnore;
  re(0, 1) = kIgnore;
  re(1, 1) = 2;
  const auto row = consistency_report({{"x", ref}}, {{"a", {{"x", re}}}}, {}, tax).at(0);
  EXPECT_EQ(row.total_acc, 0.5);
  EXPECT_FALSE(row.individual_acc.has_value());
}

TEST(Consistency, MisalignedPairs) {
  const auto tax = four_classes();
  const IndexMask m = IndexMask::Zero(2, 2);
  EXPECT_THROW(consistency_report({{"x", m}}, {{"a", {{"y", m}}}}, {}, tax), MisalignedPair);
  EXPECT_THROW(consistency_report({{"x", m}}, {{"a", {{"x", IndexMask::Zero(3, 2)}}}}, {}, tax), MisalignedPair);
}

TEST(Consistency, FixtureOwnAnnotationsAgreeMoreThanOthers) {
  const fs::path root = temp_dir("c4b") / "c4";
  generate_fixture("consistency4", root);
  const SegDataset ds = SegDataset::open(root);
  const auto rows = consistency_report(ds, root / "reannotations", *ds.taxonomy());
  ASSERT_EQ(rows.size(), 3u);
  for (const auto &r : rows) {
    EXPECT_EQ(r.total_images, 4);
    ASSERT_TRUE(r.individual_acc.has_value());
    EXPECT_GT(*r.individual_acc, r.total_acc);
  }
  const std::string table = render_consistency_table(rows);
  EXPECT_NE(table.find("Individual mIoU"), std::string::npos);
}
