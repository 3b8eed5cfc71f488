#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "aquanet/network.hpp"
#include "oracles.hpp"

using namespace aquanet;

namespace {

ClassTaxonomy toy_taxonomy(const std::vector<bool> &aquatic) {
  std::vector<ClassDef> classes;
  for (std::size_t i = 0; i < aquatic.size(); ++i) {
    classes.push_back({static_cast<int>(i), "c" + std::to_string(i), ClassGroup::natural, aquatic[i]});
  }
  return ClassTaxonomy("toy", classes);
}

AquaNetConfig small_config(const ClassTaxonomy &tax) {
  AquaNetConfig cfg;
  cfg.taxonomy = tax;
  cfg.backbone.stages = {{6, 2, 1, 1}, {6, 2, 1, 1}, {6, 2, 1, 1}, {8, 1, 2, 1}, {8, 1, 4, 1}};
  cfg.head.dilations = {1, 2};
  cfg.head.branch_width = 4;
  cfg.modulation.hidden = 4;
  cfg.seed = 5;
  return cfg;
}

template <typename Scalar>
FeatureMap<Scalar> random_map(const Shape &s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap<Scalar> f(s);
  f.matrix() = f.matrix().unaryExpr([&](Scalar) { return static_cast<Scalar>(n(rng)); });
  return f;
}

} // namespace

TEST(Backbone, StrideContract) {
  AquaNetConfig cfg;
  cfg.taxonomy = toy_taxonomy({true, false});
  Backbone<float> bb(cfg.backbone, 1);
  const auto out = bb.forward(random_map<float>({3, 64, 64}, 2));
  EXPECT_EQ(out.low_level.shape(), (Shape{32, 8, 8}));
  EXPECT_EQ(out.main.shape(), (Shape{64, 8, 8}));
  EXPECT_EQ(out.aux.shape(), (Shape{64, 8, 8}));
}

TEST(Backbone, Deterministic) {
  AquaNetConfig cfg;
  Backbone<float> bb(cfg.backbone, 1);
  const auto img = random_map<float>({3, 32, 64}, 2);
  const auto a = bb.forward(img);
  const auto b = bb.forward(img);
  EXPECT_TRUE(a.main == b.main);
  EXPECT_TRUE(a.low_level == b.low_level);
  Backbone<float> same(cfg.backbone, 1);
  EXPECT_TRUE(same.forward(img).main == a.main);
}

TEST(Backbone, RejectsBadShape) {
  AquaNetConfig cfg;
  Backbone<float> bb(cfg.backbone, 1);
  EXPECT_THROW(bb.forward(random_map<float>({3, 65, 65}, 2)), BadInputShape);
  EXPECT_THROW(bb.forward(random_map<float>({1, 64, 64}, 2)), BadInputShape);
}

TEST(ContextHead, ShapeContract) {
  HeadSpec spec;
  std::vector<int> ids(17);
  std::iota(ids.begin(), ids.end(), 0);
  ContextHead<float> head("h", 64, ids, spec, 3);
  const auto p = head.forward(random_map<float>({64, 8, 8}, 1));
  EXPECT_EQ(p.shape(), (Shape{17, 8, 8}));
}

TEST(ContextHead, ZeroClassifierGivesZeroLogits) {
  HeadSpec spec;
  ContextHead<float> head("h", 16, {0, 1, 2}, spec, 3);
  head.classifier().init_zero();
  EXPECT_TRUE(head.forward(random_map<float>({16, 8, 8}, 1)).matrix().isZero(0));
}

TEST(ContextHead, MatchesStraightLineOracle) {
  HeadSpec spec;
  spec.dilations = {1, 3};
  spec.branch_width = 3;
  ContextHead<double> head("h", 2, {0, 1}, spec, 3);
  ParamList<double> params;
  head.collect_parameters(params);
  // collection order: branch0, branch1, image pool, project, classifier (weight, bias each)
  double base = 0.8;
  for (std::size_t i = 0; i < params.size(); i += 2) {
    auto &w = params[i]->value;
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = base * std::cos(0.3 + r * 0.9 + c * 0.37);
    auto &b = params[i + 1]->value;
    for (Index r = 0; r < b.rows(); ++r) b(r, 0) = 0.01 * r - 0.02;
    base = -base * 0.9;
  }
  const FeatureMap<double> x = FeatureMap<double>::constant({2, 5, 6}, 1.0);
  const auto got = head.forward(x);

  // Oracle: rebuild the same layers as standalone convs with copied weights.
  auto clone = [&](std::size_t idx, Index in, Index out, ConvGeometry g) {
    Conv2d<double> c("o", in, out, g);
    c.weight().value = params[idx]->value;
    c.bias().value = params[idx + 1]->value;
    return c;
  };
  const oracle::Tensor in = oracle::from(x);
  std::vector<oracle::Tensor> parts;
  parts.push_back(oracle::leaky(oracle::conv(in, clone(0, 2, 3, {3, 1, 1})), 0.0));
  parts.push_back(oracle::leaky(oracle::conv(in, clone(2, 2, 3, {3, 1, 3})), 0.0));
  oracle::Tensor pooled(2, 1, 1);
  for (int c = 0; c < 2; ++c) {
    double s = 0;
    for (int y = 0; y < 5; ++y)
      for (int xx = 0; xx < 6; ++xx) s += in.at(c, y, xx);
    pooled.at(c, 0, 0) = s / 30.0;
  }
  const auto gp = oracle::leaky(oracle::conv(pooled, clone(4, 2, 3, {})), 0.0);
  oracle::Tensor bcast(3, 5, 6);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int xx = 0; xx < 6; ++xx) bcast.at(c, y, xx) = gp.at(c, 0, 0);
  parts.push_back(bcast);
  oracle::Tensor cat(9, 5, 6);
  for (int p = 0; p < 3; ++p)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 6; ++xx) cat.at(p * 3 + c, y, xx) = parts[static_cast<std::size_t>(p)].at(c, y, xx);
  const auto proj = oracle::leaky(oracle::conv(cat, clone(6, 9, 3, {})), 0.0);
  const auto logits = oracle::conv(proj, clone(8, 3, 2, {}));
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 5; ++y)
      for (int xx = 0; xx < 6; ++xx) EXPECT_NEAR(got(c, y, xx), logits.at(c, y, xx), 1e-12);
}

TEST(CrossPath, IdentityAtInitAndNoWeightSharing) {
  const auto tax = toy_taxonomy({true, true, false, false, false});
  auto cfg = small_config(tax);
  AquaNet<double> net(cfg);
  ASSERT_EQ(net.cross_modulations().size(), 2u);
  auto &cm = net.cross_modulations();
  const auto p1 = random_map<double>({2, 4, 4}, 1);
  const auto p2 = random_map<double>({3, 4, 4}, 2);
  EXPECT_TRUE(modulate(cm[0], p1, p2) == p1);
  EXPECT_TRUE(modulate(cm[1], p2, p1) == p2);

  // Independently seeded nets of identical shape: swapping the roles changes the result.
  ModulationNet<double> a("a", 3, 3, cfg.modulation, 10), b("b", 3, 3, cfg.modulation, 11);
  a.reinitialize(10, false);
  b.reinitialize(11, false);
  const auto q1 = random_map<double>({3, 4, 4}, 3);
  const auto q2 = random_map<double>({3, 4, 4}, 4);
  EXPECT_FALSE(modulate(a, q1, q2).matrix().isApprox(modulate(a, q2, q1).matrix(), 1e-6));
  EXPECT_FALSE(a.alpha_output().weight().value.isApprox(b.alpha_output().weight().value));
}

TEST(CrossPath, ParallelSemantics) {
  const auto tax = toy_taxonomy({true, true, false, false, false});
  auto cfg = small_config(tax);
  AquaNet<double> net(cfg);
  auto &cm = net.cross_modulations();
  cm[0].reinitialize(100, false);
  cm[1].reinitialize(101, false);
  const auto image = random_map<double>({3, 32, 32}, 7);

  // Oracle: both outputs computed from the original scores.
  AquaNetConfig plain = cfg;
  plain.cross_path_modulation = false;
  AquaNet<double> without(plain);
  const auto originals = without.path_scores(image);
  const auto expect0 = apply_modulation(cm[0].params(originals[1], 4, 4), originals[0]);
  const auto expect1 = apply_modulation(cm[1].params(originals[0], 4, 4), originals[1]);
  const auto got = net.path_scores(image);
  EXPECT_TRUE(got[0].matrix().isApprox(expect0.matrix(), 1e-13));
  EXPECT_TRUE(got[1].matrix().isApprox(expect1.matrix(), 1e-13));
  // A sequential reading would condition the second on the modulated first.
  const auto sequential1 = apply_modulation(cm[1].params(expect0, 4, 4), originals[1]);
  EXPECT_FALSE(got[1].matrix().isApprox(sequential1.matrix(), 1e-9));
}

TEST(AquaNet, AtlantisOutputShape) {
  AquaNetConfig cfg;
  cfg.head.branch_width = 8;
  cfg.modulation.hidden = 8;
  AquaNet<float> net(cfg);
  const auto out = net.forward(random_map<float>({3, 64, 64}, 1));
  EXPECT_EQ(out.logits.shape(), (Shape{56, 64, 64}));
  EXPECT_EQ(out.aux_logits.shape(), (Shape{56, 8, 8}));
  EXPECT_EQ(net.paths()[0].head.num_out(), 17);
  EXPECT_EQ(net.paths()[1].head.num_out(), 39);
}

TEST(AquaNet, MinimalSplit) {
  auto cfg = small_config(toy_taxonomy({true, false}));
  AquaNet<float> net(cfg);
  const auto scores = net.path_scores(random_map<float>({3, 32, 64}, 1));
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].channels(), 1);
  EXPECT_EQ(scores[1].channels(), 1);
  EXPECT_EQ(net.forward(random_map<float>({3, 32, 64}, 1)).logits.shape(), (Shape{2, 32, 64}));
}

TEST(AquaNet, IdentityAtInitAcrossToggles) {
  const auto tax = toy_taxonomy({false, true, false, true, false, false});
  const auto image = random_map<float>({3, 64, 32}, 9);
  auto base = small_config(tax);
  AquaNet<float> full(base);
  const auto ref = full.forward(image);
  for (int mask = 0; mask < 4; ++mask) {
    auto cfg = base;
    cfg.low_level_modulation = mask & 1;
    cfg.cross_path_modulation = mask & 2;
    AquaNet<float> net(cfg);
    const auto out = net.forward(image);
    EXPECT_TRUE(out.logits == ref.logits) << "mask " << mask;
    EXPECT_TRUE(out.aux_logits == ref.aux_logits);
  }
  // Single-path baseline starts from the same function up to rounding.
  auto single = base;
  single.two_paths = false;
  single.low_level_modulation = false;
  single.cross_path_modulation = false;
  AquaNet<float> one(single);
  EXPECT_TRUE(one.forward(image).logits.matrix().isApprox(ref.logits.matrix(), 1e-5f));
}

TEST(AquaNet, ChannelBookkeeping) {
  const auto tax = toy_taxonomy({false, true, false, false, true, true, false});
  auto cfg = small_config(tax);
  cfg.cross_path_modulation = false;
  AquaNet<double> net(cfg);
  const auto image = random_map<double>({3, 32, 32}, 4);
  const auto before = net.forward(image).logits;
  for (std::size_t p = 0; p < 2; ++p) {
    auto &path = net.paths()[p];
    for (std::size_t j = 0; j < path.class_ids.size(); ++j) {
      const int id = path.class_ids[j];
      path.head.classifier().bias().value(static_cast<Index>(j), 0) += 1000.0;
      const auto after = net.forward(image).logits;
      for (int c = 0; c < tax.num_classes(); ++c) {
        const double shift = (after.matrix().row(c) - before.matrix().row(c)).mean();
        EXPECT_NEAR(shift, c == id ? 1000.0 : 0.0, 1e-6) << "path " << p << " slot " << j;
      }
      path.head.classifier().bias().value(static_cast<Index>(j), 0) -= 1000.0;
    }
  }
}

TEST(AquaNet, ToggleParameterCounts) {
  const auto tax = toy_taxonomy({true, false, false, true});
  auto cfg = small_config(tax);
  auto count = [](AquaNetConfig c) {
    AquaNet<float> n(c);
    return parameter_count(n.parameters());
  };
  const std::size_t full = count(cfg);
  auto mod_params = [&](Index in, Index out) {
    ModulationNet<float> m("m", in, out, cfg.modulation, 0);
    ParamList<float> l;
    m.collect_parameters(l);
    return parameter_count(l);
  };
  auto no_lm = cfg;
  no_lm.low_level_modulation = false;
  EXPECT_EQ(full - count(no_lm), mod_params(3, 8) + mod_params(3, 8));
  auto no_cm = cfg;
  no_cm.cross_path_modulation = false;
  EXPECT_EQ(full - count(no_cm), mod_params(2, 2) + mod_params(2, 2));

  auto bad = cfg;
  bad.two_paths = false;
  EXPECT_THROW(AquaNet<float>{bad}, ConfigInvalid);
  bad.cross_path_modulation = false;
  EXPECT_NO_THROW(AquaNet<float>{bad});
}

TEST(AquaNet, SoftmaxSumsToOne) {
  auto cfg = small_config(toy_taxonomy({true, false, true}));
  AquaNet<double> net(cfg);
  const auto p = softmax_channels(net.forward(random_map<double>({3, 32, 32}, 1)).logits);
  EXPECT_LT((p.matrix().colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(AquaNet, FullModelGradCheck) {
  auto cfg = small_config(toy_taxonomy({true, false, true, false}));
  AquaNet<double> net(cfg);
  for (auto &p : net.paths()) p.low_level_mod->reinitialize(derive_seed(1, p.role), false);
  for (std::size_t i = 0; i < net.cross_modulations().size(); ++i) {
    net.cross_modulations()[i].reinitialize(derive_seed(2, std::to_string(i)), false);
  }
  AquaNetBlock<double> block(net);
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 6;
  const auto r = grad_check<double>(block, {{3, 32, 32}}, 1e-6, 3, opts);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst_location << " a=" << r.worst_analytic
                                        << " n=" << r.worst_numeric;
}
