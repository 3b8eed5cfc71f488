#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <set>

#include "aquanet/dataset.hpp"
#include "aquanet/synthgen.hpp"
#include "json.hpp"

using namespace aquanet;
namespace fs = std::filesystem;

namespace {

SceneSpec two_bands() {
  SceneSpec s;
  s.seed = 5;
  s.palette = {4, 1};
  s.band_edges = {24};
  s.recipes[4] = {{200, 40, 40}, 0, 0, 0, 0};
  s.recipes[1] = {{20, 60, 220}, 0.2, 0.5, 30, 4};
  return s;
}

fs::path temp_dir(const std::string &tag) {
  const fs::path p = fs::temp_directory_path() / ("aquanet_synth_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

} // namespace

TEST(Synth, TwoBandLayout) {
  const Scene sc = generate(two_bands());
  ASSERT_EQ(sc.mask.rows(), 64);
  ASSERT_EQ(sc.image.width, 64);
  for (Index y = 0; y < 64; ++y)
    for (Index x = 0; x < 64; ++x) ASSERT_EQ(sc.mask(y, x), y < 24 ? 4 : 1) << y;
  // The untextured recipe renders its base colour exactly.
  EXPECT_EQ(sc.image.at(3, 9, 0), 200);
  EXPECT_EQ(sc.image.at(3, 9, 2), 40);
}

TEST(Synth, EqualBandsWithoutEdges) {
  SceneSpec s = two_bands();
  s.band_edges.clear();
  const Scene sc = generate(s);
  EXPECT_EQ(sc.mask(31, 0), 4);
  EXPECT_EQ(sc.mask(32, 0), 1);
}

TEST(Synth, SameSeedSameBytes) {
  const Scene a = generate(two_bands()), b = generate(two_bands());
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  SceneSpec other = two_bands();
  other.seed = 6;
  EXPECT_NE(generate(other).image, a.image);
}

TEST(Synth, VoronoiAssignsNearestSite) {
  const std::vector<VoronoiSite> sites{{8, 8, 0}, {8, 56, 1}, {56, 32, 2}};
  const IndexMask m = voronoi_mask(64, 64, sites);
  for (Index y = 0; y < 64; y += 5)
    for (Index x = 0; x < 64; x += 3) {
      double best = 1e18;
      int label = -1;
      for (const auto &s : sites) {
        const double cy = y + 0.5, cx = x + 0.5;
        const double d = (cy - s.y) * (cy - s.y) + (cx - s.x) * (cx - s.x);
        if (d < best) {
          best = d;
          label = s.label;
        }
      }
      ASSERT_EQ(m(y, x), label);
    }
}

TEST(Synth, InvalidSpecs) {
  SceneSpec s = two_bands();
  s.height = 50;
  EXPECT_THROW(generate(s), InvalidSpec);
  s = two_bands();
  s.palette.clear();
  s.band_edges.clear();
  EXPECT_THROW(generate(s), InvalidSpec);
  s = two_bands();
  s.recipes.erase(1);
  EXPECT_THROW(generate(s), InvalidSpec);
  s = two_bands();
  s.recipes[1] = s.recipes[4];
  EXPECT_THROW(generate(s), InvalidSpec);
  s = two_bands();
  s.band_edges = {70};
  EXPECT_THROW(generate(s), InvalidSpec);
  s = two_bands();
  s.band_edges = {10, 20};
  EXPECT_THROW(generate(s), InvalidSpec);
}

TEST(Fixtures, Aqua16Contract) {
  const fs::path root = temp_dir("aqua16") / "d";
  const FixtureInfo info = generate_fixture("aqua16", root);
  const SegDataset ds = SegDataset::open(root);
  EXPECT_EQ(ds.split(Split::train).size(), 16u);
  EXPECT_EQ(ds.split(Split::val).size(), 4u);
  EXPECT_EQ(*ds.taxonomy(), toy_taxonomy());
  EXPECT_EQ(ds.content_hash(), info.content_hash);
  EXPECT_EQ(compute_content_hash(root), info.content_hash);
  std::set<int> seen;
  for (const auto &s : ds.samples()) {
    const IndexMask m = load_mask(s);
    EXPECT_EQ(m.rows(), 64);
    EXPECT_EQ(load_image(s).height, 64);
    // Primary label: an aquatic class present in the mask, if the image has one.
    bool has_water = false;
    for (int id : ds.taxonomy()->aquatic_ids()) has_water = has_water || (m.array() == std::uint8_t(id)).any();
    ASSERT_EQ(s.primary_label.has_value(), has_water) << s.name;
    if (s.primary_label) {
      EXPECT_TRUE(ds.taxonomy()->is_aquatic(*s.primary_label));
      EXPECT_TRUE((m.array() == std::uint8_t(*s.primary_label)).any());
    }
    seen.insert(m.data(), m.data() + m.size());
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Fixtures, RegenerationIsByteIdentical) {
  const fs::path dir = temp_dir("regen");
  for (const auto &name : fixture_names()) {
    const auto a = generate_fixture(name, dir / (name + "_a"));
    const auto b = generate_fixture(name, dir / (name + "_b"));
    EXPECT_EQ(a.content_hash, b.content_hash) << name;
    const auto c = generate_fixture(name, dir / (name + "_c"), 1);
    EXPECT_NE(a.content_hash, c.content_hash) << name;
  }
  EXPECT_THROW(generate_fixture("nope", dir / "x"), InvalidSpec);
}

TEST(Fixtures, Consistency4Contract) {
  const fs::path root = temp_dir("c4") / "d";
  generate_fixture("consistency4", root);
  const SegDataset ds = SegDataset::open(root);
  ASSERT_EQ(ds.samples().size(), 4u);
  const auto doc = nlohmann::json::parse(read_text_file(root / "fixture.json"));
  EXPECT_EQ(doc.at("annotators").size(), 3u);
  for (const auto &s : ds.samples()) {
    ASSERT_TRUE(s.annotator_id.has_value());
    EXPECT_EQ(doc.at("annotator_map").at(s.name).get<std::string>(), *s.annotator_id);
    for (const char *a : {"a1", "a2", "a3"}) {
      const IndexMask re = read_index_mask(root / "reannotations" / a / (s.name + ".png"));
      EXPECT_EQ(re.rows(), load_mask(s).rows());
    }
  }
}

TEST(Fixtures, AtexTexturesContract) {
  const fs::path root = temp_dir("tex") / "d";
  generate_fixture("atex-textures", root);
  const SegDataset ds = SegDataset::open(root);
  EXPECT_EQ(ds.samples().size(), 18u);
  for (const auto &s : ds.samples()) {
    const IndexMask m = load_mask(s);
    EXPECT_EQ(m.rows(), 128);
    EXPECT_EQ(m.rows() % 32, 0);
  }
}

TEST(Fixtures, Aqua16ClassesSeparateByMeanColour) {
  // Nearest class-mean colour, fitted on train pixels, labels most val pixels.
  const fs::path root = temp_dir("sep") / "d";
  generate_fixture("aqua16", root);
  const SegDataset ds = SegDataset::open(root);
  std::array<std::array<double, 3>, 6> sum{};
  std::array<double, 6> n{};
  for (const auto &s : ds.split(Split::train)) {
    const IndexMask m = load_mask(s);
    const RgbImage img = load_image(s);
    for (Index y = 0; y < m.rows(); ++y)
      for (Index x = 0; x < m.cols(); ++x) {
        for (int c = 0; c < 3; ++c) sum[m(y, x)][c] += img.at(y, x, c);
        ++n[m(y, x)];
      }
  }
  long correct = 0, total = 0;
  for (const auto &s : ds.split(Split::val)) {
    const IndexMask m = load_mask(s);
    const RgbImage img = load_image(s);
    for (Index y = 0; y < m.rows(); ++y)
      for (Index x = 0; x < m.cols(); ++x) {
        int best = 0;
        double best_d = 1e18;
        for (int k = 0; k < 6; ++k) {
          if (n[k] == 0) continue;
          double d = 0;
          for (int c = 0; c < 3; ++c) {
            const double diff = img.at(y, x, c) - sum[k][c] / n[k];
            d += diff * diff;
          }
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        correct += best == m(y, x);
        ++total;
      }
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.8);
}

TEST(Dataset, MissingRootNamesThePath) {
  try {
    SegDataset::open("/nonexistent/aquanet");
    FAIL();
  } catch (const IoFailure &e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/aquanet"), std::string::npos);
  }
}

TEST(Dataset, LabelOffsetShiftsStoredValues) {
  const fs::path root = temp_dir("offset");
  fs::create_directories(root / "images" / "train");
  fs::create_directories(root / "masks" / "train");
  IndexMask stored(2, 3);
  stored << 0, 1, 2, 3, 1, 0;
  write_index_mask(stored, root / "masks" / "train" / "a.png");
  write_rgb_png(RgbImage(2, 3), root / "images" / "train" / "a.png");
  const SegDataset ds = SegDataset::open(root, 1);
  const IndexMask m = load_mask(ds.samples().at(0));
  IndexMask want(2, 3);
  want << 255, 0, 1, 2, 0, 255;
  EXPECT_EQ(m, want);
  EXPECT_EQ(load_mask(SegDataset::open(root).samples().at(0)), stored);
}
