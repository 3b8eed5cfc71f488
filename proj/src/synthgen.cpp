#include "aquanet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"

#include "aquanet/dataset.hpp"
#include "aquanet/errors.hpp"
#include "aquanet/seed.hpp"

namespace fs = std::filesystem;

namespace aquanet {
namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

IndexMask band_mask(const SceneSpec &spec) {
  const std::size_t n = spec.palette.size();
  std::vector<Index> edges = spec.band_edges;
  if (edges.empty()) {
    for (std::size_t i = 1; i < n; ++i) edges.push_back(spec.height * static_cast<Index>(i) / static_cast<Index>(n));
  }
  IndexMask m(spec.height, spec.width);
  std::size_t band = 0;
  for (Index y = 0; y < spec.height; ++y) {
    while (band < edges.size() && y >= edges[band]) ++band;
    m.row(y).setConstant(static_cast<std::uint8_t>(spec.palette[band]));
  }
  return m;
}

void write_fixture_json(const fs::path &root, const std::string &name, std::uint64_t seed, const std::string &hash,
                        nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json doc = std::move(extra);
  doc["fixture"] = name;
  doc["version"] = 1;
  doc["seed"] = seed;
  doc["content_hash"] = hash;
  write_text_file(root / "fixture.json", doc.dump(2) + "\n");
}

void write_sample(const fs::path &root, const SegSample &s, const Scene &scene) {
  write_rgb_png(scene.image, root / "images" / to_string(s.split) / (s.name + ".png"));
  write_index_mask(scene.mask, root / "masks" / to_string(s.split) / (s.name + ".png"));
}

std::string image_name(const std::string &prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix.c_str(), i);
  return buf;
}

FixtureInfo make_aqua16(const fs::path &root, std::uint64_t seed) {
  const ClassTaxonomy tax = toy_taxonomy();
  const auto recipes = toy_recipes();
  std::mt19937_64 rng(derive_seed(seed, "aqua16/layout"));
  std::vector<SegSample> samples;
  for (int i = 0; i < 20; ++i) {
    SceneSpec spec;
    spec.seed = derive_seed(seed, "aqua16/" + std::to_string(i));
    spec.recipes = recipes;
    // Class i % 6 is always present so every class appears in both splits.
    std::vector<int> others;
    for (int c = 0; c < tax.num_classes(); ++c) {
      if (c != i % tax.num_classes()) others.push_back(c);
    }
    std::shuffle(others.begin(), others.end(), rng);
    const int bands = 2 + static_cast<int>(rng() % 3);
    std::vector<int> pal{i % tax.num_classes()};
    pal.insert(pal.end(), others.begin(), others.begin() + (bands - 1));
    std::shuffle(pal.begin(), pal.end(), rng);
    spec.palette = pal;
    // Edges on multiples of 8, each band at least 8 rows tall.
    std::vector<Index> cuts;
    for (Index e = 8; e < 64; e += 8) cuts.push_back(e);
    std::shuffle(cuts.begin(), cuts.end(), rng);
    cuts.resize(static_cast<std::size_t>(bands - 1));
    std::sort(cuts.begin(), cuts.end());
    spec.band_edges = cuts;

    SegSample s;
    s.name = image_name("aqua", i);
    s.split = i < 16 ? Split::train : Split::val;
    for (int c : pal) {
      if (tax.is_aquatic(c)) {
        s.primary_label = c;
        break;
      }
    }
    write_sample(root, s, generate(spec));
    samples.push_back(s);
  }
  save_taxonomy_file(tax, root / "taxonomy.json");
  write_manifest(root, samples, &tax);
  FixtureInfo info{"aqua16", root, compute_content_hash(root)};
  write_fixture_json(root, "aqua16", seed, info.content_hash);
  return info;
}

FixtureInfo make_consistency4(const fs::path &root, std::uint64_t seed) {
  const ClassTaxonomy tax = toy_taxonomy();
  const int ignore = tax.ignore_id();
  const int sea = tax.id_of("sea"), river = tax.id_of("river");
  const std::vector<std::string> annotators = {"a1", "a2", "a3"};
  const std::vector<std::string> original = {"a1", "a2", "a3", "a1"};
  const std::vector<int> primary = {sea, sea, sea, river};

  std::vector<SegSample> samples;
  nlohmann::json annotator_map = nlohmann::json::object();
  for (int i = 0; i < 4; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "consistency4/" + std::to_string(i)));
    std::uniform_real_distribution<double> pos(0.0, 64.0);
    std::vector<VoronoiSite> sites(7);
    for (std::size_t k = 0; k < sites.size(); ++k) {
      sites[k] = {pos(rng), pos(rng), static_cast<int>(rng() % static_cast<std::uint64_t>(tax.num_classes()))};
    }
    sites[0].label = primary[static_cast<std::size_t>(i)];
    if (i % 2 == 0) sites[6].label = ignore;

    SceneSpec spec;
    spec.seed = derive_seed(seed, "consistency4/texture/" + std::to_string(i));
    spec.recipes = toy_recipes();
    spec.layout = LayoutRule::voronoi;
    spec.sites = sites;
    spec.untextured_label = ignore;
    for (const auto &s : sites) {
      if (s.label != ignore) spec.palette.push_back(s.label);
    }
    SegSample s;
    s.name = image_name("scene", i);
    s.annotator_id = original[static_cast<std::size_t>(i)];
    s.primary_label = primary[static_cast<std::size_t>(i)];
    write_sample(root, s, generate(spec));
    samples.push_back(s);
    annotator_map[s.name] = *s.annotator_id;

    // Re-annotations: boundary jitter everywhere, plus one relabelled cell on
    // images the annotator did not originally label.
    for (const auto &a : annotators) {
      std::mt19937_64 r2(derive_seed(seed, "consistency4/" + a + "/" + std::to_string(i)));
      const bool own = a == *s.annotator_id;
      std::normal_distribution<double> jitter(0.0, own ? 1.0 : 3.0);
      std::vector<VoronoiSite> moved = sites;
      for (auto &m : moved) {
        m.y += jitter(r2);
        m.x += jitter(r2);
      }
      if (!own) {
        auto &cell = moved[1 + r2() % 5];
        cell.label = (cell.label + 1 + static_cast<int>(r2() % 5)) % tax.num_classes();
      }
      write_index_mask(voronoi_mask(64, 64, moved), root / "reannotations" / a / (s.name + ".png"));
    }
  }
  save_taxonomy_file(tax, root / "taxonomy.json");
  write_manifest(root, samples, &tax);
  FixtureInfo info{"consistency4", root, compute_content_hash(root, {"reannotations"})};
  write_fixture_json(root, "consistency4", seed, info.content_hash,
                     {{"annotators", annotators}, {"annotator_map", annotator_map}});
  return info;
}

FixtureInfo make_atex_textures(const fs::path &root, std::uint64_t seed) {
  const ClassTaxonomy tax("atex-textures",
                          {{0, "lake", ClassGroup::natural, true},
                           {1, "rapids", ClassGroup::natural, true},
                           {2, "terrain", ClassGroup::general, false}});
  std::map<int, TextureRecipe> recipes;
  recipes[0] = {{45, 95, 150}, 0.0, 0.0, 0.0, 8.0};
  recipes[1] = {{45, 95, 150}, 0.16, 0.35, 40.0, 8.0};
  recipes[2] = {{120, 100, 70}, 0.0, 0.0, 0.0, 20.0};
  std::mt19937_64 rng(derive_seed(seed, "atex-textures/layout"));
  std::vector<SegSample> samples;
  for (int i = 0; i < 18; ++i) {
    SceneSpec spec;
    spec.seed = derive_seed(seed, "atex-textures/" + std::to_string(i));
    spec.height = spec.width = 128;
    spec.recipes = recipes;
    const bool lake_first = rng() % 2 == 0;
    spec.palette = {2, lake_first ? 0 : 1, lake_first ? 1 : 0};
    spec.band_edges = {32, rng() % 2 == 0 ? Index{64} : Index{96}};
    SegSample s;
    s.name = image_name("tex", i);
    s.primary_label = spec.palette[1];
    write_sample(root, s, generate(spec));
    samples.push_back(s);
  }
  save_taxonomy_file(tax, root / "taxonomy.json");
  write_manifest(root, samples, &tax);
  FixtureInfo info{"atex-textures", root, compute_content_hash(root)};
  write_fixture_json(root, "atex-textures", seed, info.content_hash);
  return info;
}

} // namespace

void validate(const SceneSpec &spec) {
  if (spec.height <= 0 || spec.width <= 0 || spec.height % 32 || spec.width % 32) {
    throw InvalidSpec("canvas " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                      " is not a positive multiple of 32");
  }
  if (spec.palette.empty() && spec.sites.empty()) throw InvalidSpec("empty palette");
  for (int id : spec.palette) {
    if (id < 0 || id > 255) throw InvalidSpec("palette id " + std::to_string(id) + " does not fit a mask");
    if (!spec.recipes.count(id)) throw InvalidSpec("no texture recipe for id " + std::to_string(id));
  }
  for (auto a = spec.recipes.begin(); a != spec.recipes.end(); ++a) {
    for (auto b = std::next(a); b != spec.recipes.end(); ++b) {
      if (a->second == b->second) {
        throw InvalidSpec("recipes for ids " + std::to_string(a->first) + " and " + std::to_string(b->first) +
                          " are identical");
      }
    }
  }
  if (spec.layout == LayoutRule::horizontal_bands) {
    if (!spec.band_edges.empty() && spec.band_edges.size() + 1 != spec.palette.size()) {
      throw InvalidSpec("need palette.size() - 1 band edges");
    }
    Index prev = 0;
    for (Index e : spec.band_edges) {
      if (e <= prev || e >= spec.height) throw InvalidSpec("band edges must be increasing inside the canvas");
      prev = e;
    }
    if (spec.band_edges.empty() && static_cast<Index>(spec.palette.size()) > spec.height) {
      throw InvalidSpec("more bands than rows");
    }
  } else {
    for (const auto &s : spec.sites) {
      if (s.label != spec.untextured_label && !spec.recipes.count(s.label)) {
        throw InvalidSpec("no texture recipe for site label " + std::to_string(s.label));
      }
    }
    if (spec.sites.empty() && spec.voronoi_cells <= 0) throw InvalidSpec("voronoi_cells must be positive");
  }
}

IndexMask voronoi_mask(Index height, Index width, const std::vector<VoronoiSite> &sites) {
  IndexMask m(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (const auto &s : sites) {
        const double d = (y + 0.5 - s.y) * (y + 0.5 - s.y) + (x + 0.5 - s.x) * (x + 0.5 - s.x);
        if (d < best) {
          best = d;
          label = s.label;
        }
      }
      m(y, x) = static_cast<std::uint8_t>(label);
    }
  return m;
}

Scene generate(const SceneSpec &spec) {
  validate(spec);
  Scene scene;
  if (spec.layout == LayoutRule::horizontal_bands) {
    scene.mask = band_mask(spec);
  } else {
    std::vector<VoronoiSite> sites = spec.sites;
    if (sites.empty()) {
      std::mt19937_64 rng(derive_seed(spec.seed, "voronoi"));
      std::uniform_real_distribution<double> py(0.0, static_cast<double>(spec.height));
      std::uniform_real_distribution<double> px(0.0, static_cast<double>(spec.width));
      for (int k = 0; k < spec.voronoi_cells; ++k) {
        const double y = py(rng), x = px(rng);
        sites.push_back({y, x, spec.palette[rng() % spec.palette.size()]});
      }
    }
    scene.mask = voronoi_mask(spec.height, spec.width, sites);
  }

  std::map<int, double> phase;
  for (const auto &[id, r] : spec.recipes) {
    std::mt19937_64 prng(derive_seed(spec.seed, "phase/" + std::to_string(id)));
    phase[id] = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(prng);
  }
  std::mt19937_64 noise_rng(derive_seed(spec.seed, "noise"));
  std::normal_distribution<double> noise(0.0, 1.0);
  scene.image = RgbImage(spec.height, spec.width);
  for (Index y = 0; y < spec.height; ++y)
    for (Index x = 0; x < spec.width; ++x) {
      const int id = scene.mask(y, x);
      const auto it = spec.recipes.find(id);
      if (it == spec.recipes.end()) {
        for (int c = 0; c < 3; ++c) scene.image.at(y, x, c) = clamp_byte(128 + 10 * noise(noise_rng));
        continue;
      }
      const TextureRecipe &r = it->second;
      const double t = x * std::cos(r.ripple_orientation) + y * std::sin(r.ripple_orientation);
      const double ripple = r.ripple_amplitude * std::sin(2 * std::numbers::pi * r.ripple_frequency * t + phase[id]);
      for (int c = 0; c < 3; ++c) {
        scene.image.at(y, x, c) =
            clamp_byte(r.base_color[static_cast<std::size_t>(c)] + ripple + r.noise_amplitude * noise(noise_rng));
      }
    }
  return scene;
}

ClassTaxonomy toy_taxonomy() {
  return ClassTaxonomy("toy6", {{0, "sea", ClassGroup::natural, true},
                                {1, "river", ClassGroup::natural, true},
                                {2, "sky", ClassGroup::general, false},
                                {3, "vegetation", ClassGroup::general, false},
                                {4, "building", ClassGroup::general, false},
                                {5, "boat", ClassGroup::artificial, false}});
}

std::map<int, TextureRecipe> toy_recipes() {
  std::map<int, TextureRecipe> r;
  r[0] = {{30, 80, 140}, 0.12, 0.0, 18.0, 6.0};
  r[1] = {{95, 110, 80}, 0.20, std::numbers::pi / 2, 12.0, 6.0};
  r[2] = {{170, 200, 235}, 0.0, 0.0, 0.0, 3.0};
  r[3] = {{50, 120, 40}, 0.0, 0.0, 0.0, 25.0};
  r[4] = {{150, 140, 130}, 0.25, std::numbers::pi / 2, 30.0, 4.0};
  r[5] = {{200, 60, 50}, 0.0, 0.0, 0.0, 5.0};
  return r;
}

std::vector<std::string> fixture_names() { return {"aqua16", "consistency4", "atex-textures"}; }

FixtureInfo generate_fixture(const std::string &name, const fs::path &root, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoFailure("cannot create " + root.string() + ": " + ec.message());
  if (name == "aqua16") return make_aqua16(root, seed);
  if (name == "consistency4") return make_consistency4(root, seed);
  if (name == "atex-textures") return make_atex_textures(root, seed);
  throw InvalidSpec("unknown fixture '" + name + "'");
}

} // namespace aquanet
