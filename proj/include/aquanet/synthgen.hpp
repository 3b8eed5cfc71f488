#ifndef AQUANET_SYNTHGEN_HPP_
#define AQUANET_SYNTHGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aquanet/image.hpp"
#include "aquanet/taxonomy.hpp"

namespace aquanet {

/// Pixel = base + amplitude * sin(2 pi f (x cos t + y sin t) + phase) + noise * N(0, 1).
struct TextureRecipe {
  std::array<double, 3> base_color{128, 128, 128};
  double ripple_frequency = 0.0;   // cycles per pixel
  double ripple_orientation = 0.0; // radians
  double ripple_amplitude = 0.0;
  double noise_amplitude = 0.0;

  bool operator==(const TextureRecipe &) const = default;
};

enum class LayoutRule { horizontal_bands, voronoi };

struct VoronoiSite {
  double y = 0;
  double x = 0;
  int label = 0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  Index height = 64;
  Index width = 64;
  /// Region labels; for bands, listed top to bottom.
  std::vector<int> palette;
  std::map<int, TextureRecipe> recipes;
  LayoutRule layout = LayoutRule::horizontal_bands;
  /// Interior band edges (rows); empty means equal-height bands.
  std::vector<Index> band_edges;
  /// Explicit Voronoi sites; if empty, `voronoi_cells` sites are drawn from the seed.
  std::vector<VoronoiSite> sites;
  int voronoi_cells = 6;
  /// Labels that are masked but not textured (e.g. the ignore id); rendered mid-grey.
  int untextured_label = -1;
};

struct Scene {
  RgbImage image;
  IndexMask mask;
};

void validate(const SceneSpec &spec);
Scene generate(const SceneSpec &spec);
IndexMask voronoi_mask(Index height, Index width, const std::vector<VoronoiSite> &sites);

struct FixtureInfo {
  std::string name;
  std::filesystem::path root;
  std::string content_hash;
};

/// Known names: aqua16, consistency4, atex-textures.
std::vector<std::string> fixture_names();
FixtureInfo generate_fixture(const std::string &name, const std::filesystem::path &root, std::uint64_t seed = 0);

/// Six-class label space shared by aqua16 and consistency4 (sea and river aquatic).
ClassTaxonomy toy_taxonomy();
std::map<int, TextureRecipe> toy_recipes();

} // namespace aquanet

#endif // AQUANET_SYNTHGEN_HPP_
