#ifndef AQUANET_CONFIG_HPP_
#define AQUANET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "aquanet/modulation.hpp"
#include "aquanet/taxonomy.hpp"
#include "json.hpp"

namespace aquanet {

struct StageSpec {
  Index width = 16;
  Index stride = 1;
  Index dilation = 1;
  Index depth = 1;
};

/*
 * Plain strided/dilated 3x3 conv stages. The default is a stem plus four
 * stages: three stride-2 stages to reach 1/8 resolution, then two dilated
 * stages at 1/8.
 */
struct BackboneSpec {
  std::vector<StageSpec> stages = {
      {16, 2, 1, 1}, {32, 2, 1, 1}, {32, 2, 1, 1}, {64, 1, 2, 1}, {64, 1, 4, 1}};
  int low_level_stage = 2;
  int aux_stage = 3;
};

/// Stand-in for the imported context module: dilated branches + image pooling.
struct HeadSpec {
  std::vector<Index> dilations = {1, 12, 24, 36};
  Index branch_width = 32;
  bool global_pool = true;
};

struct AquaNetConfig {
  ClassTaxonomy taxonomy = atlantis_taxonomy();
  BackboneSpec backbone;
  HeadSpec head;
  ModulationSpec modulation;
  bool two_paths = true;
  bool low_level_modulation = true;
  bool cross_path_modulation = true;
  std::uint64_t seed = 0;

  /// Throws ConfigInvalid.
  void validate() const;
};

/// Throws ConfigInvalid naming the first key of `doc` not in `allowed`.
void check_keys(const nlohmann::json &doc, std::initializer_list<const char *> allowed, const std::string &where);

nlohmann::json to_json(const AquaNetConfig &cfg);
/// Missing keys keep their defaults; unknown keys are rejected. `base_dir` resolves a relative taxonomy path.
AquaNetConfig aquanet_config_from_json(const nlohmann::json &doc,
                                       const std::filesystem::path &base_dir = {});

} // namespace aquanet

#endif // AQUANET_CONFIG_HPP_
